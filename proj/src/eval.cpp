#include "mmbs/eval.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include "mmbs/error.hpp"
#include "mmbs/rng.hpp"

namespace mmbs {

std::vector<std::string> resolve_question(const Sample& s, const EvalOptions& opts) {
  switch (opts.form) {
    case QuestionForm::Original: return s.question;
    case QuestionForm::Shuffling: {
      Rng rng = Rng::stream(opts.shuffle_seed, {Rng::key("eval-shuffle"), static_cast<std::uint64_t>(s.id)});
      return make_shuffling(s.question, rng);
    }
    case QuestionForm::Removal:
      if (!opts.allow_test_categories) {
        throw ConfigError("removal-form evaluation needs test-time category annotations (--allow-test-categories)");
      }
      try {
        return make_removal(s.question, s.category);
      } catch (const RemovalEmpty&) {
        return s.question;
      }
  }
  return s.question;
}

EvalReport accuracy(const Predictor& predict, const Dataset& d, const EvalOptions& opts) {
  if (opts.form == QuestionForm::Removal && !opts.allow_test_categories) {
    throw ConfigError("removal-form evaluation needs test-time category annotations (--allow-test-categories)");
  }
  EvalReport r;
  r.form = opts.form;
  r.samples = d.size();
  std::array<double, 3> sums{};
  std::unordered_map<std::string, std::size_t> cat_index;
  for (const auto& s : d.samples()) {
    const auto question = resolve_question(s, opts);
    const std::string answer = predict(s, question);
    const double acc = std::clamp(s.score_of(answer), 0.0, 1.0);
    const auto t = static_cast<std::size_t>(s.qtype);
    sums[t] += acc;
    ++r.per_qtype[t].count;

    auto [it, fresh] = cat_index.emplace(s.category, r.categories.size());
    if (fresh) r.categories.push_back({s.category, s.qtype, {}, {}});
    auto& h = r.categories[it->second];
    ++h.predicted[answer];
    ++h.truth[s.top_answer().text];
  }
  double total = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    total += sums[t];
    r.per_qtype[t].accuracy = r.per_qtype[t].count ? sums[t] / static_cast<double>(r.per_qtype[t].count) : 0.0;
  }
  r.overall = d.empty() ? 0.0 : total / static_cast<double>(d.size());
  return r;
}

EvalReport accuracy(const Model& model, const Dataset& d, const EvalOptions& opts) {
  if (!d.empty() && d.d_v() != model.config().d_v) {
    throw DataError("dataset d_v " + std::to_string(d.d_v()) + " does not match model d_v " +
                    std::to_string(model.config().d_v));
  }
  const auto& vocab = model.answer_vocab();
  return accuracy(
      [&](const Sample& s, std::span<const std::string> q) { return vocab[model.predict(q, s.visual)]; }, d, opts);
}

Gap gap(const EvalReport& a, const EvalReport& b) {
  Gap g;
  g.overall = b.overall - a.overall;
  for (std::size_t t = 0; t < 3; ++t) g.per_qtype[t] = b.per_qtype[t].accuracy - a.per_qtype[t].accuracy;
  return g;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["form"] = to_string(r.form);
  j["samples"] = r.samples;
  j["overall"] = r.overall;
  nlohmann::ordered_json types;
  for (QType t : {QType::YesNo, QType::Num, QType::Other}) {
    nlohmann::ordered_json tj;
    tj["accuracy"] = r.of(t).accuracy;
    tj["count"] = r.of(t).count;
    types[std::string(to_string(t))] = std::move(tj);
  }
  j["per_qtype"] = std::move(types);
  auto cats = nlohmann::ordered_json::array();
  for (const auto& h : r.categories) {
    nlohmann::ordered_json c;
    c["category"] = h.category;
    c["qtype"] = to_string(h.qtype);
    c["predicted"] = h.predicted;
    c["truth"] = h.truth;
    cats.push_back(std::move(c));
  }
  j["categories"] = std::move(cats);
  j["provenance"] = r.provenance;
  return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.form = parse_question_form(j.at("form").get<std::string>());
    r.samples = j.at("samples").get<std::size_t>();
    r.overall = j.at("overall").get<double>();
    for (QType t : {QType::YesNo, QType::Num, QType::Other}) {
      const auto& tj = j.at("per_qtype").at(std::string(to_string(t)));
      r.per_qtype[static_cast<std::size_t>(t)] = {tj.at("accuracy").get<double>(), tj.at("count").get<std::size_t>()};
    }
    for (const auto& c : j.at("categories")) {
      CategoryHistogram h;
      h.category = c.at("category").get<std::string>();
      h.qtype = parse_qtype(c.at("qtype").get<std::string>());
      h.predicted = c.at("predicted").get<std::map<std::string, std::size_t>>();
      h.truth = c.at("truth").get<std::map<std::string, std::size_t>>();
      r.categories.push_back(std::move(h));
    }
    if (j.contains("provenance")) r.provenance = j.at("provenance");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed eval report: ") + e.what());
  }
  return r;
}

namespace {

std::map<std::string, std::map<std::string, std::size_t>> top_answer_counts(const Dataset& d) {
  std::map<std::string, std::map<std::string, std::size_t>> out;
  for (const auto& s : d.samples()) ++out[s.category][s.top_answer().text];
  return out;
}

std::string file_stem(std::size_t index, const std::string& category) {
  std::string s = std::to_string(index);
  while (s.size() < 3) s.insert(s.begin(), '0');
  s += '_';
  for (char c : category) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return s;
}

}  // namespace

std::vector<std::filesystem::path> export_distributions(
    const std::vector<std::pair<std::string, EvalReport>>& reports, const Dataset& train_set,
    const Dataset& test_set, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());

  const auto train = top_answer_counts(train_set);
  const auto test = top_answer_counts(test_set);
  std::vector<std::string> order;
  std::set<std::string> seen;
  for (const Dataset* d : {&train_set, &test_set}) {
    for (const auto& c : d->categories()) {
      if (seen.insert(c.name).second) order.push_back(c.name);
    }
  }

  auto lookup = [](const auto& table, const std::string& cat, const std::string& ans) -> std::size_t {
    auto c = table.find(cat);
    if (c == table.end()) return 0;
    auto a = c->second.find(ans);
    return a == c->second.end() ? 0 : a->second;
  };

  std::vector<std::filesystem::path> written;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::string& cat = order[k];
    std::vector<const std::map<std::string, std::size_t>*> predicted;
    for (const auto& [name, rep] : reports) {
      auto it = std::find_if(rep.categories.begin(), rep.categories.end(),
                             [&](const CategoryHistogram& h) { return h.category == cat; });
      predicted.push_back(it == rep.categories.end() ? nullptr : &it->predicted);
    }
    std::set<std::string> answers;
    for (const auto* table : {&train, &test}) {
      if (auto c = table->find(cat); c != table->end()) {
        for (const auto& [a, n] : c->second) answers.insert(a);
      }
    }
    for (const auto* p : predicted) {
      if (p) {
        for (const auto& [a, n] : *p) answers.insert(a);
      }
    }
    // Rows by descending training frequency, then answer text.
    std::vector<std::string> rows(answers.begin(), answers.end());
    std::stable_sort(rows.begin(), rows.end(), [&](const std::string& a, const std::string& b) {
      return lookup(train, cat, a) > lookup(train, cat, b);
    });

    const auto path = dir / (file_stem(k, cat) + ".tsv");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << "# category: " << cat << "\n";
    out << "answer\ttrain\ttest";
    for (const auto& [name, rep] : reports) out << '\t' << name;
    out << '\n';
    for (const auto& a : rows) {
      out << a << '\t' << lookup(train, cat, a) << '\t' << lookup(test, cat, a);
      for (const auto* p : predicted) {
        std::size_t n = 0;
        if (p) {
          if (auto it = p->find(a); it != p->end()) n = it->second;
        }
        out << '\t' << n;
      }
      out << '\n';
    }
    if (!out) throw DataError("I/O failure writing '" + path.string() + "'");
    written.push_back(path);
  }
  return written;
}

}  // namespace mmbs
