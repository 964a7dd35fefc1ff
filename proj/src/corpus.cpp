#include "mmbs/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "mmbs/error.hpp"
#include "mmbs/rng.hpp"

namespace mmbs {

namespace {

constexpr int kFormatVersion = 1;
constexpr std::string_view kFormatName = "mmbs-dataset";

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  }
  return true;
}

// Returns an error message, or nullopt when the sample is well formed.
std::optional<std::string> check_sample(const Sample& s, std::size_t d_v,
                                        std::span<const std::string> category_tokens) {
  if (s.category.empty()) return "empty category";
  if (category_tokens.empty()) return "category has no tokens";
  if (s.question.empty()) return "empty question";
  for (const auto& t : s.question) {
    if (t.empty()) return "empty question token";
  }
  if (!has_category_prefix(s.question, category_tokens)) {
    return "question does not start with category '" + s.category + "'";
  }
  if (s.visual.size() != d_v) {
    return "visual has length " + std::to_string(s.visual.size()) + ", expected " + std::to_string(d_v);
  }
  for (double v : s.visual) {
    if (!std::isfinite(v)) return "non-finite visual feature";
  }
  if (s.answers.empty()) return "empty answers list";
  for (const auto& a : s.answers) {
    if (a.text.empty()) return "empty answer text";
    if (!(a.score >= 0.0 && a.score <= 1.0)) return "answer score outside [0,1] for '" + a.text + "'";
  }
  return std::nullopt;
}

// Builds the dataset incrementally so read_dataset can report line numbers.
class DatasetBuilder {
 public:
  explicit DatasetBuilder(std::size_t d_v) : d_v_(d_v) {}

  std::optional<std::string> add(Sample s) {
    if (!d_v_known()) d_v_ = s.visual.size();
    auto it = category_tokens_.find(s.category);
    if (it == category_tokens_.end()) it = category_tokens_.emplace(s.category, tokenize(s.category)).first;
    if (auto err = check_sample(s, d_v_, it->second)) return err;
    if (!ids_.insert(s.id).second) return "duplicate id " + std::to_string(s.id);
    if (auto c = qtypes_.find(s.category); c != qtypes_.end() && c->second != s.qtype) {
      return "category '" + s.category + "' appears with two question types";
    }
    qtypes_.emplace(s.category, s.qtype);
    samples_.push_back(std::move(s));
    return std::nullopt;
  }

  Dataset finish(nlohmann::ordered_json provenance) && {
    return Dataset::from_samples(std::move(samples_), std::move(provenance), d_v_);
  }

  void set_d_v(std::size_t d_v) { d_v_ = d_v; }

 private:
  bool d_v_known() const { return d_v_ != 0 || !samples_.empty(); }

  std::size_t d_v_;
  std::vector<Sample> samples_;
  std::unordered_set<std::int64_t> ids_;
  std::unordered_map<std::string, std::vector<std::string>> category_tokens_;
  std::unordered_map<std::string, QType> qtypes_;
};

}  // namespace

std::string_view to_string(QType t) {
  switch (t) {
    case QType::YesNo: return "yesno";
    case QType::Num: return "num";
    case QType::Other: return "other";
  }
  return "other";
}

QType parse_qtype(std::string_view s) {
  if (s == "yesno") return QType::YesNo;
  if (s == "num") return QType::Num;
  if (s == "other") return QType::Other;
  throw DataError("unknown qtype '" + std::string(s) + "'");
}

const AnswerLabel& Sample::top_answer() const {
  const AnswerLabel* best = &answers.front();
  for (const auto& a : answers) {
    if (a.score > best->score || (a.score == best->score && a.text < best->text)) best = &a;
  }
  return *best;
}

double Sample::score_of(std::string_view answer) const {
  double best = 0.0;
  for (const auto& a : answers) {
    if (a.text == answer) best = std::max(best, a.score);
  }
  return best;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::exchange(cur, {}));
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '?') {
      flush();
      out.emplace_back("?");
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

bool has_category_prefix(std::span<const std::string> question, std::span<const std::string> category_tokens) {
  if (category_tokens.size() > question.size()) return false;
  for (std::size_t i = 0; i < category_tokens.size(); ++i) {
    if (!iequals(question[i], category_tokens[i])) return false;
  }
  return true;
}

Dataset Dataset::from_samples(std::vector<Sample> samples, nlohmann::ordered_json provenance, std::size_t d_v) {
  Dataset d;
  if (d_v == 0 && !samples.empty()) d_v = samples.front().visual.size();
  d.d_v_ = d_v;

  std::unordered_set<std::int64_t> ids;
  std::unordered_map<std::string, std::vector<std::string>> cat_tokens;
  std::unordered_set<std::string> seen_answers, seen_tokens;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    auto it = cat_tokens.find(s.category);
    if (it == cat_tokens.end()) it = cat_tokens.emplace(s.category, tokenize(s.category)).first;
    auto where = [&] { return "sample " + std::to_string(i) + " (id " + std::to_string(s.id) + "): "; };
    if (auto err = check_sample(s, d_v, it->second)) throw DataError(where() + *err);
    if (!ids.insert(s.id).second) throw DataError(where() + "duplicate id");

    if (auto c = d.category_lookup_.find(s.category); c == d.category_lookup_.end()) {
      d.category_lookup_.emplace(s.category, d.categories_.size());
      d.categories_.push_back({s.category, s.qtype});
    } else if (d.categories_[c->second].qtype != s.qtype) {
      throw DataError(where() + "category '" + s.category + "' appears with two question types");
    }
    for (const auto& t : s.question) {
      if (seen_tokens.insert(t).second) d.token_vocab_.push_back(t);
    }
    for (const auto& a : s.answers) {
      if (seen_answers.insert(a.text).second) d.answer_vocab_.push_back(a.text);
    }
  }
  d.samples_ = std::move(samples);
  d.provenance_ = provenance.is_null() ? nlohmann::ordered_json::object() : std::move(provenance);
  return d;
}

std::size_t Dataset::category_index(std::string_view name) const {
  auto it = category_lookup_.find(std::string(name));
  if (it == category_lookup_.end()) throw DataError("unknown category '" + std::string(name) + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::ordered_json sample_to_json(const Sample& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["category"] = s.category;
  j["qtype"] = to_string(s.qtype);
  j["question"] = s.question;
  j["visual"] = s.visual;
  auto answers = nlohmann::ordered_json::array();
  for (const auto& a : s.answers) {
    nlohmann::ordered_json aj;
    aj["text"] = a.text;
    aj["score"] = a.score;
    answers.push_back(std::move(aj));
  }
  j["answers"] = std::move(answers);
  return j;
}

Sample sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("record is not an object");
  auto field = [&](const char* name) -> const nlohmann::json& {
    auto it = j.find(name);
    if (it == j.end()) throw DataError(std::string("missing field '") + name + "'");
    return *it;
  };
  Sample s;
  try {
    const auto& id = field("id");
    if (!id.is_number_integer()) throw DataError("field 'id' must be an integer");
    s.id = id.get<std::int64_t>();
    s.category = field("category").get<std::string>();
    s.qtype = parse_qtype(field("qtype").get<std::string>());
    s.question = field("question").get<std::vector<std::string>>();
    const auto& visual = field("visual");
    if (!visual.is_array()) throw DataError("field 'visual' must be an array");
    s.visual.reserve(visual.size());
    for (const auto& v : visual) {
      if (!v.is_number()) throw DataError("field 'visual' must contain numbers");
      s.visual.push_back(v.get<double>());
    }
    const auto& answers = field("answers");
    if (!answers.is_array()) throw DataError("field 'answers' must be an array");
    for (const auto& a : answers) {
      if (!a.is_object() || !a.contains("text") || !a.contains("score") || !a["score"].is_number()) {
        throw DataError("malformed answer entry");
      }
      s.answers.push_back({a["text"].get<std::string>(), a["score"].get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed record: ") + e.what());
  }
  return s;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");

  DatasetBuilder builder(0);
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
  std::optional<std::size_t> declared_count;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fail = [&](const std::string& msg) -> DataError {
      return DataError(path.string() + ": line " + std::to_string(line_no) + ": " + msg);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw fail(std::string("malformed record: ") + e.what());
    }
    if (first && j.is_object() && j.contains("header")) {
      first = false;
      const auto& h = j["header"];
      try {
        if (h.value("format", std::string{}) != kFormatName) throw fail("unrecognized header format");
        if (h.value("version", 0) != kFormatVersion) throw fail("unsupported dataset version");
        builder.set_d_v(h.at("d_v").get<std::size_t>());
        declared_count = h.at("n_samples").get<std::size_t>();
        if (h.contains("provenance")) provenance = nlohmann::ordered_json::parse(line)["header"]["provenance"];
      } catch (const nlohmann::json::exception& e) {
        throw fail(std::string("malformed header: ") + e.what());
      }
      continue;
    }
    first = false;
    Sample s;
    try {
      s = sample_from_json(j);
    } catch (const DataError& e) {
      throw fail(e.what());
    }
    if (auto err = builder.add(std::move(s))) throw fail(*err);
  }
  Dataset d = std::move(builder).finish(std::move(provenance));
  if (declared_count && *declared_count != d.size()) {
    throw DataError(path.string() + ": header declares " + std::to_string(*declared_count) + " samples, found " +
                    std::to_string(d.size()));
  }
  return d;
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  nlohmann::ordered_json header;
  header["format"] = kFormatName;
  header["version"] = kFormatVersion;
  header["d_v"] = d.d_v();
  header["n_samples"] = d.size();
  header["n_categories"] = d.categories().size();
  header["answer_vocab_size"] = d.answer_vocab().size();
  header["token_vocab_size"] = d.token_vocab().size();
  header["provenance"] = d.provenance();
  nlohmann::ordered_json wrapper;
  wrapper["header"] = std::move(header);
  out << wrapper.dump() << '\n';
  for (const auto& s : d.samples()) out << sample_to_json(s).dump() << '\n';
  out.flush();
  if (!out) throw DataError("I/O failure writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

namespace {

constexpr std::array kYesNoCategories = {
    "is this",  "is the",   "are there", "does the",  "are these", "is there a", "do you",   "can you",
    "is it",    "are the",  "does this", "is this a", "has the",   "could this", "was the",  "will the"};
constexpr std::array kNumCategories = {
    "how many",     "what number is", "how many people are", "what time",
    "how much",     "what percent",   "how many people are in", "what is the number"};
constexpr std::array kOtherCategories = {
    "what color is the", "what is the",      "what kind of",     "what type of",  "where is the",
    "who is",            "what sport is",    "what animal is",   "what room is",  "which",
    "what is this",      "what is on the",   "what are the",     "why",           "what brand",
    "what is the man",   "what is the woman", "what color are the", "what is in the", "what does the",
    "where are the",     "what shape is the", "what is the name", "what are"};

constexpr std::array kOtherAnswers = {
    "red",     "blue",    "green",  "white",    "black",    "yellow",  "orange",   "brown",  "pink",
    "purple",  "gray",    "tennis", "baseball", "soccer",   "frisbee", "skiing",   "surfing", "kitchen",
    "bedroom", "bathroom", "street", "beach",   "park",     "grass",   "snow",     "water",  "sky",
    "wood",    "metal",   "plastic", "pizza",   "cake",     "banana",  "apple",    "sandwich", "giraffe",
    "elephant", "zebra",  "cow",    "sheep",    "horse",    "dog",     "cat",      "bird",   "man",
    "woman",   "girl",    "boy",    "left",     "right",    "table",   "floor",    "wall",   "sign",
    "shirt",   "hat",     "phone",  "laptop",   "umbrella", "kite"};

constexpr std::array kModifiers = {"small", "large", "old",  "young",  "wooden", "shiny",
                                   "striped", "distant", "tall", "short", "dark",  "bright"};
constexpr std::array kNouns = {"ball",  "dog",   "man",   "woman", "car",   "bus",   "cat",
                               "table", "chair", "kite",  "horse", "train", "plate", "bird",
                               "boat",  "clock", "shirt", "umbrella", "bench", "tree"};

// Category k gets the type at k % 6; 12 categories yield 4 yesno, 2 num, 6 other,
// close to the question-type mix of VQA v2.
constexpr std::array kTypePattern = {QType::YesNo, QType::Other, QType::Num,
                                     QType::YesNo, QType::Other, QType::Other};

std::size_t type_capacity(QType t) {
  switch (t) {
    case QType::YesNo: return kYesNoCategories.size();
    case QType::Num: return kNumCategories.size();
    case QType::Other: return kOtherCategories.size();
  }
  return 0;
}

std::size_t needed_of_type(std::size_t n_categories, QType t) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < n_categories; ++k) n += kTypePattern[k % kTypePattern.size()] == t;
  return n;
}

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1], got " + std::to_string(v));
}

Dataset generate_split(const GenConfig& cfg, const BenchmarkStructure& st, Prior prior, std::size_t n,
                       std::string_view split) {
  Rng rng = Rng::stream(cfg.seed, {Rng::key("noise"), Rng::key(split)});
  std::vector<std::vector<double>> cumulative;
  for (const auto& cat : st.categories) {
    auto p = answer_prior(cat.answers.size(), cfg.bias_strength, prior);
    std::vector<double> cum(p.size());
    double acc = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) cum[a] = (acc += p[a]);
    cum.back() = 1.0;
    cumulative.push_back(std::move(cum));
  }
  std::vector<std::vector<std::string>> cat_tokens;
  for (const auto& cat : st.categories) cat_tokens.push_back(tokenize(cat.info.name));

  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(rng.index(st.categories.size()));
    const auto& cat = st.categories[k];
    const double u = rng.uniform();
    const auto& cum = cumulative[k];
    const auto answer = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    const auto& pool = cat.concepts_of[answer];
    const auto& concept_ = st.concepts[pool[static_cast<std::size_t>(rng.index(pool.size()))]];

    Sample s;
    s.id = static_cast<std::int64_t>(i);
    s.category = cat.info.name;
    s.qtype = cat.info.qtype;
    s.question = cat_tokens[k];
    const auto& subject = st.subjects[concept_.subject];
    s.question.insert(s.question.end(), subject.begin(), subject.end());
    s.question.emplace_back("?");
    s.visual.resize(st.d_v);
    for (std::size_t d = 0; d < st.d_v; ++d) s.visual[d] = concept_.prototype[d] + cfg.visual_noise * rng.normal();

    std::size_t recorded = answer;
    if (rng.bernoulli(cfg.label_noise)) recorded = static_cast<std::size_t>(rng.index(cat.answers.size()));
    s.answers.push_back({cat.answers[recorded], 1.0});
    if (rng.bernoulli(cfg.multi_label_rate)) {
      auto other = static_cast<std::size_t>(rng.index(cat.answers.size() - 1));
      if (other >= recorded) ++other;
      s.answers.push_back({cat.answers[other], 0.3});
    }
    samples.push_back(std::move(s));
  }
  nlohmann::ordered_json prov;
  prov["split"] = split;
  prov["prior"] = prior == Prior::Train ? "train" : "shifted";
  prov["generator"] = to_json(cfg);
  return Dataset::from_samples(std::move(samples), std::move(prov), st.d_v);
}

// Spreads the concepts evenly over `n_answers` values in random order.
std::vector<std::size_t> attribute_table(Rng& rng, std::size_t n_concepts, std::size_t n_answers) {
  std::vector<std::size_t> table(n_concepts);
  for (std::size_t c = 0; c < n_concepts; ++c) table[c] = c % n_answers;
  rng.shuffle(std::span(table));
  return table;
}

}  // namespace

void GenConfig::validate() const {
  if (n_categories == 0) throw ConfigError("n_categories must be positive");
  for (QType t : {QType::YesNo, QType::Num, QType::Other}) {
    if (needed_of_type(n_categories, t) > type_capacity(t)) {
      throw ConfigError("n_categories=" + std::to_string(n_categories) + " exceeds the built-in " +
                        std::string(to_string(t)) + " category list");
    }
  }
  if (answers_per_category < 2) throw ConfigError("answers_per_category must be at least 2");
  if (answers_per_category > kOtherAnswers.size()) {
    throw ConfigError("answers_per_category must be at most " + std::to_string(kOtherAnswers.size()));
  }
  if (n_subjects == 0 || n_subjects > kModifiers.size() * kNouns.size()) {
    throw ConfigError("n_subjects must lie in [1," + std::to_string(kModifiers.size() * kNouns.size()) + "]");
  }
  if (variants_per_subject == 0) throw ConfigError("variants_per_subject must be positive");
  if (n_subjects * variants_per_subject < answers_per_category) {
    throw ConfigError("n_subjects * variants_per_subject must be at least answers_per_category");
  }
  if (n_train == 0 || n_test == 0) throw ConfigError("n_train and n_test must be positive");
  check_unit(bias_strength, "bias_strength");
  check_unit(label_noise, "label_noise");
  check_unit(multi_label_rate, "multi_label_rate");
  if (d_v == 0) throw ConfigError("d_v must be positive");
  if (!(prototype_scale > 0.0) || !(visual_noise >= 0.0)) throw ConfigError("visual scales must be positive");
}

nlohmann::ordered_json to_json(const GenConfig& c) {
  nlohmann::ordered_json j;
  j["n_categories"] = c.n_categories;
  j["answers_per_category"] = c.answers_per_category;
  j["n_subjects"] = c.n_subjects;
  j["variants_per_subject"] = c.variants_per_subject;
  j["n_train"] = c.n_train;
  j["n_test"] = c.n_test;
  j["n_id_test"] = c.n_id_test;
  j["bias_strength"] = c.bias_strength;
  j["label_noise"] = c.label_noise;
  j["d_v"] = c.d_v;
  j["multi_label_rate"] = c.multi_label_rate;
  j["prototype_scale"] = c.prototype_scale;
  j["visual_noise"] = c.visual_noise;
  j["seed"] = c.seed;
  return j;
}

GenConfig gen_config_from_json(const nlohmann::json& j) {
  GenConfig c;
  try {
    c.n_categories = j.value("n_categories", c.n_categories);
    c.answers_per_category = j.value("answers_per_category", c.answers_per_category);
    c.n_subjects = j.value("n_subjects", c.n_subjects);
    c.variants_per_subject = j.value("variants_per_subject", c.variants_per_subject);
    c.n_train = j.value("n_train", c.n_train);
    c.n_test = j.value("n_test", c.n_test);
    c.n_id_test = j.value("n_id_test", c.n_id_test);
    c.bias_strength = j.value("bias_strength", c.bias_strength);
    c.label_noise = j.value("label_noise", c.label_noise);
    c.d_v = j.value("d_v", c.d_v);
    c.multi_label_rate = j.value("multi_label_rate", c.multi_label_rate);
    c.prototype_scale = j.value("prototype_scale", c.prototype_scale);
    c.visual_noise = j.value("visual_noise", c.visual_noise);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed generator config: ") + e.what());
  }
  return c;
}

std::vector<double> answer_prior(std::size_t n_answers, double bias_strength, Prior prior) {
  // Mixture of uniform and a point mass on the head answer; the shifted prior
  // is the same masses with the rank order reversed.
  std::vector<double> p(n_answers, (1.0 - bias_strength) / static_cast<double>(n_answers));
  const std::size_t head = prior == Prior::Train ? 0 : n_answers - 1;
  p[head] += bias_strength;
  return p;
}

BenchmarkStructure build_structure(const GenConfig& cfg) {
  cfg.validate();
  Rng rng = Rng::stream(cfg.seed, {Rng::key("structure")});
  BenchmarkStructure st;
  st.d_v = cfg.d_v;

  std::vector<std::vector<std::string>> phrases;
  for (const char* m : kModifiers) {
    for (const char* n : kNouns) phrases.push_back({m, n});
  }
  rng.shuffle(std::span(phrases));
  st.subjects.assign(phrases.begin(), phrases.begin() + static_cast<std::ptrdiff_t>(cfg.n_subjects));

  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    for (std::size_t v = 0; v < cfg.variants_per_subject; ++v) {
      BenchmarkConcept c;
      c.subject = s;
      c.prototype.resize(cfg.d_v);
      for (auto& x : c.prototype) x = cfg.prototype_scale * rng.normal();
      st.concepts.push_back(std::move(c));
    }
  }
  const std::size_t n_concepts = st.concepts.size();

  // One yes/no attribute for all yes/no categories, as answer text per concept.
  const std::vector<std::string> yes_no = {"yes", "no"};
  const auto yes_no_table = attribute_table(rng, n_concepts, 2);

  std::size_t used[3] = {0, 0, 0};
  for (std::size_t k = 0; k < cfg.n_categories; ++k) {
    BenchmarkCategory cat;
    const QType t = kTypePattern[k % kTypePattern.size()];
    const auto ti = static_cast<std::size_t>(t);
    switch (t) {
      case QType::YesNo: cat.info = {kYesNoCategories[used[ti]++], t}; break;
      case QType::Num: cat.info = {kNumCategories[used[ti]++], t}; break;
      case QType::Other: cat.info = {kOtherCategories[used[ti]++], t}; break;
    }

    std::vector<std::string> values;
    std::vector<std::size_t> table;
    if (t == QType::YesNo) {
      values = yes_no;
      table = yes_no_table;
    } else {
      if (t == QType::Num) {
        for (std::size_t a = 0; a < cfg.answers_per_category; ++a) values.push_back(std::to_string(a));
      } else {
        std::vector<std::string> pool(kOtherAnswers.begin(), kOtherAnswers.end());
        rng.shuffle(std::span(pool));
        values.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg.answers_per_category));
      }
      table = attribute_table(rng, n_concepts, values.size());
    }

    // Rank order of this category's training prior. Yes/no heads alternate
    // between "yes" and "no" over the yes/no categories.
    std::vector<std::size_t> rank(values.size());
    for (std::size_t a = 0; a < rank.size(); ++a) rank[a] = a;
    if (t == QType::YesNo) {
      if ((used[ti] - 1) % 2 == 1) std::swap(rank[0], rank[1]);
    } else {
      rng.shuffle(std::span(rank));
    }
    std::vector<std::size_t> position(values.size());
    for (std::size_t r = 0; r < rank.size(); ++r) {
      cat.answers.push_back(values[rank[r]]);
      position[rank[r]] = r;
    }
    cat.answer_of.resize(n_concepts);
    cat.concepts_of.resize(values.size());
    for (std::size_t c = 0; c < n_concepts; ++c) {
      cat.answer_of[c] = position[table[c]];
      cat.concepts_of[cat.answer_of[c]].push_back(c);
    }
    st.categories.push_back(std::move(cat));
  }
  return st;
}

GeneratedSplits generate(const GenConfig& cfg) {
  const BenchmarkStructure st = build_structure(cfg);
  GeneratedSplits out;
  out.train = generate_split(cfg, st, Prior::Train, cfg.n_train, "train");
  out.test = generate_split(cfg, st, Prior::Shifted, cfg.n_test, "test");
  if (cfg.n_id_test > 0) out.id_test = generate_split(cfg, st, Prior::Train, cfg.n_id_test, "id_test");
  return out;
}

}  // namespace mmbs
