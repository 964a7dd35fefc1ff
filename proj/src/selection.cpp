#include "mmbs/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

#include "mmbs/error.hpp"

namespace mmbs {

double CategoryFreq::total() const {
  double t = 0.0;
  for (const auto& [answer, f] : freq) t += f;
  return t;
}

FreqTable compute_frequencies(const Dataset& d) {
  FreqTable table;
  std::unordered_map<std::string, std::size_t> cat_index;
  std::vector<std::unordered_map<std::string, std::size_t>> answer_index;
  for (const auto& s : d.samples()) {
    auto [it, inserted] = cat_index.emplace(s.category, table.categories.size());
    if (inserted) {
      table.categories.push_back({s.category, s.qtype, {}, 0});
      answer_index.emplace_back();
    }
    CategoryFreq& cf = table.categories[it->second];
    auto& idx = answer_index[it->second];
    ++cf.sample_count;
    for (const auto& label : s.answers) {
      auto [a, fresh] = idx.emplace(label.text, cf.freq.size());
      if (fresh) cf.freq.emplace_back(label.text, 0.0);
      cf.freq[a->second].second += label.score;
    }
  }
  return table;
}

std::vector<CategoryStats> compute_stats(const FreqTable& f, double beta, EntropyBase base) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
  std::vector<CategoryStats> out;
  out.reserve(f.categories.size());
  const double log_scale = base == EntropyBase::Two ? 1.0 / std::numbers::ln2 : 1.0;
  for (const auto& cf : f.categories) {
    const double sum = cf.total();
    if (!(sum > 0.0)) throw DataError("category '" + cf.category + "' has zero total answer frequency");
    CategoryStats st;
    st.category = cf.category;
    st.qtype = cf.qtype;
    st.z = cf.freq.size();
    double e = 0.0;
    for (const auto& [answer, fr] : cf.freq) {
      const double p = fr / sum;
      if (p > 0.0) e -= p * std::log(p);
    }
    st.entropy = e * log_scale;
    out.push_back(std::move(st));
  }
  if (out.empty()) return out;

  double mean = 0.0;
  for (const auto& st : out) mean += st.entropy;
  mean /= static_cast<double>(out.size());

  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& st = out[k];
    // 1 - sigmoid(x) == 1 / (1 + e^x)
    st.correction = 1.0 / (1.0 + std::exp(st.entropy - mean));
    st.proportion = st.correction * beta;
    st.z_unbiased =
        st.proportion > 0.0 ? std::min(st.z, static_cast<std::size_t>(std::ceil(st.proportion * static_cast<double>(st.z)))) : 0;

    auto ranked = f.categories[k].freq;
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second < b.second : a.first < b.first;
    });
    for (std::size_t i = 0; i < st.z_unbiased; ++i) st.unbiased_answers.push_back(ranked[i].first);
  }
  return out;
}

std::set<std::int64_t> select_unbiased(const Dataset& d, const std::vector<CategoryStats>& stats) {
  std::unordered_map<std::string, const CategoryStats*> by_cat;
  for (const auto& st : stats) by_cat.emplace(st.category, &st);
  std::set<std::int64_t> out;
  for (const auto& s : d.samples()) {
    auto it = by_cat.find(s.category);
    if (it == by_cat.end()) continue;
    const auto& list = it->second->unbiased_answers;
    if (std::find(list.begin(), list.end(), s.top_answer().text) != list.end()) out.insert(s.id);
  }
  return out;
}

nlohmann::ordered_json audit_report(const Dataset& d, double beta, EntropyBase base) {
  const auto table = compute_frequencies(d);
  const auto stats = compute_stats(table, beta, base);
  const auto selected = select_unbiased(d, stats);

  std::unordered_map<std::string, std::size_t> selected_per_cat;
  for (const auto& s : d.samples()) {
    if (selected.contains(s.id)) ++selected_per_cat[s.category];
  }

  nlohmann::ordered_json cats = nlohmann::ordered_json::array();
  struct TypeAcc {
    std::size_t n = 0;
    double z = 0, w = 0, p = 0, z_unb = 0;
  };
  std::map<std::string, TypeAcc> by_type;
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const auto& st = stats[k];
    const std::size_t count = table.categories[k].sample_count;
    const std::size_t sel = selected_per_cat[st.category];
    nlohmann::ordered_json c;
    c["category"] = st.category;
    c["qtype"] = to_string(st.qtype);
    c["samples"] = count;
    c["z"] = st.z;
    c["entropy"] = st.entropy;
    c["W"] = st.correction;
    c["P"] = st.proportion;
    c["z_unb"] = st.z_unbiased;
    c["unbiased_answers"] = st.unbiased_answers;
    c["selected"] = sel;
    c["selected_fraction"] = count ? static_cast<double>(sel) / static_cast<double>(count) : 0.0;
    cats.push_back(std::move(c));

    auto& acc = by_type[std::string(to_string(st.qtype))];
    ++acc.n;
    acc.z += static_cast<double>(st.z);
    acc.w += st.correction;
    acc.p += st.proportion;
    acc.z_unb += static_cast<double>(st.z_unbiased);
  }

  nlohmann::ordered_json types = nlohmann::ordered_json::object();
  for (const char* t : {"yesno", "num", "other"}) {
    auto it = by_type.find(t);
    if (it == by_type.end()) continue;
    const auto& a = it->second;
    const double n = static_cast<double>(a.n);
    nlohmann::ordered_json row;
    row["categories"] = a.n;
    row["mean_z"] = a.z / n;
    row["mean_W"] = a.w / n;
    row["mean_P"] = a.p / n;
    row["mean_z_unb"] = a.z_unb / n;
    types[t] = std::move(row);
  }

  nlohmann::ordered_json report;
  report["beta"] = beta;
  report["entropy_base"] = base == EntropyBase::Two ? "2" : "e";
  report["samples"] = d.size();
  report["selected"] = selected.size();
  report["selected_fraction"] = d.empty() ? 0.0 : static_cast<double>(selected.size()) / static_cast<double>(d.size());
  report["by_qtype"] = std::move(types);
  report["categories"] = std::move(cats);
  return report;
}

}  // namespace mmbs
