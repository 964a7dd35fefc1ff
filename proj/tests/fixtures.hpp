#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mmbs/corpus.hpp"
#include "mmbs/rng.hpp"

namespace fixture {

inline mmbs::Sample sample(std::int64_t id, const std::string& category, mmbs::QType qtype,
                           const std::string& question, std::vector<mmbs::AnswerLabel> answers,
                           std::vector<double> visual = {0.0, 0.0}) {
  mmbs::Sample s;
  s.id = id;
  s.category = category;
  s.qtype = qtype;
  s.question = mmbs::tokenize(question);
  s.visual = std::move(visual);
  s.answers = std::move(answers);
  return s;
}

/// Random corpus with at most 5 categories, 8 answers and 50 samples.
inline std::vector<mmbs::Sample> micro_corpus(mmbs::Rng& rng) {
  static const char* kAnswers[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
  static const double kScores[] = {0.3, 0.6, 0.9, 1.0};
  const std::size_t n_cat = 1 + rng.index(5);
  const std::size_t n = 1 + rng.index(50);
  std::vector<std::size_t> n_ans(n_cat);
  for (auto& a : n_ans) a = 1 + rng.index(8);
  std::vector<mmbs::Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = rng.index(n_cat);
    std::vector<mmbs::AnswerLabel> labels;
    const std::size_t n_labels = 1 + rng.index(std::min<std::size_t>(3, n_ans[k]));
    while (labels.size() < n_labels) {
      const std::string text = kAnswers[rng.index(n_ans[k])];
      bool dup = false;
      for (const auto& l : labels) dup |= l.text == text;
      if (!dup) labels.push_back({text, rng.bernoulli(0.5) ? kScores[rng.index(4)] : 0.05 + 0.95 * rng.uniform()});
    }
    out.push_back(sample(static_cast<std::int64_t>(i), "cat" + std::to_string(k), mmbs::QType::Other,
                         "cat" + std::to_string(k) + " thing ?", std::move(labels)));
  }
  return out;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mmbs_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixture
