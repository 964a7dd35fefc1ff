#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmbs/corpus.hpp"

namespace mmbs {

/// Cumulative label score per answer within one question category.
struct CategoryFreq {
  std::string category;
  QType qtype = QType::Other;
  // (answer, cumulative score) in order of first appearance within the category
  std::vector<std::pair<std::string, double>> freq;
  std::size_t sample_count = 0;  // M_C

  double total() const;
};

/// Categories appear in dataset order. Sums accumulate samples in dataset
/// order and labels in record order; an independent recount in the same order
/// reproduces every entry bit for bit.
struct FreqTable {
  std::vector<CategoryFreq> categories;
};

enum class EntropyBase { Natural, Two };

struct CategoryStats {
  std::string category;
  QType qtype = QType::Other;
  double entropy = 0.0;     // of the normalized frequency vector
  double correction = 0.0;  // W = 1 - sigmoid(E - mean(E))
  double proportion = 0.0;  // P = W * beta
  std::size_t z = 0;        // answer-space size of the category
  std::size_t z_unbiased = 0;
  // the z_unbiased least frequent answers, ascending by (frequency, text)
  std::vector<std::string> unbiased_answers;
};

FreqTable compute_frequencies(const Dataset& d);

/// Throws DataError for a category whose total frequency is zero and
/// ConfigError for beta outside [0,1].
std::vector<CategoryStats> compute_stats(const FreqTable& f, double beta, EntropyBase base = EntropyBase::Natural);

/// Ids of samples whose top answer is among their category's unbiased answers.
std::set<std::int64_t> select_unbiased(const Dataset& d, const std::vector<CategoryStats>& stats);

/// Per-category and per-question-type summary of the selection, as written by
/// the `audit` command.
nlohmann::ordered_json audit_report(const Dataset& d, double beta, EntropyBase base = EntropyBase::Natural);

}  // namespace mmbs
