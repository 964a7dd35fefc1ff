#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mmbs/corpus.hpp"
#include "mmbs/model.hpp"
#include "mmbs/positives.hpp"

namespace mmbs {

struct TypeAccuracy {
  double accuracy = 0.0;
  std::size_t count = 0;

  bool operator==(const TypeAccuracy&) const = default;
};

struct CategoryHistogram {
  std::string category;
  QType qtype = QType::Other;
  std::map<std::string, std::size_t> predicted;
  std::map<std::string, std::size_t> truth;  // top answer per sample

  bool operator==(const CategoryHistogram&) const = default;
};

struct EvalReport {
  QuestionForm form = QuestionForm::Original;
  std::size_t samples = 0;
  double overall = 0.0;
  std::array<TypeAccuracy, 3> per_qtype{};  // indexed by QType
  std::vector<CategoryHistogram> categories;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();

  const TypeAccuracy& of(QType t) const { return per_qtype[static_cast<std::size_t>(t)]; }
  bool operator==(const EvalReport&) const = default;
};

struct EvalOptions {
  QuestionForm form = QuestionForm::Original;
  // Removal needs the category annotation of each test question.
  bool allow_test_categories = false;
  std::uint64_t shuffle_seed = 1;
};

/// Anything that picks an answer string for a sample given the question form
/// actually shown to it.
using Predictor = std::function<std::string(const Sample&, std::span<const std::string> question)>;

/// Soft-score accuracy: each sample earns the score it assigns to the
/// predicted answer. Throws ConfigError for Removal without
/// allow_test_categories.
EvalReport accuracy(const Predictor& predict, const Dataset& d, const EvalOptions& opts);
/// Throws DataError when the dataset does not fit the model's vocabulary or d_v.
EvalReport accuracy(const Model& model, const Dataset& d, const EvalOptions& opts);

/// The question as shown at evaluation time.
std::vector<std::string> resolve_question(const Sample& s, const EvalOptions& opts);

struct Gap {
  double overall = 0.0;
  std::array<double, 3> per_qtype{};
};

/// b - a, overall and per question type.
Gap gap(const EvalReport& a, const EvalReport& b);

nlohmann::ordered_json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// One tab-separated file per category with columns
/// answer, train, test, then one predicted-count column per report.
/// Returns the files written.
std::vector<std::filesystem::path> export_distributions(
    const std::vector<std::pair<std::string, EvalReport>>& reports, const Dataset& train_set,
    const Dataset& test_set, const std::filesystem::path& dir);

}  // namespace mmbs
