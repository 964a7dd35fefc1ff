#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace mmbs {

enum class QType { YesNo, Num, Other };

std::string_view to_string(QType t);
QType parse_qtype(std::string_view s);

struct AnswerLabel {
  std::string text;
  double score = 1.0;

  bool operator==(const AnswerLabel&) const = default;
};

struct Sample {
  std::int64_t id = 0;
  std::string category;
  QType qtype = QType::Other;
  std::vector<std::string> question;
  std::vector<double> visual;
  std::vector<AnswerLabel> answers;

  /// Highest-score label; ties go to the lexicographically smallest text.
  const AnswerLabel& top_answer() const;
  /// Score this sample assigns to `answer`, 0 when unlisted.
  double score_of(std::string_view answer) const;

  bool operator==(const Sample&) const = default;
};

struct CategoryInfo {
  std::string name;
  QType qtype = QType::Other;

  bool operator==(const CategoryInfo&) const = default;
};

/// Lowercases and splits on whitespace; '?' always becomes its own token.
std::vector<std::string> tokenize(std::string_view text);

/// Token-wise, case-insensitive prefix test.
bool has_category_prefix(std::span<const std::string> question, std::span<const std::string> category_tokens);

/// Immutable collection of samples with vocabularies frozen in order of first
/// occurrence (samples in order, answers and tokens in record order).
class Dataset {
 public:
  Dataset() = default;

  /// Validates every sample and builds the vocabularies. Throws DataError.
  static Dataset from_samples(std::vector<Sample> samples, nlohmann::ordered_json provenance = {},
                              std::size_t d_v = 0);

  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t d_v() const { return d_v_; }

  const std::vector<std::string>& answer_vocab() const { return answer_vocab_; }
  const std::vector<std::string>& token_vocab() const { return token_vocab_; }
  const std::vector<CategoryInfo>& categories() const { return categories_; }
  const nlohmann::ordered_json& provenance() const { return provenance_; }

  /// Index into categories(); throws DataError when absent.
  std::size_t category_index(std::string_view name) const;

  bool operator==(const Dataset& o) const {
    return samples_ == o.samples_ && d_v_ == o.d_v_ && answer_vocab_ == o.answer_vocab_ &&
           token_vocab_ == o.token_vocab_ && categories_ == o.categories_ && provenance_ == o.provenance_;
  }

 private:
  std::vector<Sample> samples_;
  std::size_t d_v_ = 0;
  std::vector<std::string> answer_vocab_;
  std::vector<std::string> token_vocab_;
  std::vector<CategoryInfo> categories_;
  std::unordered_map<std::string, std::size_t> category_lookup_;
  nlohmann::ordered_json provenance_;
};

Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& d, const std::filesystem::path& path);

/// Record (de)serialization for a single line; exposed for tests and tools.
nlohmann::ordered_json sample_to_json(const Sample& s);
Sample sample_from_json(const nlohmann::json& j);

struct GenConfig {
  std::size_t n_categories = 12;
  std::size_t answers_per_category = 8;
  // Latent concepts are (subject, variant) pairs shared by every category.
  // The question names the subject; only the image tells the variants apart.
  std::size_t n_subjects = 16;
  std::size_t variants_per_subject = 4;
  std::size_t n_train = 20000;
  std::size_t n_test = 5000;
  // Extra split drawn from the training prior, for in-distribution evaluation.
  std::size_t n_id_test = 0;
  double bias_strength = 0.9;
  double label_noise = 0.0;
  std::size_t d_v = 16;
  double multi_label_rate = 0.1;
  double prototype_scale = 3.0;
  double visual_noise = 0.5;
  std::uint64_t seed = 1;

  /// Throws ConfigError.
  void validate() const;
};

nlohmann::ordered_json to_json(const GenConfig& c);
GenConfig gen_config_from_json(const nlohmann::json& j);

/// The latent structure shared by all splits of one benchmark.
struct BenchmarkConcept {
  std::size_t subject = 0;
  std::vector<double> prototype;  // d_v
};

struct BenchmarkCategory {
  CategoryInfo info;
  std::vector<std::string> answers;        // rank order, head of the training prior first
  std::vector<std::size_t> answer_of;      // concept -> index into answers
  std::vector<std::vector<std::size_t>> concepts_of;  // answer index -> concepts
};

/// Every yes/no category reads the same yes/no attribute of a concept, so its
/// wording carries no information about the answer. Every other category
/// reads an attribute of its own.
struct BenchmarkStructure {
  std::vector<std::vector<std::string>> subjects;  // token phrases
  std::vector<BenchmarkConcept> concepts;
  std::vector<BenchmarkCategory> categories;
  std::size_t d_v = 0;
};

BenchmarkStructure build_structure(const GenConfig& cfg);

enum class Prior { Train, Shifted };

/// Per-category answer marginal, indexed like BenchmarkCategory::answers.
std::vector<double> answer_prior(std::size_t n_answers, double bias_strength, Prior prior);

struct GeneratedSplits {
  Dataset train;
  Dataset test;
  Dataset id_test;  // empty unless cfg.n_id_test > 0
};

GeneratedSplits generate(const GenConfig& cfg);

}  // namespace mmbs
