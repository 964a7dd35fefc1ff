#include "mmbs/positives.hpp"

#include <algorithm>

#include "mmbs/error.hpp"

namespace mmbs {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::S: return "s";
    case Strategy::R: return "r";
    case Strategy::B: return "b";
    case Strategy::SR: return "sr";
  }
  return "sr";
}

Strategy parse_strategy(std::string_view s) {
  std::string v(s);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "s") return Strategy::S;
  if (v == "r") return Strategy::R;
  if (v == "b") return Strategy::B;
  if (v == "sr") return Strategy::SR;
  throw ConfigError("unknown strategy '" + std::string(s) + "' (expected s, r, b or sr)");
}

std::string_view to_string(QuestionForm f) {
  switch (f) {
    case QuestionForm::Original: return "original";
    case QuestionForm::Shuffling: return "shuffle";
    case QuestionForm::Removal: return "removal";
  }
  return "original";
}

QuestionForm parse_question_form(std::string_view s) {
  if (s == "original") return QuestionForm::Original;
  if (s == "shuffle" || s == "shuffling") return QuestionForm::Shuffling;
  if (s == "removal") return QuestionForm::Removal;
  throw ConfigError("unknown question form '" + std::string(s) + "' (expected original, shuffle or removal)");
}

std::vector<std::string> make_removal(std::span<const std::string> question, std::string_view category) {
  const auto cat = tokenize(category);
  if (cat.empty() || !has_category_prefix(question, cat)) {
    throw DataError("question does not start with category '" + std::string(category) + "'");
  }
  std::vector<std::string> rest(question.begin() + static_cast<std::ptrdiff_t>(cat.size()), question.end());
  if (std::all_of(rest.begin(), rest.end(), [](const std::string& t) { return t == "?"; })) {
    throw RemovalEmpty("removing '" + std::string(category) + "' leaves no content");
  }
  return rest;
}

std::vector<QuestionForm> positive_forms(Strategy strategy, QType qtype, bool exempt) {
  if (exempt) return {QuestionForm::Original};
  switch (strategy) {
    case Strategy::S: return {QuestionForm::Shuffling};
    case Strategy::R: return {QuestionForm::Removal};
    case Strategy::B: return {QuestionForm::Shuffling, QuestionForm::Removal};
    case Strategy::SR: return {qtype == QType::YesNo ? QuestionForm::Removal : QuestionForm::Shuffling};
  }
  return {QuestionForm::Original};
}

Rng shuffle_stream(std::uint64_t seed, std::uint64_t epoch, std::int64_t sample_id) {
  return Rng::stream(seed, {Rng::key("question-shuffle"), epoch, static_cast<std::uint64_t>(sample_id)});
}

std::vector<PositiveAssignment> assign_positives(const Dataset& d, Strategy strategy,
                                                 const std::set<std::int64_t>& unbiased, std::uint64_t seed,
                                                 std::uint64_t epoch, AssignmentCounts* counts) {
  AssignmentCounts local;
  std::vector<PositiveAssignment> out;
  out.reserve(d.size());
  for (const auto& s : d.samples()) {
    PositiveAssignment pa;
    pa.sample_id = s.id;
    const bool exempt = unbiased.contains(s.id);
    local.exempt += exempt;
    for (QuestionForm f : positive_forms(strategy, s.qtype, exempt)) {
      switch (f) {
        case QuestionForm::Original:
          pa.positives.push_back(s.question);
          pa.forms.push_back(f);
          break;
        case QuestionForm::Shuffling: {
          Rng rng = shuffle_stream(seed, epoch, s.id);
          pa.positives.push_back(make_shuffling(s.question, rng));
          pa.forms.push_back(f);
          ++local.constructed;
          break;
        }
        case QuestionForm::Removal:
          try {
            pa.positives.push_back(make_removal(s.question, s.category));
            pa.forms.push_back(f);
            ++local.constructed;
          } catch (const RemovalEmpty&) {
            pa.positives.push_back(s.question);
            pa.forms.push_back(QuestionForm::Original);
            ++local.removal_fallbacks;
          }
          break;
      }
    }
    out.push_back(std::move(pa));
  }
  if (counts) *counts = local;
  return out;
}

}  // namespace mmbs
