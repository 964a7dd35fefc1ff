#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmbs/corpus.hpp"
#include "mmbs/rng.hpp"

namespace mmbs {

enum class Strategy { S, R, B, SR };
enum class QuestionForm { Original, Shuffling, Removal };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view s);
std::string_view to_string(QuestionForm f);
/// Accepts "original", "shuffle"/"shuffling", "removal".
QuestionForm parse_question_form(std::string_view s);

/// Uniform random permutation of `question` (Fisher-Yates on a copy).
template <typename T>
std::vector<T> make_shuffling(std::span<const T> question, Rng& rng) {
  std::vector<T> out(question.begin(), question.end());
  rng.shuffle(std::span<T>(out));
  return out;
}

inline std::vector<std::string> make_shuffling(const std::vector<std::string>& question, Rng& rng) {
  return make_shuffling(std::span<const std::string>(question), rng);
}

/// Drops the category prefix (token-wise, case-insensitive). Throws DataError
/// on a prefix mismatch and RemovalEmpty when only "?" would remain.
std::vector<std::string> make_removal(std::span<const std::string> question, std::string_view category);

/// Which constructed forms a sample receives. Exempt (unbiased) samples get
/// {Original}; otherwise S -> {Shuffling}, R -> {Removal},
/// B -> {Shuffling, Removal}, SR -> Removal for yesno, Shuffling otherwise.
std::vector<QuestionForm> positive_forms(Strategy strategy, QType qtype, bool exempt);

/// Keyed stream for the question shuffle of one sample. With per-epoch
/// resampling the epoch is part of the key; otherwise pass epoch 0 always.
Rng shuffle_stream(std::uint64_t seed, std::uint64_t epoch, std::int64_t sample_id);

struct PositiveAssignment {
  std::int64_t sample_id = 0;
  std::vector<std::vector<std::string>> positives;
  std::vector<QuestionForm> forms;  // parallel to positives; Original marks exemption or fallback

  bool operator==(const PositiveAssignment&) const = default;
};

struct AssignmentCounts {
  std::size_t exempt = 0;            // samples that received their original question
  std::size_t constructed = 0;       // positives built by Shuffling or Removal
  std::size_t removal_fallbacks = 0; // RemovalEmpty events replaced by the original question
};

std::vector<PositiveAssignment> assign_positives(const Dataset& d, Strategy strategy,
                                                 const std::set<std::int64_t>& unbiased, std::uint64_t seed,
                                                 std::uint64_t epoch, AssignmentCounts* counts = nullptr);

}  // namespace mmbs
