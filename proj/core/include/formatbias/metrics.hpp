#pragma once

#include <string_view>
#include <vector>

#include "formatbias/types.hpp"

namespace formatbias {

enum class MetricKind { Accuracy, TokenF1, SetF1, MAP };
enum class McqMode { Char, Value };

std::string to_string(MetricKind k);

/// Task -> base metric assignment.
MetricKind metric_for_task(TaskKind t);

/// 1 iff normalized equality (char mode: exact identifier; value mode:
/// lowercase/trim match).
double accuracy(std::string_view pred, std::string_view gold, McqMode mode);

/// SQuAD-style token-overlap F1 (lowercase, strip punctuation,
/// whitespace tokens, multiset overlap). Both empty -> 1, one empty -> 0.
double token_f1(std::string_view pred, std::string_view gold);

/// Micro-averaged set F1 over normalized entity strings across categories;
/// missing keys are treated as empty lists.
double set_f1(const CategoryMap& pred, const CategoryMap& gold);

/// Unordered-list F1: set_f1 with a single category.
double list_f1(const std::vector<std::string>& pred,
               const std::vector<std::string>& gold);

/// AP of a predicted binary relevance list against gold relevance.
/// Documents are ranked predicted-1 before predicted-0, ties broken by
/// original index. Throws LengthMismatchError / NoRelevantError.
double average_precision(const std::vector<int>& pred,
                         const std::vector<int>& gold);

}  // namespace formatbias
