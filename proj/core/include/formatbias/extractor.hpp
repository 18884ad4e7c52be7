#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "formatbias/types.hpp"

namespace formatbias {

enum class FailureReason {
  MissingToken,
  TokenCountMismatch,
  NotInChoiceSet,
  ParseFailure,
  EmptyAnswer,
};

std::string to_string(FailureReason r);
std::optional<FailureReason> failure_reason_from_string(const std::string& s);

using Extracted =
    std::variant<std::string, std::vector<std::string>, CategoryMap>;

/// Output of the rule-based format scorer for one raw response.
struct FIVerdict {
  bool follows = false;
  std::optional<Extracted> extracted;  // present iff follows
  std::optional<FailureReason> failure_reason;
};

enum class Strictness { Strict, Lenient };

struct ScoreOptions {
  Strictness strictness = Strictness::Strict;
  /// ZS-CoT runs instruct the model to wrap the final answer by
  /// <ANSWER>...</ANSWER> for the non-wrapping categories; the envelope is
  /// required and stripped before the inner format check.
  bool cot = false;
};

/// The binary format scorer. Total and deterministic; never throws.
/// choices: supplied iff the sample is MCQ (membership sets).
/// expected_keys: supplied iff the format is Mapping.
FIVerdict score_format(std::string_view output, const FormatSpec& format,
                       const std::vector<Choice>* choices = nullptr,
                       const std::vector<std::string>* expected_keys = nullptr,
                       ScoreOptions opts = {});

/// Trimmed text strictly between the single start-token occurrence and the
/// single end-token occurrence. Absent when the token-count rule fails
/// (occurrences of start plus occurrences of end != 2, counted
/// left-to-right non-overlapping).
std::optional<std::string> extract_wrapped(std::string_view output,
                                           std::string_view start,
                                           std::string_view end);

/// Captures the remainder of the line after the last case-insensitive
/// occurrence of "So the answer is:", trimmed of trailing period.
std::optional<std::string> parse_placeholder(std::string_view output);

std::optional<std::vector<std::string>> parse_list(
    std::string_view text, ListStyle style,
    Strictness strictness = Strictness::Strict);

std::optional<CategoryMap> parse_mapping(
    std::string_view text, MapStyle style,
    const std::vector<std::string>& expected_keys,
    Strictness strictness = Strictness::Strict);

// Shared normalization helpers.
std::string trim(std::string_view s);
std::string lowercase(std::string_view s);
/// Lowercase + trim outer whitespace and punctuation (MCQ value mode and
/// entity comparison).
std::string normalize_value(std::string_view s);
/// Strips one surrounding ``` fenced code block (optional language tag).
std::string strip_code_fence(std::string_view s);

}  // namespace formatbias
