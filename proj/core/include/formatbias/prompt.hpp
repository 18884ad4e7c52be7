#pragma once

#include <string>
#include <vector>

#include "formatbias/types.hpp"

namespace formatbias {

/// A question plus an answer already rendered in the target format. Use
/// make_demonstration to get the construction-time format check.
struct Demonstration {
  std::string question;
  std::string answer;
};

/// Validates that the rendered answer passes the format check for `format`.
/// Throws IncompatibleFormatError otherwise.
Demonstration make_demonstration(std::string question, std::string answer,
                                 const FormatSpec& format,
                                 const std::vector<Choice>* choices = nullptr,
                                 const std::vector<std::string>* expected_keys =
                                     nullptr);

struct PromptRequest {
  Sample sample;
  FormatSpec format;
  Method method = Method::ZS;
  std::vector<Demonstration> demos;
  int repeat_instruction = 1;
};

/// Composes the full prompt for (sample, format, method, mitigation).
/// Throws IncompatibleFormatError for invalid combinations (e.g. a Mapping
/// format on an MCQ sample).
std::string build_prompt(const PromptRequest& req);

/// Inserts rendered question/answer pairs between the instruction block and
/// the live question. Empty list is identity.
std::string attach_demonstrations(const std::string& prompt,
                                  const std::vector<Demonstration>& demos);

/// Makes the format-instruction sentence appear exactly k times,
/// consecutively at its original position. k = 1 is identity.
std::string repeat_format_instruction(const std::string& prompt, int k);

/// Keys the mapping prompt asks for: the format's schema restricted to the
/// categories present in the sample's gold map (full schema when the gold
/// is not a map). Empty for non-mapping formats.
std::vector<std::string> mapping_schema_keys(const Sample& sample,
                                             const FormatSpec& format);

/// Renders a gold answer in the target format (the demonstration renderer).
/// With cot set, non-wrapping categories get the <ANSWER> envelope.
std::string render_answer(const Gold& gold, const std::vector<Choice>& choices,
                          const FormatSpec& format, bool cot = false);

std::string render_answer(const Sample& sample, const FormatSpec& format,
                          bool cot = false);

}  // namespace formatbias
