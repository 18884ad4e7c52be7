#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "formatbias/prompt.hpp"
#include "formatbias/types.hpp"

namespace formatbias {

/// Loads samples from the unified JSONL schema with a deterministic seeded
/// subsample of size min(cap, available). Throws SchemaError with line
/// number on malformed input.
std::vector<Sample> load_samples(const std::string& path,
                                 std::optional<TaskKind> task_kind,
                                 std::optional<size_t> cap, uint64_t seed);

/// Parses one JSONL line into a Sample (exposed for adapters/tests).
Sample parse_sample_json(const std::string& line, size_t line_no);
std::string sample_to_json(const Sample& s);

struct ScirexEntity {
  std::string text;
  int sentence = 0;
};

struct ScirexDocument {
  std::string id;
  std::vector<std::string> sentences;
  std::map<std::string, std::vector<ScirexEntity>> entities;  // category ->
};

enum class ScirexLevel { Easy, Medium, Hard };

/// Builds one extraction sample from a contiguous sentence window that
/// contains at least one gold entity of every required category.
/// easy: 1 sentence, {Task}; medium: 3, {Task, Method}; hard: 5,
/// {Task, Method, Material, Metric}. Throws NoEligibleWindowError.
Sample synthesize_scirex(const ScirexDocument& doc, ScirexLevel level,
                         uint64_t seed);

ScirexDocument parse_scirex_document(const std::string& line, size_t line_no);

/// Seeded uniform sample without replacement; answers rendered in the
/// format and verified via the format scorer. Throws InsufficientTrainError.
std::vector<Demonstration> sample_demonstrations(
    const std::vector<Sample>& train, size_t k, const FormatSpec& format,
    uint64_t seed);

/// Per-format training-record counts. With ratios_override, counts are
/// ratio_i * scale. Default rule: ratio_i = score_i / max_score is
/// approximated by the nearest unit fraction 1/m (m in 1..10) and inverted,
/// count_i = m_i * scale. Throws ZeroScoreWithoutOverrideError.
std::vector<int> synthesize_finetune_counts(
    const std::vector<double>& sys_e_scores, int scale,
    const std::optional<std::vector<int>>& ratios_override = std::nullopt);

/// Emits chat-format training records; the user turn is the built prompt
/// and the assistant turn is the gold answer rendered in the format (every
/// assistant turn passes the format scorer). Returns the record count.
size_t emit_finetune_records(const std::vector<Sample>& train,
                             const std::vector<FormatSpec>& formats,
                             const std::vector<int>& counts, std::ostream& out,
                             const std::string& system_message =
                                 "You are helpful assistant!");

/// Deterministic Fisher-Yates index permutation (stable across platforms).
std::vector<size_t> seeded_permutation(size_t n, uint64_t seed);

}  // namespace formatbias
