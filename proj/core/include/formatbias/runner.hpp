#pragma once

#include <optional>
#include <string>
#include <vector>

#include "formatbias/estimator.hpp"
#include "formatbias/extractor.hpp"
#include "formatbias/llm_client.hpp"
#include "formatbias/metrics.hpp"
#include "formatbias/types.hpp"

namespace formatbias {

enum class ResponseBackend { Simulator, Live, CacheOnly };

struct DatasetConfig {
  std::string name;
  std::string path;
  std::optional<TaskKind> task_kind;
  size_t cap = 200;
  uint64_t seed = 0;
};

struct MitigationConfig {
  int demonstrations = 0;          // 0 = off
  int repeat_instruction = 1;      // 1 = off
  std::string demo_train_path;
  uint64_t demo_seed = 0;
};

struct ExperimentConfig {
  ResponseBackend backend = ResponseBackend::Simulator;
  ModelConfig model;
  BiasProfile profile;
  std::vector<DatasetConfig> datasets;
  std::vector<std::string> format_ids;  // resolved, in registry order
  std::vector<Method> methods;
  MitigationConfig mitigation;
  double alpha = 0.05;
  double epsilon = 0.05;
  Strictness strictness = Strictness::Strict;
  std::string cache_path;
  std::string output_dir = ".";
  int workers = 1;
};

/// Parses and validates the JSON experiment config. Throws ConfigError.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text);

struct RunRecord {
  std::string dataset;
  std::string format_id;
  Method method = Method::ZS;
  std::string sample_id;
  bool follows = false;
  std::optional<double> score;
  std::optional<FailureReason> failure_reason;
  std::string response_fingerprint;
  std::string response_text;
};

struct CellResult {
  std::string dataset;
  Method method = Method::ZS;
  FormatCell cell;
  ReliabilityVerdict verdict;
};

struct RunResult {
  std::vector<RunRecord> records;   // sorted (dataset, format, method, sample)
  std::vector<CellResult> cells;
  /// Per (dataset, method, category) variance reports, plus
  /// cross-dataset macro averages labelled "macro/...".
  std::vector<BiasReport> reports;
};

/// Scores one extracted answer against the sample's gold on the task's
/// metric. Returns a value in [0, 1].
double score_answer(const Extracted& extracted, const Sample& sample,
                    const FormatSpec& format);

RunResult run_experiment(const ExperimentConfig& cfg);

/// Writes report.json, report.csv, report.md, and records.jsonl into
/// cfg.output_dir. Output is deterministic: no timestamps, stable ordering.
void write_outputs(const RunResult& result, const ExperimentConfig& cfg);

std::string render_report_json(const RunResult& result);
std::string render_report_csv(const RunResult& result);
std::string render_report_markdown(const RunResult& result);

}  // namespace formatbias
