#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "formatbias/types.hpp"

namespace formatbias {

struct ModelConfig {
  std::string endpoint = "http://localhost:8000";
  std::string model;
  std::string system_message = "You are helpful assistant!";
  /// Name of the environment variable holding the API key. The key itself
  /// is never stored in config files.
  std::string credential_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 1024;
  int timeout_seconds = 120;
  int max_retries = 3;
  int max_in_flight = 4;
};

enum class ResponseSource { Live, Cache, Simulator };

struct ModelResponse {
  std::string fingerprint;
  std::string text;
  double latency_ms = 0.0;
  ResponseSource source = ResponseSource::Live;
};

/// Stable fingerprint over the full request (prompt, model, sampling
/// parameters) used as the replay-cache key.
std::string request_fingerprint(const std::string& prompt,
                                const ModelConfig& cfg);

/// Append-only JSONL replay cache keyed by request fingerprint. Safe for
/// concurrent lookups/inserts within one process.
class ResponseCache {
 public:
  explicit ResponseCache(std::string path);

  std::optional<std::string> lookup(const std::string& fingerprint) const;
  void insert(const std::string& fingerprint, const std::string& prompt,
              const ModelConfig& cfg, const std::string& response_text);
  size_t size() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::map<std::string, std::string> index_;
  mutable std::mutex mu_;
};

/// Minimal chat-completions client with cache-first lookup, bearer auth via
/// environment-variable indirection, bounded retries with exponential
/// backoff, and a bound on concurrent in-flight requests.
class LlmClient {
 public:
  explicit LlmClient(ModelConfig cfg, ResponseCache* cache = nullptr);
  ~LlmClient();

  LlmClient(const LlmClient&) = delete;
  LlmClient& operator=(const LlmClient&) = delete;

  ModelResponse complete(const std::string& prompt);
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  ResponseCache* cache_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

enum class NonFollowStyle { Prose, WrongTokens, Refusal };

/// Per-format behaviour of the simulated model: probability of following
/// the format and, conditioned on following, probability of a correct
/// answer.
struct BiasProfile {
  std::map<std::string, double> follow_prob;   // format id -> p
  std::map<std::string, double> correct_prob;  // format id -> q
  NonFollowStyle style = NonFollowStyle::Prose;
  uint64_t seed = 0;

  double p(const std::string& format_id) const;
  double q(const std::string& format_id) const;
};

/// Deterministic biased-model simulator: the outcome depends only on
/// (profile.seed, sample.id, format.id), not on call order.
std::string simulate(const std::string& prompt, const FormatSpec& format,
                     const Sample& sample, const BiasProfile& profile,
                     bool cot = false);

}  // namespace formatbias
