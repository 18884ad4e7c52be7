#include "formatbias/llm_client.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "formatbias/errors.hpp"
#include "formatbias/extractor.hpp"
#include "formatbias/prompt.hpp"

namespace formatbias {

namespace {

using ordered_json = nlohmann::ordered_json;

uint64_t fnv1a64(const std::string& data, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  for (int shift = 60; shift >= 0; shift -= 4)
    os << "0123456789abcdef"[(v >> shift) & 0xf];
  return os.str();
}

}  // namespace

std::string request_fingerprint(const std::string& prompt,
                                const ModelConfig& cfg) {
  std::ostringstream key;
  key << cfg.model << '\x1f' << cfg.system_message << '\x1f'
      << cfg.temperature << '\x1f' << cfg.top_p << '\x1f' << cfg.max_tokens
      << '\x1f' << prompt;
  return to_hex(fnv1a64(key.str()));
}

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(line_no, std::string("bad cache record: ") + e.what());
    }
    if (!j.contains("fingerprint") || !j.contains("response"))
      throw SchemaError(line_no, "cache record missing fields");
    index_[j["fingerprint"].get<std::string>()] =
        j["response"].get<std::string>();
  }
}

std::optional<std::string> ResponseCache::lookup(
    const std::string& fingerprint) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(fingerprint);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::insert(const std::string& fingerprint,
                           const std::string& prompt, const ModelConfig& cfg,
                           const std::string& response_text) {
  std::lock_guard<std::mutex> lock(mu_);
  if (index_.count(fingerprint)) return;
  index_[fingerprint] = response_text;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to cache " + path_);
  ordered_json rec;
  rec["fingerprint"] = fingerprint;
  rec["request"] = {{"model", cfg.model},
                    {"temperature", cfg.temperature},
                    {"top_p", cfg.top_p},
                    {"max_tokens", cfg.max_tokens},
                    {"prompt", prompt}};
  rec["response"] = response_text;
  rec["timestamp"] = static_cast<int64_t>(std::time(nullptr));
  out << rec.dump() << "\n";
}

size_t ResponseCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return index_.size();
}

struct LlmClient::Impl {
  explicit Impl(int in_flight) : sem(in_flight > 0 ? in_flight : 1) {}
  std::counting_semaphore<> sem;
};

LlmClient::LlmClient(ModelConfig cfg, ResponseCache* cache)
    : cfg_(std::move(cfg)),
      cache_(cache),
      impl_(std::make_unique<Impl>(cfg_.max_in_flight)) {}

LlmClient::~LlmClient() = default;

ModelResponse LlmClient::complete(const std::string& prompt) {
  std::string fp = request_fingerprint(prompt, cfg_);
  if (cache_) {
    if (auto hit = cache_->lookup(fp)) {
      return {fp, *hit, 0.0, ResponseSource::Cache};
    }
  }

  std::string token;
  if (!cfg_.credential_env.empty()) {
    const char* env = std::getenv(cfg_.credential_env.c_str());
    if (!env || !*env)
      throw AuthMissingError("environment variable " + cfg_.credential_env +
                             " is not set");
    token = env;
  }

  ordered_json body;
  body["model"] = cfg_.model;
  body["messages"] = ordered_json::array();
  body["messages"].push_back(
      {{"role", "system"}, {"content", cfg_.system_message}});
  body["messages"].push_back({{"role", "user"}, {"content", prompt}});
  body["temperature"] = cfg_.temperature;
  body["top_p"] = cfg_.top_p;
  body["max_tokens"] = cfg_.max_tokens;
  std::string payload = body.dump();

  impl_->sem.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{impl_->sem};

  httplib::Client http(cfg_.endpoint);
  http.set_connection_timeout(cfg_.timeout_seconds);
  http.set_read_timeout(cfg_.timeout_seconds);
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);

  int last_status = 0;
  std::string last_error = "connection failed";
  auto start = std::chrono::steady_clock::now();
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(
          std::chrono::milliseconds(100LL << (attempt - 1)));
    auto res = http.Post("/v1/chat/completions", headers, payload,
                         "application/json");
    if (!res) {
      last_status = 0;
      last_error = httplib::to_string(res.error());
      continue;
    }
    last_status = res->status;
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw TransportError("HTTP " + std::to_string(res->status) + ": " +
                           res->body);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res->body);
      std::string text =
          j.at("choices").at(0).at("message").at("content").get<std::string>();
      auto end = std::chrono::steady_clock::now();
      double ms =
          std::chrono::duration<double, std::milli>(end - start).count();
      if (cache_) cache_->insert(fp, prompt, cfg_, text);
      return {fp, text, ms, ResponseSource::Live};
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed completion payload: ") +
                           e.what());
    }
  }
  if (last_status == 429)
    throw RateLimitedError("rate limited after " +
                           std::to_string(cfg_.max_retries + 1) + " attempts");
  throw TransportError("request failed after " +
                       std::to_string(cfg_.max_retries + 1) + " attempts: " +
                       last_error);
}

double BiasProfile::p(const std::string& format_id) const {
  auto it = follow_prob.find(format_id);
  if (it != follow_prob.end()) return it->second;
  it = follow_prob.find("*");
  return it != follow_prob.end() ? it->second : 1.0;
}

double BiasProfile::q(const std::string& format_id) const {
  auto it = correct_prob.find(format_id);
  if (it != correct_prob.end()) return it->second;
  it = correct_prob.find("*");
  return it != correct_prob.end() ? it->second : 1.0;
}

namespace {

// A wrong answer that still satisfies the format and scores zero on the
// task metric (where the metric allows an exact zero).
Sample mutate_gold(const Sample& sample, const FormatSpec& fmt) {
  Sample wrong = sample;
  std::visit(
      [&](auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, std::string>) {
          if (!wrong.choices.empty()) {
            for (const auto& c : wrong.choices)
              if (c.id != g) {
                g = c.id;
                return;
              }
          } else {
            g = "wrongzz";
          }
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
          g = {"wrongzz"};
        } else if constexpr (std::is_same_v<T, std::vector<int>>) {
          for (auto& bit : g) bit = bit ? 0 : 1;
        } else if constexpr (std::is_same_v<T, CategoryMap>) {
          for (auto& [key, items] : g) items = {"wrongzz"};
        }
      },
      wrong.gold);
  (void)fmt;
  return wrong;
}

bool accidentally_follows(const std::string& text, const FormatSpec& fmt,
                          const Sample& sample, bool cot) {
  ScoreOptions opts;
  opts.cot = cot;
  const std::vector<Choice>* choices =
      sample.choices.empty() ? nullptr : &sample.choices;
  std::vector<std::string> keys = mapping_schema_keys(sample, fmt);
  try {
    return score_format(text, fmt, choices,
                        keys.empty() ? nullptr : &keys, opts)
        .follows;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

std::string simulate(const std::string& prompt, const FormatSpec& format,
                     const Sample& sample, const BiasProfile& profile,
                     bool cot) {
  (void)prompt;
  uint64_t h = fnv1a64(sample.id);
  h = fnv1a64(format.id, h);
  h ^= profile.seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  std::mt19937_64 rng(h);
  auto draw = [&]() { return (rng() >> 11) * (1.0 / 9007199254740992.0); };

  bool follows = draw() < profile.p(format.id);
  if (follows) {
    bool correct = draw() < profile.q(format.id);
    const Sample& src = correct ? sample : mutate_gold(sample, format);
    std::string answer = render_answer(src, format, cot);
    if (cot) return "Let's think step by step. " + answer;
    return answer;
  }

  std::string text;
  switch (profile.style) {
    case NonFollowStyle::Prose:
      text =
          "I considered the question carefully, and my conclusion is that "
          "the best response cannot be expressed in the requested layout; "
          "instead I will describe it in plain prose.";
      break;
    case NonFollowStyle::WrongTokens: {
      Sample plain = sample;
      FormatSpec freeform = format;
      freeform.category = Category::Wrapping;
      freeform.answer_type = AnswerType::FreeText;
      freeform.wrapping_tokens = std::make_pair("<WRONG>", "</WRONG>");
      text = render_answer(plain, freeform, /*cot=*/false);
      break;
    }
    case NonFollowStyle::Refusal:
      text = "I'm sorry, but I can't help with that request.";
      break;
  }
  if (accidentally_follows(text, format, sample, cot)) return "";
  return text;
}

}  // namespace formatbias
