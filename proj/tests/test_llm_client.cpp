#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "formatbias/errors.hpp"
#include "formatbias/extractor.hpp"
#include "formatbias/format_registry.hpp"
#include "formatbias/llm_client.hpp"
#include "formatbias/prompt.hpp"

namespace fb = formatbias;

namespace {

std::string temp_path(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("formatbias-test-" + std::to_string(::getpid()) + "-" + name);
  std::filesystem::remove(p);
  return p.string();
}

struct TestServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> requests{0};
  std::atomic<int> fail_first{0};
  std::string seen_auth;
  std::string reply = "pong";

  TestServer() {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                               httplib::Response& res) {
      ++requests;
      seen_auth = req.get_header_value("Authorization");
      if (fail_first > 0) {
        --fail_first;
        res.status = 503;
        return;
      }
      auto body = nlohmann::json::parse(req.body);
      nlohmann::json out{
          {"choices",
           {{{"message", {{"role", "assistant"}, {"content", reply}}}}}},
          {"model", body.value("model", "")}};
      res.set_content(out.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread.join();
  }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port);
  }
};

}  // namespace

TEST_CASE("request fingerprints are stable and parameter-sensitive") {
  fb::ModelConfig cfg;
  cfg.model = "test-model";
  std::string a = fb::request_fingerprint("hello", cfg);
  CHECK(a == fb::request_fingerprint("hello", cfg));
  CHECK(a.size() == 16);
  CHECK(a != fb::request_fingerprint("hello!", cfg));
  fb::ModelConfig other = cfg;
  other.temperature = 0.7;
  CHECK(a != fb::request_fingerprint("hello", other));
}

TEST_CASE("cache persists across instances and ignores duplicates") {
  std::string path = temp_path("cache.jsonl");
  fb::ModelConfig cfg;
  cfg.model = "m";
  {
    fb::ResponseCache cache(path);
    CHECK(cache.size() == 0);
    cache.insert("fp1", "prompt", cfg, "resp-1");
    cache.insert("fp1", "prompt", cfg, "resp-other");
    CHECK(cache.size() == 1);
  }
  fb::ResponseCache reloaded(path);
  CHECK(reloaded.size() == 1);
  CHECK(reloaded.lookup("fp1") == "resp-1");
  CHECK(!reloaded.lookup("fp2"));
  std::filesystem::remove(path);
}

TEST_CASE("live client speaks the chat-completions protocol") {
  TestServer server;
  server.reply = "the answer";
  ::setenv("FORMATBIAS_TEST_KEY", "sk-test-123", 1);

  fb::ModelConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.model = "test-model";
  cfg.credential_env = "FORMATBIAS_TEST_KEY";

  std::string cache_path = temp_path("live-cache.jsonl");
  fb::ResponseCache cache(cache_path);
  fb::LlmClient client(cfg, &cache);

  auto r1 = client.complete("what is it?");
  CHECK(r1.text == "the answer");
  CHECK(r1.source == fb::ResponseSource::Live);
  CHECK(server.seen_auth == "Bearer sk-test-123");
  CHECK(server.requests == 1);

  // second identical request is served from the cache
  auto r2 = client.complete("what is it?");
  CHECK(r2.text == "the answer");
  CHECK(r2.source == fb::ResponseSource::Cache);
  CHECK(server.requests == 1);
  std::filesystem::remove(cache_path);
}

TEST_CASE("missing credential environment variable raises before any call") {
  TestServer server;
  fb::ModelConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.model = "m";
  cfg.credential_env = "FORMATBIAS_SURELY_UNSET_VAR";
  ::unsetenv("FORMATBIAS_SURELY_UNSET_VAR");
  fb::LlmClient client(cfg);
  CHECK_THROWS_AS(client.complete("x"), fb::AuthMissingError);
  CHECK(server.requests == 0);
}

TEST_CASE("transient server errors are retried") {
  TestServer server;
  server.fail_first = 2;
  server.reply = "recovered";
  ::setenv("FORMATBIAS_TEST_KEY", "k", 1);
  fb::ModelConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.model = "m";
  cfg.credential_env = "FORMATBIAS_TEST_KEY";
  cfg.max_retries = 3;
  fb::LlmClient client(cfg);
  auto r = client.complete("x");
  CHECK(r.text == "recovered");
  CHECK(server.requests == 3);
}

TEST_CASE("persistent failures surface as transport errors") {
  TestServer server;
  server.fail_first = 100;
  ::setenv("FORMATBIAS_TEST_KEY", "k", 1);
  fb::ModelConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.model = "m";
  cfg.credential_env = "FORMATBIAS_TEST_KEY";
  cfg.max_retries = 1;
  fb::LlmClient client(cfg);
  CHECK_THROWS_AS(client.complete("x"), fb::TransportError);
  CHECK(server.requests == 2);
}

TEST_CASE("simulator outcomes depend only on seed, sample, and format") {
  fb::Sample s;
  s.id = "qa-1";
  s.task_kind = fb::TaskKind::Qa;
  s.question = "capital of France?";
  s.gold = std::string("Paris");

  fb::BiasProfile profile;
  profile.follow_prob["*"] = 0.5;
  profile.correct_prob["*"] = 0.7;
  profile.seed = 11;

  const auto& fmt = fb::get_format("wrap.special");
  std::string a = fb::simulate("p", fmt, s, profile);
  std::string b = fb::simulate("different prompt", fmt, s, profile);
  CHECK(a == b);  // prompt text is not part of the outcome

  fb::BiasProfile other = profile;
  other.seed = 12;
  bool any_diff = false;
  for (int i = 0; i < 50; ++i) {
    fb::Sample si = s;
    si.id = "qa-" + std::to_string(i);
    any_diff = any_diff ||
               fb::simulate("p", fmt, si, profile) !=
                   fb::simulate("p", fmt, si, other);
  }
  CHECK(any_diff);
}

TEST_CASE("simulated follows satisfy the format and non-follows do not") {
  fb::Sample s;
  s.id = "qa-7";
  s.task_kind = fb::TaskKind::Qa;
  s.question = "q";
  s.gold = std::string("Paris");

  for (auto style : {fb::NonFollowStyle::Prose, fb::NonFollowStyle::WrongTokens,
                     fb::NonFollowStyle::Refusal}) {
    for (const auto& fmt : fb::list_formats(fb::Category::Wrapping)) {
      for (double p : {0.0, 1.0}) {
        fb::BiasProfile profile;
        profile.follow_prob["*"] = p;
        profile.correct_prob["*"] = 1.0;
        profile.style = style;
        profile.seed = 3;
        std::string text = fb::simulate("x", fmt, s, profile);
        auto v = fb::score_format(text, fmt);
        CHECK(v.follows == (p == 1.0));
      }
    }
  }
}

TEST_CASE("simulator wrong answers follow the format but score zero") {
  fb::Sample s;
  s.id = "mcq-3";
  s.task_kind = fb::TaskKind::Mcq;
  s.question = "q";
  s.choices = {{"A", "yes"}, {"B", "no"}};
  s.gold = std::string("A");

  fb::BiasProfile profile;
  profile.follow_prob["*"] = 1.0;
  profile.correct_prob["*"] = 0.0;
  profile.seed = 5;
  const auto& fmt = fb::get_format("mcq.char");
  std::string text = fb::simulate("x", fmt, s, profile);
  auto v = fb::score_format(text, fmt, &s.choices);
  REQUIRE(v.follows);
  CHECK(std::get<std::string>(*v.extracted) == "B");
}
