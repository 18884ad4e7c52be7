#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "formatbias/extractor.hpp"
#include "formatbias/format_registry.hpp"

namespace fb = formatbias;

namespace {

const std::vector<fb::Choice> kChoices{
    {"A", "yes"}, {"B", "no"}, {"C", "maybe"}, {"D", "unknown"}};

fb::FIVerdict score(const std::string& out, const std::string& fmt_id,
                    bool with_choices = false, bool cot = false) {
  const fb::FormatSpec& fmt = fb::get_format(fmt_id);
  fb::ScoreOptions opts;
  opts.cot = cot;
  return fb::score_format(out, fmt, with_choices ? &kChoices : nullptr,
                          fmt.map_schema.empty() ? nullptr : &fmt.map_schema,
                          opts);
}

}  // namespace

TEST_CASE("wrapping token-count rule") {
  CHECK(fb::extract_wrapped("x <T>a</T> y", "<T>", "</T>") == "a");
  // one of the tokens missing
  CHECK(!fb::extract_wrapped("<T>a", "<T>", "</T>"));
  // three occurrences in total
  CHECK(!fb::extract_wrapped("<T>a</T></T>", "<T>", "</T>"));
  // identical start/end tokens need exactly two occurrences
  CHECK(fb::extract_wrapped("**bold**", "**", "**") == "bold");
  CHECK(!fb::extract_wrapped("**a** **b**", "**", "**"));
  // end token before start token
  CHECK(!fb::extract_wrapped("</T>a<T>", "<T>", "</T>"));
}

TEST_CASE("italic counts asterisks non-overlapping") {
  CHECK(score("*x*", "wrap.italic").follows);
  auto v = score("**x**", "wrap.italic");
  CHECK(!v.follows);
  CHECK(v.failure_reason == fb::FailureReason::TokenCountMismatch);
}

TEST_CASE("placeholder capture") {
  CHECK(fb::parse_placeholder("So the answer is: 42.") == "42");
  CHECK(fb::parse_placeholder("so the answer is: nine") == "nine");
  // last occurrence wins, capture stops at end of line
  CHECK(fb::parse_placeholder(
            "So the answer is: draft\nSo the answer is: final\ntrailer") ==
        "final");
  CHECK(!fb::parse_placeholder("the answer is 42"));
  CHECK(!fb::parse_placeholder("So the answer is:   "));
}

TEST_CASE("mcq membership uses the sample's identifier set") {
  CHECK(score("A", "mcq.char", true).follows);
  CHECK(score("B.", "mcq.char", true).follows);
  CHECK(!score("E", "mcq.char", true).follows);
  CHECK(!score("A. yes", "mcq.char", true).follows);
  CHECK(score("Yes.", "mcq.value", true).follows);
  CHECK(!score("A", "mcq.value", true).follows);
  // value membership extracts the canonical choice value
  auto v = score("MAYBE", "mcq.value", true);
  REQUIRE(v.follows);
  CHECK(std::get<std::string>(*v.extracted) == "maybe");
}

TEST_CASE("mcq falls back to literal A-D without a choice set") {
  CHECK(score("C", "mcq.char").follows);
  CHECK(!score("F", "mcq.char").follows);
}

TEST_CASE("cot envelope is required for non-wrapping categories") {
  CHECK(score("<ANSWER>A</ANSWER>", "mcq.char", true, true).follows);
  CHECK(!score("A", "mcq.char", true, true).follows);
  // wrapping formats check their own tokens directly
  CHECK(score("thinking... **42**", "wrap.bold", false, true).follows);
}

TEST_CASE("list parsing per style") {
  auto b = fb::parse_list("[\"a\", 'b', c]", fb::ListStyle::Bracketed);
  REQUIRE(b);
  CHECK(*b == std::vector<std::string>{"a", "b", "c"});
  CHECK(!fb::parse_list("[]", fb::ListStyle::Bracketed));
  CHECK(!fb::parse_list("a, b", fb::ListStyle::Bracketed));

  auto bullets = fb::parse_list("- a\n* b\n\xe2\x80\xa2 c",
                                fb::ListStyle::Bullet);
  REQUIRE(bullets);
  CHECK(bullets->size() == 3);
  CHECK(!fb::parse_list("intro\n- a", fb::ListStyle::Bullet));

  auto sep = fb::parse_list("1 <SEP> 0 <SEP> 1", fb::ListStyle::Sep);
  REQUIRE(sep);
  CHECK(*sep == std::vector<std::string>{"1", "0", "1"});

  auto nl = fb::parse_list("a\n\nb", fb::ListStyle::Newline);
  REQUIRE(nl);
  CHECK(*nl == std::vector<std::string>{"a", "b"});
}

TEST_CASE("lenient list parsing recovers embedded structures") {
  auto b = fb::parse_list("Sure! [\"a\", \"b\"] hope that helps",
                          fb::ListStyle::Bracketed, fb::Strictness::Lenient);
  REQUIRE(b);
  CHECK(b->size() == 2);
  auto bullets = fb::parse_list("The keyphrases are:\n- a\n- b\nthe end",
                                fb::ListStyle::Bullet,
                                fb::Strictness::Lenient);
  REQUIRE(bullets);
  CHECK(*bullets == std::vector<std::string>{"a", "b"});
}

TEST_CASE("json mapping: schema keys, promotion, extras") {
  std::vector<std::string> keys{"Task", "Method"};
  auto m = fb::parse_mapping(
      R"({"Task": ["a"], "Method": "scalar"})", fb::MapStyle::Json, keys);
  REQUIRE(m);
  CHECK(m->at("Method") == std::vector<std::string>{"scalar"});
  CHECK(!fb::parse_mapping(R"({"Task": ["a"]})", fb::MapStyle::Json, keys));
  CHECK(!fb::parse_mapping(R"({"Task": ["a"], "Method": [], "X": []})",
                           fb::MapStyle::Json, keys));
  CHECK(fb::parse_mapping(R"({"Task": ["a"], "Method": [], "X": []})",
                          fb::MapStyle::Json, keys,
                          fb::Strictness::Lenient));
}

TEST_CASE("yaml mapping subset") {
  std::vector<std::string> keys{"Task", "Method"};
  auto block = fb::parse_mapping("Task:\n- a\n- b\nMethod:\n- c",
                                 fb::MapStyle::Yaml, keys);
  REQUIRE(block);
  CHECK(block->at("Task") == std::vector<std::string>{"a", "b"});
  auto flow = fb::parse_mapping("Task: [a, b]\nMethod: [c]",
                                fb::MapStyle::Yaml, keys);
  REQUIRE(flow);
  CHECK(flow->at("Method") == std::vector<std::string>{"c"});
  auto scalar = fb::parse_mapping("Task: a\nMethod: c", fb::MapStyle::Yaml,
                                  keys);
  REQUIRE(scalar);
  CHECK(scalar->at("Task") == std::vector<std::string>{"a"});
  // a top-level sequence is not a mapping
  CHECK(!fb::parse_mapping("- TASK_1: a\n- TASK_2: b", fb::MapStyle::Yaml,
                           keys));
  CHECK(!fb::parse_mapping("Task: a\nTask: b\nMethod: c", fb::MapStyle::Yaml,
                           keys));
}

TEST_CASE("failure reasons are specific") {
  CHECK(score("no markers here", "wrap.special").failure_reason ==
        fb::FailureReason::MissingToken);
  CHECK(score("<ANSWER>a</ANSWER><ANSWER>b</ANSWER>", "wrap.special")
            .failure_reason == fb::FailureReason::TokenCountMismatch);
  CHECK(score("<ANSWER>  </ANSWER>", "wrap.special").failure_reason ==
        fb::FailureReason::EmptyAnswer);
  CHECK(score("E", "mcq.char", true).failure_reason ==
        fb::FailureReason::NotInChoiceSet);
  CHECK(score("not json", "map.json").failure_reason ==
        fb::FailureReason::ParseFailure);
}

TEST_CASE("labelled fixture corpus fully agrees with the scorer") {
  std::ifstream in(std::string(TEST_DATA_DIR) + "/fixtures/fi_corpus.jsonl");
  REQUIRE(in.good());
  std::string line;
  size_t checked = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    const fb::FormatSpec& fmt = fb::get_format(j.at("format").get<std::string>());
    std::vector<fb::Choice> choices;
    if (j.contains("choices"))
      for (const auto& c : j["choices"])
        choices.push_back({c.at("id").get<std::string>(), c.at("value").get<std::string>()});
    fb::ScoreOptions opts;
    opts.cot = j.value("cot", false);
    auto v = fb::score_format(j.at("output").get<std::string>(), fmt,
                              choices.empty() ? nullptr : &choices,
                              fmt.map_schema.empty() ? nullptr
                                                     : &fmt.map_schema,
                              opts);
    INFO("fixture ", checked + 1, " (", fmt.id, "): ",
         j.at("output").get<std::string>());
    CHECK(v.follows == j.at("follows").get<bool>());
    ++checked;
  }
  CHECK(checked >= 60);
}

TEST_CASE("normalization helpers") {
  CHECK(fb::trim("  a b \n") == "a b");
  CHECK(fb::lowercase("AbC") == "abc");
  CHECK(fb::normalize_value("  \"Paris.\" ") == "paris");
  CHECK(fb::strip_code_fence("```json\n{\"a\":1}\n```") == "{\"a\":1}");
  CHECK(fb::strip_code_fence("plain") == "plain");
}
