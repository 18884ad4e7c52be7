#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "formatbias/format_registry.hpp"
#include "formatbias/errors.hpp"
#include "formatbias/runner.hpp"

namespace fb = formatbias;

namespace {

const std::string kFixtures = std::string(TEST_DATA_DIR) + "/fixtures";

std::string base_config() {
  return R"({
    "source": "simulator",
    "profile": {"follow_prob": {"*": 0.8}, "correct_prob": {"*": 0.6},
                "style": "prose", "seed": 7},
    "datasets": [{"path": ")" +
         kFixtures + R"(/samples_qa.jsonl", "name": "qa"}],
    "formats": [{"category": "Wrapping"}],
    "methods": ["zs"]
  })";
}

}  // namespace

TEST_CASE("config parsing resolves categories in registry order") {
  auto cfg = fb::parse_experiment_config(base_config());
  CHECK(cfg.backend == fb::ResponseBackend::Simulator);
  REQUIRE(cfg.format_ids.size() == 7);
  CHECK(cfg.format_ids.front() == "wrap.special");
  CHECK(cfg.format_ids.back() == "wrap.quote");
  CHECK(cfg.datasets.size() == 1);
  CHECK(cfg.datasets[0].cap == 200);
  CHECK(cfg.methods == std::vector<fb::Method>{fb::Method::ZS});
}

TEST_CASE("config rejects bad input with specific messages") {
  CHECK_THROWS_AS(fb::parse_experiment_config("not json"), fb::ConfigError);
  CHECK_THROWS_AS(fb::parse_experiment_config(
                      R"({"datasets": [], "formats": ["wrap.bold"]})"),
                  fb::ConfigError);
  CHECK_THROWS_AS(
      fb::parse_experiment_config(
          R"({"datasets": [{"path": "x"}], "formats": ["wrap.nope"]})"),
      fb::UnknownFormatError);
  CHECK_THROWS_AS(
      fb::parse_experiment_config(
          R"({"source": "cache", "datasets": [{"path": "x"}],
              "formats": ["wrap.bold"]})"),
      fb::ConfigError);
  // inline credentials are never accepted
  CHECK_THROWS_AS(
      fb::parse_experiment_config(
          R"({"model": {"api_key": "sk-oops"},
              "datasets": [{"path": "x"}], "formats": ["wrap.bold"]})"),
      fb::ConfigError);
}

TEST_CASE("score_answer dispatches on gold type") {
  fb::Sample mcq;
  mcq.task_kind = fb::TaskKind::Mcq;
  mcq.choices = {{"A", "yes"}, {"B", "no"}};
  mcq.gold = std::string("A");
  const auto& char_fmt = fb::get_format("mcq.char");
  const auto& value_fmt = fb::get_format("mcq.value");
  CHECK(fb::score_answer(fb::Extracted{std::string("A")}, mcq, char_fmt) ==
        1.0);
  CHECK(fb::score_answer(fb::Extracted{std::string("B")}, mcq, char_fmt) ==
        0.0);
  CHECK(fb::score_answer(fb::Extracted{std::string("yes")}, mcq, value_fmt) ==
        1.0);

  fb::Sample qa;
  qa.task_kind = fb::TaskKind::Qa;
  qa.gold = std::string("Pacific Ocean");
  CHECK(fb::score_answer(fb::Extracted{std::string("the Pacific Ocean")}, qa,
                         fb::get_format("wrap.bold")) > 0.5);

  fb::Sample rank;
  rank.task_kind = fb::TaskKind::Ranking;
  rank.gold = std::vector<int>{1, 0};
  CHECK(fb::score_answer(
            fb::Extracted{std::vector<std::string>{"1", "0"}}, rank,
            fb::get_format("list.sep")) == 1.0);
  // non-binary items score zero rather than raising
  CHECK(fb::score_answer(
            fb::Extracted{std::vector<std::string>{"yes", "no"}}, rank,
            fb::get_format("list.sep")) == 0.0);

  fb::Sample ext;
  ext.task_kind = fb::TaskKind::Extraction;
  ext.gold = fb::CategoryMap{{"Task", {"parsing"}}};
  CHECK(fb::score_answer(
            fb::Extracted{fb::CategoryMap{{"Task", {"parsing"}}}}, ext,
            fb::get_format("map.json")) == 1.0);
}

TEST_CASE("simulator experiment end to end") {
  auto cfg = fb::parse_experiment_config(base_config());
  auto result = fb::run_experiment(cfg);

  // 12 samples x 7 wrapping formats
  CHECK(result.records.size() == 84);
  CHECK(result.cells.size() == 7);
  for (const auto& c : result.cells) {
    CHECK(c.cell.n == 12);
    CHECK(c.cell.fi >= 0.0);
    CHECK(c.cell.fi <= 100.0);
  }
  // one per-dataset wrapping report plus the macro report
  REQUIRE(result.reports.size() == 2);
  CHECK(result.reports[0].family == "qa/zs/Wrapping");
  CHECK(result.reports[1].family == "macro/zs/Wrapping");
  CHECK(result.reports[0].cells.size() == 7);

  // records come out sorted
  for (size_t i = 1; i < result.records.size(); ++i) {
    const auto& a = result.records[i - 1];
    const auto& b = result.records[i];
    CHECK(std::tie(a.dataset, a.format_id, a.sample_id) <=
          std::tie(b.dataset, b.format_id, b.sample_id));
  }
  // every follows record carries a score, every non-follow does not
  for (const auto& r : result.records)
    CHECK(r.score.has_value() == r.follows);
}

TEST_CASE("reports render in all three modes") {
  auto cfg = fb::parse_experiment_config(base_config());
  auto result = fb::run_experiment(cfg);

  std::string json_text = fb::render_report_json(result);
  auto parsed = nlohmann::json::parse(json_text);
  CHECK(parsed.at("cells").size() == 7);
  CHECK(parsed.at("bias").size() == 2);
  CHECK(parsed["bias"][0].contains("bias_fo"));

  std::string csv = fb::render_report_csv(result);
  CHECK(csv.find("dataset,method,format") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);

  std::string md = fb::render_report_markdown(result);
  CHECK(md.find("| qa | zs | wrap.special |") != std::string::npos);
  CHECK(md.find("Bias across formats") != std::string::npos);
}

TEST_CASE("write_outputs emits the four artifacts") {
  auto cfg = fb::parse_experiment_config(base_config());
  auto dir = std::filesystem::temp_directory_path() / "formatbias-run-test";
  std::filesystem::remove_all(dir);
  cfg.output_dir = dir.string();
  auto result = fb::run_experiment(cfg);
  fb::write_outputs(result, cfg);
  for (const char* name :
       {"report.json", "report.csv", "report.md", "records.jsonl"}) {
    CHECK(std::filesystem::exists(dir / name));
    CHECK(std::filesystem::file_size(dir / name) > 0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("mitigation settings change the prompts, not the bookkeeping") {
  auto cfg = fb::parse_experiment_config(base_config());
  cfg.mitigation.repeat_instruction = 3;
  auto result = fb::run_experiment(cfg);
  CHECK(result.records.size() == 84);

  cfg = fb::parse_experiment_config(base_config());
  cfg.mitigation.demonstrations = 2;
  cfg.mitigation.demo_train_path = kFixtures + "/train_qa.jsonl";
  cfg.mitigation.demo_seed = 1;
  auto with_demos = fb::run_experiment(cfg);
  CHECK(with_demos.records.size() == 84);
}
