#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "formatbias/datasets.hpp"
#include "formatbias/errors.hpp"
#include "formatbias/extractor.hpp"
#include "formatbias/format_registry.hpp"
#include "formatbias/llm_client.hpp"
#include "formatbias/runner.hpp"

namespace fb = formatbias;
using ordered_json = nlohmann::ordered_json;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(fb::trim(item));
  return out;
}

int cmd_run(const std::string& config_path, const std::string& output_dir) {
  fb::ExperimentConfig cfg = fb::load_experiment_config(config_path);
  if (!output_dir.empty()) cfg.output_dir = output_dir;
  fb::RunResult result = fb::run_experiment(cfg);
  fb::write_outputs(result, cfg);
  std::cout << "wrote report.json, report.csv, report.md, records.jsonl to "
            << cfg.output_dir << "\n";
  return 0;
}

int cmd_report(const std::string& records_path, const std::string& mode) {
  std::ifstream in(records_path);
  if (!in) throw fb::IoError("cannot open " + records_path);
  std::map<std::tuple<std::string, std::string, fb::Method>,
           std::vector<fb::EvalRecord>>
      cells;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw fb::SchemaError(line_no, e.what());
    }
    fb::EvalRecord er;
    er.sample_id = j.at("sample_id").get<std::string>();
    er.follows = j.at("follows").get<bool>();
    if (j.contains("score") && !j["score"].is_null())
      er.score = j["score"].get<double>();
    auto method = fb::method_from_string(j.at("method").get<std::string>());
    if (!method) throw fb::SchemaError(line_no, "unknown method");
    cells[{j.at("dataset").get<std::string>(),
           j.at("format").get<std::string>(), *method}]
        .push_back(std::move(er));
  }
  fb::RunResult result;
  std::map<std::tuple<std::string, fb::Method, fb::Category>,
           std::vector<fb::FormatCell>>
      families;
  for (const auto& [key, evals] : cells) {
    fb::CellResult c;
    c.dataset = std::get<0>(key);
    c.method = std::get<2>(key);
    c.cell = fb::aggregate(evals);
    c.cell.format_id = std::get<1>(key);
    c.verdict = fb::reliability(evals, static_cast<int>(evals.size()));
    c.cell.reliable = c.verdict.reliable;
    result.cells.push_back(c);
    families[{c.dataset, c.method, fb::get_format(c.cell.format_id).category}]
        .push_back(c.cell);
  }
  for (const auto& [key, fam_cells] : families) {
    if (fam_cells.size() < 2) continue;
    std::string family = std::get<0>(key) + "/" +
                         fb::to_string(std::get<1>(key)) + "/" +
                         fb::to_string(std::get<2>(key));
    result.reports.push_back(fb::make_bias_report(family, fam_cells));
  }
  if (mode == "json")
    std::cout << fb::render_report_json(result);
  else if (mode == "csv")
    std::cout << fb::render_report_csv(result);
  else
    std::cout << fb::render_report_markdown(result);
  return 0;
}

int cmd_fixtures_check(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fb::IoError("cannot open " + path);
  std::string line;
  size_t line_no = 0, checked = 0, mismatched = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    const fb::FormatSpec& fmt =
        fb::get_format(j.at("format").get<std::string>());
    std::vector<fb::Choice> choices;
    if (j.contains("choices"))
      for (const auto& c : j["choices"])
        choices.push_back({c.at("id").get<std::string>(),
                           c.at("value").get<std::string>()});
    std::vector<std::string> keys = fmt.map_schema;
    fb::ScoreOptions opts;
    opts.cot = j.value("cot", false);
    auto verdict = fb::score_format(
        j.at("output").get<std::string>(), fmt,
        choices.empty() ? nullptr : &choices,
        keys.empty() ? nullptr : &keys, opts);
    ++checked;
    bool expected = j.at("follows").get<bool>();
    if (verdict.follows != expected) {
      ++mismatched;
      std::cout << "line " << line_no << " (" << fmt.id << "): expected "
                << (expected ? "follow" : "non-follow") << ", got "
                << (verdict.follows ? "follow" : "non-follow") << "\n";
    }
  }
  std::cout << checked << " fixtures, " << mismatched << " mismatched\n";
  return mismatched == 0 ? 0 : 1;
}

int cmd_synth_finetune(const std::string& train_path,
                       const std::string& formats_csv,
                       const std::string& scores_csv,
                       const std::string& ratios_csv, int scale,
                       const std::string& out_path) {
  std::vector<fb::FormatSpec> formats;
  for (const auto& id : split_csv(formats_csv))
    formats.push_back(fb::get_format(id));
  std::vector<double> scores;
  for (const auto& s : split_csv(scores_csv)) scores.push_back(std::stod(s));
  std::optional<std::vector<int>> ratios;
  if (!ratios_csv.empty()) {
    ratios.emplace();
    for (const auto& r : split_csv(ratios_csv)) ratios->push_back(std::stoi(r));
  }
  auto counts = fb::synthesize_finetune_counts(scores, scale, ratios);
  auto train = fb::load_samples(train_path, std::nullopt, std::nullopt, 0);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw fb::IoError("cannot write " + out_path);
  size_t n = fb::emit_finetune_records(train, formats, counts, out);
  std::cout << "emitted " << n << " records (";
  for (size_t i = 0; i < counts.size(); ++i)
    std::cout << (i ? ", " : "") << formats[i].id << "=" << counts[i];
  std::cout << ") to " << out_path << "\n";
  return 0;
}

int cmd_simulate(const std::string& data_path, const std::string& format_id,
                 double p, double q, const std::string& style, uint64_t seed,
                 size_t limit) {
  const fb::FormatSpec& fmt = fb::get_format(format_id);
  fb::BiasProfile profile;
  profile.follow_prob["*"] = p;
  profile.correct_prob["*"] = q;
  profile.seed = seed;
  if (style == "prose")
    profile.style = fb::NonFollowStyle::Prose;
  else if (style == "wrong_tokens")
    profile.style = fb::NonFollowStyle::WrongTokens;
  else if (style == "refusal")
    profile.style = fb::NonFollowStyle::Refusal;
  else
    throw fb::ConfigError("unknown style '" + style + "'");
  auto samples = fb::load_samples(data_path, std::nullopt, limit, seed);
  for (const auto& s : samples) {
    std::string text = fb::simulate("", fmt, s, profile);
    ordered_json j;
    j["sample_id"] = s.id;
    j["response"] = text;
    std::cout << j.dump() << "\n";
  }
  return 0;
}

int cmd_formats_export(const std::string& category) {
  if (category.empty()) {
    std::cout << fb::registry_json() << "\n";
    return 0;
  }
  auto parsed = fb::category_from_string(category);
  if (!parsed) throw fb::ConfigError("unknown category '" + category + "'");
  ordered_json out = ordered_json::array();
  for (const auto& f : fb::list_formats(*parsed)) out.push_back(f.id);
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantify and mitigate output-format bias in language models"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  auto* run = app.add_subcommand("run", "Run an experiment from a config");
  run->add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  run->add_option("--output-dir", output_dir, "Override the output directory");

  std::string records_path, mode = "markdown";
  auto* report =
      app.add_subcommand("report", "Re-render reports from records.jsonl");
  report->add_option("--records", records_path, "records.jsonl path")
      ->required();
  report->add_option("--mode", mode, "json | csv | markdown");

  std::string fixtures_path;
  auto* fixtures =
      app.add_subcommand("fixtures", "Fixture corpus utilities");
  auto* fixtures_check =
      fixtures->add_subcommand("check", "Check a labelled fixture corpus");
  fixtures_check->add_option("--path", fixtures_path, "fixture JSONL")
      ->required();

  std::string train_path, formats_csv, scores_csv, ratios_csv, out_path;
  int scale = 500;
  auto* synth = app.add_subcommand("synth", "Data synthesis utilities");
  auto* finetune =
      synth->add_subcommand("finetune", "Emit fine-tuning chat records");
  finetune->add_option("--train", train_path, "Training sample JSONL")
      ->required();
  finetune->add_option("--formats", formats_csv, "Comma-separated format ids")
      ->required();
  finetune->add_option("--scores", scores_csv,
                       "Comma-separated per-format scores")
      ->required();
  finetune->add_option("--ratios", ratios_csv,
                       "Optional comma-separated ratio override");
  finetune->add_option("--scale", scale, "Records per ratio unit");
  finetune->add_option("--out", out_path, "Output JSONL")->required();

  std::string sim_data, sim_format, sim_style = "prose";
  double sim_p = 1.0, sim_q = 1.0;
  uint64_t sim_seed = 0;
  size_t sim_limit = 10;
  auto* simulate =
      app.add_subcommand("simulate", "Print simulated model responses");
  simulate->add_option("--data", sim_data, "Sample JSONL")->required();
  simulate->add_option("--format", sim_format, "Format id")->required();
  simulate->add_option("--p", sim_p, "Format-following probability");
  simulate->add_option("--q", sim_q, "Correctness probability when following");
  simulate->add_option("--style", sim_style,
                       "prose | wrong_tokens | refusal");
  simulate->add_option("--seed", sim_seed, "Simulator seed");
  simulate->add_option("--limit", sim_limit, "Number of samples");

  std::string export_category;
  auto* formats = app.add_subcommand("formats", "Format registry utilities");
  auto* formats_export =
      formats->add_subcommand("export", "Print the format registry as JSON");
  formats_export->add_option("--category", export_category,
                            "Restrict to one category");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, output_dir);
    if (*report) return cmd_report(records_path, mode);
    if (*fixtures_check) return cmd_fixtures_check(fixtures_path);
    if (*finetune)
      return cmd_synth_finetune(train_path, formats_csv, scores_csv,
                                ratios_csv, scale, out_path);
    if (*simulate)
      return cmd_simulate(sim_data, sim_format, sim_p, sim_q, sim_style,
                          sim_seed, sim_limit);
    if (*formats_export) return cmd_formats_export(export_category);
    std::cerr << "missing subcommand\n";
    return 2;
  } catch (const fb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
