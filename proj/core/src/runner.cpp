#include "formatbias/runner.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "formatbias/datasets.hpp"
#include "formatbias/errors.hpp"
#include "formatbias/format_registry.hpp"
#include "formatbias/prompt.hpp"

namespace formatbias {

namespace {

using ordered_json = nlohmann::ordered_json;

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ModelConfig parse_model(const nlohmann::json& j) {
  ModelConfig m;
  read_if(j, "endpoint", m.endpoint);
  read_if(j, "model", m.model);
  read_if(j, "system_message", m.system_message);
  read_if(j, "credential_env", m.credential_env);
  read_if(j, "temperature", m.temperature);
  read_if(j, "top_p", m.top_p);
  read_if(j, "max_tokens", m.max_tokens);
  read_if(j, "timeout_seconds", m.timeout_seconds);
  read_if(j, "max_retries", m.max_retries);
  read_if(j, "max_in_flight", m.max_in_flight);
  if (j.contains("api_key"))
    throw ConfigError(
        "credentials must not appear in config files; set 'credential_env' "
        "to the name of an environment variable instead");
  return m;
}

BiasProfile parse_profile(const nlohmann::json& j) {
  BiasProfile p;
  if (j.contains("follow_prob"))
    for (auto it = j["follow_prob"].begin(); it != j["follow_prob"].end(); ++it)
      p.follow_prob[it.key()] = it.value().get<double>();
  if (j.contains("correct_prob"))
    for (auto it = j["correct_prob"].begin(); it != j["correct_prob"].end();
         ++it)
      p.correct_prob[it.key()] = it.value().get<double>();
  if (j.contains("style")) {
    std::string s = j["style"].get<std::string>();
    if (s == "prose")
      p.style = NonFollowStyle::Prose;
    else if (s == "wrong_tokens")
      p.style = NonFollowStyle::WrongTokens;
    else if (s == "refusal")
      p.style = NonFollowStyle::Refusal;
    else
      throw ConfigError("unknown non-follow style '" + s + "'");
  }
  if (j.contains("seed")) p.seed = j["seed"].get<uint64_t>();
  return p;
}

std::vector<std::string> parse_formats(const nlohmann::json& j) {
  if (!j.is_array() || j.empty())
    throw ConfigError("'formats' must be a non-empty array");
  std::vector<std::string> wanted;
  for (const auto& e : j) {
    if (e.is_string()) {
      wanted.push_back(get_format(e.get<std::string>()).id);
    } else if (e.is_object() && e.contains("category")) {
      std::string cat = e["category"].get<std::string>();
      auto parsed = category_from_string(cat);
      if (!parsed) throw ConfigError("unknown category '" + cat + "'");
      for (const auto& f : list_formats(*parsed)) wanted.push_back(f.id);
    } else {
      throw ConfigError("each format entry is an id or {\"category\": ...}");
    }
  }
  // de-duplicate, keep registry order
  std::vector<std::string> resolved;
  for (const auto& f : all_formats())
    if (std::find(wanted.begin(), wanted.end(), f.id) != wanted.end())
      resolved.push_back(f.id);
  return resolved;
}

std::string method_label(Method m) {
  std::string s = to_string(m);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    std::string source = j.value("source", std::string("simulator"));
    if (source == "simulator")
      cfg.backend = ResponseBackend::Simulator;
    else if (source == "live")
      cfg.backend = ResponseBackend::Live;
    else if (source == "cache")
      cfg.backend = ResponseBackend::CacheOnly;
    else
      throw ConfigError("unknown source '" + source + "'");

    if (j.contains("model")) cfg.model = parse_model(j["model"]);
    if (j.contains("profile")) cfg.profile = parse_profile(j["profile"]);

    if (!j.contains("datasets") || !j["datasets"].is_array() ||
        j["datasets"].empty())
      throw ConfigError("'datasets' must be a non-empty array");
    for (const auto& d : j["datasets"]) {
      DatasetConfig ds;
      if (!d.contains("path") || !d["path"].is_string())
        throw ConfigError("each dataset needs a string 'path'");
      ds.path = d["path"].get<std::string>();
      ds.name = d.value("name",
                        std::filesystem::path(ds.path).stem().string());
      if (d.contains("task_kind")) {
        auto kind = task_kind_from_string(d["task_kind"].get<std::string>());
        if (!kind)
          throw ConfigError("unknown task_kind '" +
                            d["task_kind"].get<std::string>() + "'");
        ds.task_kind = kind;
      }
      ds.cap = d.value("cap", 200u);
      ds.seed = d.value("seed", 0u);
      cfg.datasets.push_back(std::move(ds));
    }

    if (!j.contains("formats"))
      throw ConfigError("'formats' must be a non-empty array");
    cfg.format_ids = parse_formats(j["formats"]);
    if (cfg.format_ids.empty())
      throw ConfigError("'formats' resolved to an empty set");

    if (j.contains("methods")) {
      for (const auto& m : j["methods"]) {
        auto parsed = method_from_string(m.get<std::string>());
        if (!parsed)
          throw ConfigError("unknown method '" + m.get<std::string>() + "'");
        cfg.methods.push_back(*parsed);
      }
    }
    if (cfg.methods.empty()) cfg.methods = {Method::ZS};

    if (j.contains("mitigation")) {
      const auto& m = j["mitigation"];
      cfg.mitigation.demonstrations = m.value("demonstrations", 0);
      cfg.mitigation.repeat_instruction = m.value("repeat_instruction", 1);
      cfg.mitigation.demo_train_path = m.value("demo_train_path",
                                               std::string());
      cfg.mitigation.demo_seed = m.value("demo_seed", 0u);
      if (cfg.mitigation.demonstrations > 0 &&
          cfg.mitigation.demo_train_path.empty())
        throw ConfigError("demonstrations require 'demo_train_path'");
    }

    if (j.contains("estimator")) {
      cfg.alpha = j["estimator"].value("alpha", 0.05);
      cfg.epsilon = j["estimator"].value("epsilon", 0.05);
      if (cfg.alpha <= 0.0 || cfg.alpha >= 0.5)
        throw ConfigError("alpha must be in (0, 0.5)");
      if (cfg.epsilon <= 0.0) throw ConfigError("epsilon must be positive");
    }

    if (j.contains("strictness")) {
      std::string s = j["strictness"].get<std::string>();
      if (s == "strict")
        cfg.strictness = Strictness::Strict;
      else if (s == "lenient")
        cfg.strictness = Strictness::Lenient;
      else
        throw ConfigError("strictness must be 'strict' or 'lenient'");
    }

    cfg.cache_path = j.value("cache_path", std::string());
    cfg.output_dir = j.value("output_dir", std::string("."));
    cfg.workers = j.value("workers", 1);
    if (cfg.backend == ResponseBackend::CacheOnly && cfg.cache_path.empty())
      throw ConfigError("source 'cache' requires 'cache_path'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

double score_answer(const Extracted& extracted, const Sample& sample,
                    const FormatSpec& format) {
  if (const auto* gold_map = std::get_if<CategoryMap>(&sample.gold)) {
    const auto* pred = std::get_if<CategoryMap>(&extracted);
    return pred ? set_f1(*pred, *gold_map) : 0.0;
  }
  if (const auto* gold_bits = std::get_if<std::vector<int>>(&sample.gold)) {
    const auto* pred = std::get_if<std::vector<std::string>>(&extracted);
    if (!pred) return 0.0;
    std::vector<int> bits;
    for (const auto& item : *pred) {
      std::string t = trim(item);
      if (t == "0")
        bits.push_back(0);
      else if (t == "1")
        bits.push_back(1);
      else
        return 0.0;
    }
    try {
      return average_precision(bits, *gold_bits);
    } catch (const Error&) {
      return 0.0;
    }
  }
  if (const auto* gold_list =
          std::get_if<std::vector<std::string>>(&sample.gold)) {
    const auto* pred = std::get_if<std::vector<std::string>>(&extracted);
    return pred ? list_f1(*pred, *gold_list) : 0.0;
  }

  const std::string& gold = std::get<std::string>(sample.gold);
  const auto* pred = std::get_if<std::string>(&extracted);
  if (!pred) return 0.0;
  if (sample.task_kind == TaskKind::Mcq) {
    if (format.answer_type == AnswerType::McqValue) {
      std::string gold_value = gold;
      for (const auto& c : sample.choices)
        if (c.id == gold) gold_value = c.value;
      return accuracy(*pred, gold_value, McqMode::Value);
    }
    return accuracy(*pred, gold, McqMode::Char);
  }
  return token_f1(*pred, gold);
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  std::unique_ptr<ResponseCache> cache;
  if (!cfg.cache_path.empty())
    cache = std::make_unique<ResponseCache>(cfg.cache_path);
  std::unique_ptr<LlmClient> client;
  if (cfg.backend == ResponseBackend::Live)
    client = std::make_unique<LlmClient>(cfg.model, cache.get());

  RunResult result;

  // (method, format) -> per-dataset EstTrueE of reliable cells, for the
  // cross-dataset macro report.
  std::map<std::pair<std::string, std::string>, std::vector<FormatCell>>
      macro_cells;

  for (const auto& ds : cfg.datasets) {
    std::vector<Sample> samples =
        load_samples(ds.path, ds.task_kind, ds.cap, ds.seed);
    if (samples.empty()) throw EmptyInputError("dataset " + ds.name);

    for (Method method : cfg.methods) {
      const bool cot = method == Method::ZS_CoT;
      // category -> cells for the per-dataset variance report
      std::map<Category, std::vector<FormatCell>> family_cells;

      for (const auto& fmt_id : cfg.format_ids) {
        const FormatSpec& fmt = get_format(fmt_id);

        std::vector<Demonstration> demos;
        if (cfg.mitigation.demonstrations > 0) {
          auto train = load_samples(cfg.mitigation.demo_train_path,
                                    ds.task_kind, std::nullopt, 0);
          demos = sample_demonstrations(
              train, static_cast<size_t>(cfg.mitigation.demonstrations), fmt,
              cfg.mitigation.demo_seed);
        }

        std::vector<EvalRecord> evals;
        for (const auto& sample : samples) {
          PromptRequest req;
          req.sample = sample;
          req.format = fmt;
          req.method = method;
          req.demos = demos;
          req.repeat_instruction = cfg.mitigation.repeat_instruction;
          std::string prompt;
          try {
            prompt = build_prompt(req);
          } catch (const IncompatibleFormatError&) {
            continue;
          }

          std::string text;
          std::string fingerprint;
          switch (cfg.backend) {
            case ResponseBackend::Simulator:
              text = simulate(prompt, fmt, sample, cfg.profile, cot);
              fingerprint = request_fingerprint(prompt, cfg.model);
              break;
            case ResponseBackend::Live: {
              ModelResponse r = client->complete(prompt);
              text = r.text;
              fingerprint = r.fingerprint;
              break;
            }
            case ResponseBackend::CacheOnly: {
              fingerprint = request_fingerprint(prompt, cfg.model);
              auto hit = cache->lookup(fingerprint);
              if (!hit)
                throw IoError("response for " + sample.id + " under " +
                              fmt.id + " is not in the cache");
              text = *hit;
              break;
            }
          }

          ScoreOptions opts;
          opts.strictness = cfg.strictness;
          opts.cot = cot;
          const std::vector<Choice>* choices =
              sample.choices.empty() ? nullptr : &sample.choices;
          std::vector<std::string> keys = mapping_schema_keys(sample, fmt);
          FIVerdict verdict = score_format(
              text, fmt, choices, keys.empty() ? nullptr : &keys, opts);

          RunRecord rec;
          rec.dataset = ds.name;
          rec.format_id = fmt.id;
          rec.method = method;
          rec.sample_id = sample.id;
          rec.follows = verdict.follows;
          rec.failure_reason = verdict.failure_reason;
          rec.response_fingerprint = fingerprint;
          rec.response_text = text;
          if (verdict.follows)
            rec.score = score_answer(*verdict.extracted, sample, fmt);
          result.records.push_back(rec);

          EvalRecord er;
          er.sample_id = sample.id;
          er.follows = rec.follows;
          er.score = rec.score;
          er.response_ref = fingerprint;
          evals.push_back(std::move(er));
        }
        if (evals.empty()) continue;

        CellResult cell;
        cell.dataset = ds.name;
        cell.method = method;
        cell.cell = aggregate(evals);
        cell.cell.format_id = fmt.id;
        cell.verdict = reliability(evals, static_cast<int>(evals.size()),
                                   cfg.alpha, cfg.epsilon);
        cell.cell.reliable = cell.verdict.reliable;
        cell.cell.sample_std = cell.verdict.s;
        cell.cell.t_crit = cell.verdict.v;
        result.cells.push_back(cell);
        family_cells[fmt.category].push_back(cell.cell);
        macro_cells[{method_label(method), fmt.id}].push_back(cell.cell);
      }

      for (const auto& [cat, cells] : family_cells) {
        if (cells.size() < 2) continue;
        std::string family =
            ds.name + "/" + method_label(method) + "/" + to_string(cat);
        result.reports.push_back(make_bias_report(family, cells));
      }
    }
  }

  // Cross-dataset macro report: average each format's EstTrueE over the
  // datasets where it ran, then take the variance across formats.
  for (Method method : cfg.methods) {
    std::map<Category, std::vector<FormatCell>> by_family;
    for (const auto& fmt_id : cfg.format_ids) {
      auto it = macro_cells.find({method_label(method), fmt_id});
      if (it == macro_cells.end()) continue;
      const auto& cells = it->second;
      FormatCell avg;
      avg.format_id = fmt_id;
      for (const auto& c : cells) {
        avg.n += c.n;
        avg.satisfying += c.satisfying;
        avg.fi += c.fi / cells.size();
        avg.sys_e += c.sys_e / cells.size();
        avg.est_true_e += c.est_true_e / cells.size();
      }
      avg.reliable = std::all_of(cells.begin(), cells.end(),
                                 [](const FormatCell& c) { return c.reliable; });
      by_family[get_format(fmt_id).category].push_back(avg);
    }
    for (const auto& [cat, cells] : by_family) {
      if (cells.size() < 2) continue;
      std::string family =
          "macro/" + method_label(method) + "/" + to_string(cat);
      result.reports.push_back(make_bias_report(family, cells));
    }
  }

  std::sort(result.records.begin(), result.records.end(),
            [](const RunRecord& a, const RunRecord& b) {
              return std::tie(a.dataset, a.format_id, a.method, a.sample_id) <
                     std::tie(b.dataset, b.format_id, b.method, b.sample_id);
            });
  return result;
}

namespace {

ordered_json cell_json(const FormatCell& c) {
  ordered_json j;
  j["format"] = c.format_id;
  j["n"] = c.n;
  j["satisfying"] = c.satisfying;
  j["fi"] = c.fi;
  j["sys_e"] = c.sys_e;
  j["est_true_e"] = c.est_true_e;
  j["reliable"] = c.reliable;
  return j;
}

}  // namespace

std::string render_report_json(const RunResult& result) {
  ordered_json root;
  root["cells"] = ordered_json::array();
  for (const auto& c : result.cells) {
    ordered_json j = cell_json(c.cell);
    j["dataset"] = c.dataset;
    j["method"] = method_label(c.method);
    j["sample_std"] = c.cell.sample_std;
    j["t_critical"] = c.cell.t_crit;
    j["reliability_threshold"] = c.verdict.threshold;
    root["cells"].push_back(j);
  }
  root["bias"] = ordered_json::array();
  for (const auto& r : result.reports) {
    ordered_json j;
    j["family"] = r.family;
    j["mean_est_true_e"] = r.mean_est_true_e;
    j["bias_fo"] = r.bias;
    j["unreliable_formats"] = r.unreliable_formats;
    j["cells"] = ordered_json::array();
    for (const auto& c : r.cells) j["cells"].push_back(cell_json(c));
    root["bias"].push_back(j);
  }
  return root.dump(2) + "\n";
}

std::string render_report_csv(const RunResult& result) {
  std::ostringstream os;
  os << "dataset,method,format,n,satisfying,fi,sys_e,est_true_e,reliable\n";
  for (const auto& c : result.cells) {
    os << c.dataset << "," << method_label(c.method) << "," << c.cell.format_id
       << "," << c.cell.n << "," << c.cell.satisfying << "," << c.cell.fi
       << "," << c.cell.sys_e << "," << c.cell.est_true_e << ","
       << (c.cell.reliable ? "true" : "false") << "\n";
  }
  return os.str();
}

std::string render_report_markdown(const RunResult& result) {
  std::ostringstream os;
  os << "# Format bias report\n\n";
  os << "## Per-format results\n\n";
  os << "| Dataset | Method | Format | FI | Systematic | Estimated true | "
        "Reliable |\n";
  os << "|---|---|---|---:|---:|---:|---|\n";
  os.setf(std::ios::fixed);
  os.precision(2);
  for (const auto& c : result.cells) {
    os << "| " << c.dataset << " | " << method_label(c.method) << " | "
       << c.cell.format_id << " | " << c.cell.fi << " | " << c.cell.sys_e
       << " | " << c.cell.est_true_e << " | "
       << (c.cell.reliable ? "yes" : "no") << " |\n";
  }
  os << "\n## Bias across formats\n\n";
  os << "| Family | Mean estimated true | Bias (%^2) | Unreliable |\n";
  os << "|---|---:|---:|---|\n";
  for (const auto& r : result.reports) {
    os << "| " << r.family << " | " << r.mean_est_true_e << " | " << r.bias
       << " | ";
    for (size_t i = 0; i < r.unreliable_formats.size(); ++i)
      os << (i ? ", " : "") << r.unreliable_formats[i];
    if (r.unreliable_formats.empty()) os << "-";
    os << " |\n";
  }
  return os.str();
}

void write_outputs(const RunResult& result, const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  auto emit = [&](const std::string& name, const std::string& content) {
    std::ofstream out(std::filesystem::path(cfg.output_dir) / name,
                      std::ios::binary);
    if (!out) throw IoError("cannot write " + name + " in " + cfg.output_dir);
    out << content;
  };
  emit("report.json", render_report_json(result));
  emit("report.csv", render_report_csv(result));
  emit("report.md", render_report_markdown(result));

  std::ostringstream records;
  for (const auto& r : result.records) {
    ordered_json j;
    j["dataset"] = r.dataset;
    j["format"] = r.format_id;
    j["method"] = method_label(r.method);
    j["sample_id"] = r.sample_id;
    j["follows"] = r.follows;
    if (r.score)
      j["score"] = *r.score;
    else
      j["score"] = nullptr;
    if (r.failure_reason) j["failure_reason"] = to_string(*r.failure_reason);
    j["fingerprint"] = r.response_fingerprint;
    j["response"] = r.response_text;
    records << j.dump() << "\n";
  }
  emit("records.jsonl", records.str());
}

}  // namespace formatbias
