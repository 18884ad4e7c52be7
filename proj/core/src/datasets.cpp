#include "formatbias/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "formatbias/errors.hpp"
#include "formatbias/extractor.hpp"

namespace formatbias {

namespace {

using ordered_json = nlohmann::ordered_json;

Gold parse_gold(const nlohmann::json& g, size_t line_no) {
  if (g.is_string()) return g.get<std::string>();
  if (g.is_object()) {
    CategoryMap m;
    for (auto it = g.begin(); it != g.end(); ++it) {
      if (!it.value().is_array())
        throw SchemaError(line_no, "gold object values must be arrays");
      std::vector<std::string> items;
      for (const auto& v : it.value()) {
        if (!v.is_string())
          throw SchemaError(line_no, "gold object entries must be strings");
        items.push_back(v.get<std::string>());
      }
      m[it.key()] = std::move(items);
    }
    return m;
  }
  if (g.is_array()) {
    if (g.empty()) return std::vector<std::string>{};
    if (g.front().is_number_integer()) {
      std::vector<int> bits;
      for (const auto& v : g) {
        if (!v.is_number_integer())
          throw SchemaError(line_no, "mixed-type gold array");
        bits.push_back(v.get<int>());
      }
      return bits;
    }
    std::vector<std::string> items;
    for (const auto& v : g) {
      if (!v.is_string()) throw SchemaError(line_no, "mixed-type gold array");
      items.push_back(v.get<std::string>());
    }
    return items;
  }
  throw SchemaError(line_no, "gold must be string, array, or object");
}

}  // namespace

std::vector<size_t> seeded_permutation(size_t n, uint64_t seed) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

Sample parse_sample_json(const std::string& line, size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(line_no, e.what());
  }
  if (!j.is_object()) throw SchemaError(line_no, "record is not an object");
  Sample s;
  if (!j.contains("id") || !j["id"].is_string())
    throw SchemaError(line_no, "missing string field 'id'");
  s.id = j["id"].get<std::string>();
  if (!j.contains("task_kind") || !j["task_kind"].is_string())
    throw SchemaError(line_no, "missing string field 'task_kind'");
  auto kind = task_kind_from_string(j["task_kind"].get<std::string>());
  if (!kind)
    throw SchemaError(line_no,
                      "unknown task_kind '" +
                          j["task_kind"].get<std::string>() + "'");
  s.task_kind = *kind;
  if (!j.contains("question") || !j["question"].is_string())
    throw SchemaError(line_no, "missing string field 'question'");
  s.question = j["question"].get<std::string>();
  if (j.contains("context")) {
    if (!j["context"].is_string())
      throw SchemaError(line_no, "'context' must be a string");
    s.context = j["context"].get<std::string>();
  }
  if (j.contains("choices")) {
    if (!j["choices"].is_array())
      throw SchemaError(line_no, "'choices' must be an array");
    for (const auto& c : j["choices"]) {
      if (!c.is_object() || !c.contains("id") || !c.contains("value") ||
          !c["id"].is_string() || !c["value"].is_string())
        throw SchemaError(line_no, "each choice needs string 'id' and 'value'");
      s.choices.push_back({c["id"].get<std::string>(),
                           c["value"].get<std::string>()});
    }
  }
  if (!j.contains("gold")) throw SchemaError(line_no, "missing field 'gold'");
  s.gold = parse_gold(j["gold"], line_no);
  return s;
}

std::string sample_to_json(const Sample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["task_kind"] = to_string(s.task_kind);
  j["question"] = s.question;
  if (!s.context.empty()) j["context"] = s.context;
  if (!s.choices.empty()) {
    j["choices"] = ordered_json::array();
    for (const auto& c : s.choices)
      j["choices"].push_back({{"id", c.id}, {"value", c.value}});
  }
  std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, CategoryMap>) {
          ordered_json m = ordered_json::object();
          for (const auto& [k, v] : g) m[k] = v;
          j["gold"] = m;
        } else {
          j["gold"] = g;
        }
      },
      s.gold);
  return j.dump();
}

std::vector<Sample> load_samples(const std::string& path,
                                 std::optional<TaskKind> task_kind,
                                 std::optional<size_t> cap, uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Sample> all;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Sample s = parse_sample_json(line, line_no);
    if (task_kind && s.task_kind != *task_kind) continue;
    all.push_back(std::move(s));
  }
  if (!cap || all.size() <= *cap) return all;
  auto perm = seeded_permutation(all.size(), seed);
  std::vector<Sample> picked;
  picked.reserve(*cap);
  for (size_t i = 0; i < *cap; ++i) picked.push_back(all[perm[i]]);
  std::sort(picked.begin(), picked.end(),
            [](const Sample& a, const Sample& b) { return a.id < b.id; });
  return picked;
}

ScirexDocument parse_scirex_document(const std::string& line, size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(line_no, e.what());
  }
  ScirexDocument doc;
  if (!j.contains("id") || !j["id"].is_string())
    throw SchemaError(line_no, "missing string field 'id'");
  doc.id = j["id"].get<std::string>();
  if (!j.contains("sentences") || !j["sentences"].is_array())
    throw SchemaError(line_no, "missing array field 'sentences'");
  for (const auto& s : j["sentences"]) {
    if (!s.is_string()) throw SchemaError(line_no, "sentences must be strings");
    doc.sentences.push_back(s.get<std::string>());
  }
  if (!j.contains("entities") || !j["entities"].is_object())
    throw SchemaError(line_no, "missing object field 'entities'");
  for (auto it = j["entities"].begin(); it != j["entities"].end(); ++it) {
    if (!it.value().is_array())
      throw SchemaError(line_no, "entity lists must be arrays");
    for (const auto& e : it.value()) {
      if (!e.is_object() || !e.contains("text") || !e.contains("sentence") ||
          !e["text"].is_string() || !e["sentence"].is_number_integer())
        throw SchemaError(line_no,
                          "each entity needs string 'text' and int 'sentence'");
      int idx = e["sentence"].get<int>();
      if (idx < 0 || static_cast<size_t>(idx) >= doc.sentences.size())
        throw SchemaError(line_no, "entity sentence index out of range");
      doc.entities[it.key()].push_back({e["text"].get<std::string>(), idx});
    }
  }
  return doc;
}

Sample synthesize_scirex(const ScirexDocument& doc, ScirexLevel level,
                         uint64_t seed) {
  size_t window = 1;
  std::vector<std::string> required{"Task"};
  switch (level) {
    case ScirexLevel::Easy:
      break;
    case ScirexLevel::Medium:
      window = 3;
      required = {"Task", "Method"};
      break;
    case ScirexLevel::Hard:
      window = 5;
      required = {"Task", "Method", "Material", "Metric"};
      break;
  }
  if (doc.sentences.size() < window)
    throw NoEligibleWindowError(doc.id + ": document shorter than window");

  auto covered = [&](const std::string& cat, size_t start) {
    auto it = doc.entities.find(cat);
    if (it == doc.entities.end()) return false;
    for (const auto& e : it->second) {
      size_t s = static_cast<size_t>(e.sentence);
      if (s >= start && s < start + window) return true;
    }
    return false;
  };

  std::vector<size_t> eligible;
  for (size_t start = 0; start + window <= doc.sentences.size(); ++start) {
    bool ok = true;
    for (const auto& cat : required)
      if (!covered(cat, start)) {
        ok = false;
        break;
      }
    if (ok) eligible.push_back(start);
  }
  if (eligible.empty())
    throw NoEligibleWindowError(doc.id +
                                ": no sentence window covers all categories");

  std::mt19937_64 rng(seed);
  size_t start = eligible[static_cast<size_t>(rng() % eligible.size())];

  std::string context;
  for (size_t i = start; i < start + window; ++i) {
    if (!context.empty()) context += " ";
    context += doc.sentences[i];
  }

  CategoryMap gold;
  for (const auto& cat : required) {
    std::vector<std::string> items;
    for (const auto& e : doc.entities.at(cat)) {
      size_t s = static_cast<size_t>(e.sentence);
      if (s < start || s >= start + window) continue;
      if (std::find(items.begin(), items.end(), e.text) == items.end())
        items.push_back(e.text);
    }
    gold[cat] = std::move(items);
  }

  Sample sample;
  sample.id = doc.id + ":w" + std::to_string(start);
  sample.task_kind = TaskKind::Extraction;
  sample.context = context;
  sample.gold = std::move(gold);
  return sample;
}

std::vector<Demonstration> sample_demonstrations(
    const std::vector<Sample>& train, size_t k, const FormatSpec& format,
    uint64_t seed) {
  auto perm = seeded_permutation(train.size(), seed);
  std::vector<Demonstration> demos;
  for (size_t idx : perm) {
    if (demos.size() == k) break;
    const Sample& s = train[idx];
    std::ostringstream q;
    q << s.question;
    if (!s.context.empty()) q << "\nContext: " << s.context;
    if (!s.choices.empty()) {
      q << "\nAnswer choices: ";
      for (size_t i = 0; i < s.choices.size(); ++i) {
        if (i) q << " | ";
        q << s.choices[i].id << ". " << s.choices[i].value;
      }
    }
    try {
      std::string answer = render_answer(s, format, /*cot=*/false);
      const std::vector<Choice>* choices =
          s.choices.empty() ? nullptr : &s.choices;
      std::vector<std::string> keys = mapping_schema_keys(s, format);
      demos.push_back(
          make_demonstration(q.str(), std::move(answer), format, choices,
                             keys.empty() ? nullptr : &keys));
    } catch (const IncompatibleFormatError&) {
      continue;
    }
  }
  if (demos.size() < k)
    throw InsufficientTrainError(
        "only " + std::to_string(demos.size()) + " of " + std::to_string(k) +
        " demonstrations available for " + format.id);
  return demos;
}

std::vector<int> synthesize_finetune_counts(
    const std::vector<double>& sys_e_scores, int scale,
    const std::optional<std::vector<int>>& ratios_override) {
  if (sys_e_scores.empty()) throw EmptyInputError("no scores");
  if (ratios_override) {
    if (ratios_override->size() != sys_e_scores.size())
      throw LengthMismatchError("ratio override length mismatch");
    std::vector<int> counts;
    for (int r : *ratios_override) counts.push_back(r * scale);
    return counts;
  }
  double max_score = *std::max_element(sys_e_scores.begin(),
                                       sys_e_scores.end());
  if (max_score <= 0.0)
    throw ZeroScoreWithoutOverrideError("all scores are zero");
  std::vector<int> counts;
  for (double score : sys_e_scores) {
    if (score <= 0.0)
      throw ZeroScoreWithoutOverrideError(
          "zero score requires an explicit ratio override");
    double ratio = score / max_score;
    // Nearest unit fraction 1/m, then invert: weaker formats get more data.
    int best_m = 1;
    double best_err = std::abs(ratio - 1.0);
    for (int m = 2; m <= 10; ++m) {
      double err = std::abs(ratio - 1.0 / m);
      if (err < best_err) {
        best_err = err;
        best_m = m;
      }
    }
    counts.push_back(best_m * scale);
  }
  return counts;
}

size_t emit_finetune_records(const std::vector<Sample>& train,
                             const std::vector<FormatSpec>& formats,
                             const std::vector<int>& counts, std::ostream& out,
                             const std::string& system_message) {
  if (formats.size() != counts.size())
    throw LengthMismatchError("formats/counts length mismatch");
  if (train.empty()) throw EmptyInputError("empty training pool");
  size_t emitted = 0;
  for (size_t f = 0; f < formats.size(); ++f) {
    const FormatSpec& fmt = formats[f];
    size_t cursor = 0;
    int produced = 0;
    size_t scanned = 0;
    while (produced < counts[f]) {
      if (scanned++ > train.size() * static_cast<size_t>(counts[f] + 1))
        throw InsufficientTrainError("no compatible samples for " + fmt.id);
      const Sample& s = train[cursor];
      cursor = (cursor + 1) % train.size();
      std::string answer;
      try {
        answer = render_answer(s, fmt, /*cot=*/false);
      } catch (const IncompatibleFormatError&) {
        continue;
      }
      PromptRequest req;
      req.sample = s;
      req.format = fmt;
      req.method = Method::ZS;
      std::string prompt = build_prompt(req);
      ScoreOptions opts;
      const std::vector<Choice>* choices =
          s.choices.empty() ? nullptr : &s.choices;
      std::vector<std::string> keys = mapping_schema_keys(s, fmt);
      auto verdict = score_format(answer, fmt, choices,
                                  keys.empty() ? nullptr : &keys, opts);
      if (!verdict.follows)
        throw Error("rendered answer fails its own format check for " +
                    fmt.id + " on sample " + s.id);
      ordered_json rec;
      rec["messages"] = ordered_json::array();
      rec["messages"].push_back(
          {{"role", "system"}, {"content", system_message}});
      rec["messages"].push_back({{"role", "user"}, {"content", prompt}});
      rec["messages"].push_back({{"role", "assistant"}, {"content", answer}});
      out << rec.dump() << "\n";
      ++produced;
      ++emitted;
    }
  }
  return emitted;
}

}  // namespace formatbias
