#include "formatbias/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <set>

#include "formatbias/errors.hpp"
#include "formatbias/extractor.hpp"

namespace formatbias {

namespace {

std::vector<std::string> squad_tokens(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (char c : s) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;  // punctuation stripped, no replacement
    cleaned.push_back(static_cast<char>(std::tolower(u)));
  }
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : cleaned) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) tokens.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

struct PrCounts {
  size_t overlap = 0, pred = 0, gold = 0;
};

double f1_from(const PrCounts& c) {
  if (c.pred == 0 || c.gold == 0 || c.overlap == 0) return 0.0;
  double p = static_cast<double>(c.overlap) / c.pred;
  double r = static_cast<double>(c.overlap) / c.gold;
  return 2 * p * r / (p + r);
}

std::set<std::string> normalized_set(const std::vector<std::string>& xs) {
  std::set<std::string> out;
  for (const auto& x : xs) {
    std::string n = normalize_value(x);
    if (!n.empty()) out.insert(std::move(n));
  }
  return out;
}

}  // namespace

std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::Accuracy: return "Accuracy";
    case MetricKind::TokenF1: return "TokenF1";
    case MetricKind::SetF1: return "SetF1";
    case MetricKind::MAP: return "MAP";
  }
  return "?";
}

MetricKind metric_for_task(TaskKind t) {
  switch (t) {
    case TaskKind::Mcq: return MetricKind::Accuracy;
    case TaskKind::Qa:
    case TaskKind::Math:
    case TaskKind::Keyphrase: return MetricKind::TokenF1;
    case TaskKind::Ranking: return MetricKind::MAP;
    case TaskKind::Extraction: return MetricKind::SetF1;
  }
  return MetricKind::TokenF1;
}

double accuracy(std::string_view pred, std::string_view gold, McqMode mode) {
  if (mode == McqMode::Char) return trim(pred) == trim(gold) ? 1.0 : 0.0;
  return normalize_value(pred) == normalize_value(gold) ? 1.0 : 0.0;
}

double token_f1(std::string_view pred, std::string_view gold) {
  auto p = squad_tokens(pred);
  auto g = squad_tokens(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::map<std::string, size_t> counts;
  for (const auto& t : g) ++counts[t];
  size_t overlap = 0;
  for (const auto& t : p) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  return f1_from({overlap, p.size(), g.size()});
}

double set_f1(const CategoryMap& pred, const CategoryMap& gold) {
  std::set<std::string> keys;
  for (const auto& [k, _] : pred) keys.insert(k);
  for (const auto& [k, _] : gold) keys.insert(k);
  PrCounts micro;
  for (const auto& k : keys) {
    auto pit = pred.find(k);
    auto git = gold.find(k);
    auto ps = normalized_set(pit == pred.end() ? std::vector<std::string>{}
                                               : pit->second);
    auto gs = normalized_set(git == gold.end() ? std::vector<std::string>{}
                                               : git->second);
    micro.pred += ps.size();
    micro.gold += gs.size();
    for (const auto& e : ps) micro.overlap += gs.count(e);
  }
  return f1_from(micro);
}

double list_f1(const std::vector<std::string>& pred,
               const std::vector<std::string>& gold) {
  return set_f1({{"_", pred}}, {{"_", gold}});
}

double average_precision(const std::vector<int>& pred,
                         const std::vector<int>& gold) {
  if (pred.size() != gold.size())
    throw LengthMismatchError("pred/gold length mismatch");
  size_t relevant = std::accumulate(gold.begin(), gold.end(), size_t{0});
  if (relevant == 0) throw NoRelevantError("query has no relevant documents");
  std::vector<size_t> order(pred.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return pred[a] > pred[b]; });
  double sum = 0.0;
  size_t hits = 0;
  for (size_t rank = 1; rank <= order.size(); ++rank) {
    if (gold[order[rank - 1]]) {
      ++hits;
      sum += static_cast<double>(hits) / rank;
    }
  }
  return sum / relevant;
}

}  // namespace formatbias
