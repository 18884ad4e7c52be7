#include "formatbias/estimator.hpp"

#include <algorithm>
#include <cmath>

#include "formatbias/errors.hpp"

namespace formatbias {

namespace stats {

namespace {

// Continued-fraction evaluation of the incomplete beta (Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, int df) {
  double x = df / (df + t * t);
  double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

}  // namespace stats

FormatCell aggregate(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw EmptyInputError("aggregate: no records");
  FormatCell cell;
  cell.n = static_cast<int>(records.size());
  double score_sum = 0.0;
  for (const auto& r : records) {
    if (!r.follows) continue;
    ++cell.satisfying;
    score_sum += r.score.value_or(0.0);
  }
  cell.fi = 100.0 * cell.satisfying / cell.n;
  cell.sys_e = 100.0 * score_sum / cell.n;
  cell.est_true_e = cell.fi > 0.0 ? cell.sys_e * 100.0 / cell.fi : 0.0;
  return cell;
}

double t_critical(double alpha_two_tailed, int df) {
  if (!(alpha_two_tailed > 0.0 && alpha_two_tailed < 0.5) || df < 1)
    throw DomainError("t_critical: need 0 < alpha < 0.5 and df >= 1");
  // P(T > t) is monotone decreasing in t; bracket then bisect.
  const double tail = alpha_two_tailed / 2.0;
  double lo = 0.0, hi = 1.0;
  while (1.0 - stats::student_t_cdf(hi, df) > tail) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (1.0 - stats::student_t_cdf(mid, df) > tail)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

ReliabilityVerdict reliability(const std::vector<EvalRecord>& records, int n,
                               double alpha, double epsilon) {
  ReliabilityVerdict out;
  std::vector<double> scores;
  for (const auto& r : records)
    if (r.follows) scores.push_back(r.score.value_or(0.0));
  int sc = static_cast<int>(scores.size());
  if (sc <= 1 || n <= 0) return out;  // no variance estimate
  double mean = 0.0;
  for (double x : scores) mean += x;
  mean /= sc;
  double ss = 0.0;
  for (double x : scores) ss += (x - mean) * (x - mean);
  out.s = std::sqrt(ss / (sc - 1));
  // rounding dust from summing identical values must not defeat the
  // zero-spread branch below
  if (out.s < 1e-9) out.s = 0.0;
  out.v = t_critical(alpha, sc - 1);
  if (out.s == 0.0) {
    // zero sampling variance => zero margin of error
    out.threshold = 0.0;
    out.reliable = true;
    return out;
  }
  double ratio = epsilon / (out.v * out.s);
  out.threshold = 1.0 / (1.0 + n * ratio * ratio);
  out.reliable = static_cast<double>(sc) / n > out.threshold;
  return out;
}

double bias_fo(const std::vector<double>& est_true_scores) {
  size_t k = est_true_scores.size();
  if (k < 2) throw TooFewFormatsError("bias_fo: need at least 2 formats");
  double mean = 0.0;
  for (double x : est_true_scores) mean += x;
  mean /= k;
  double ss = 0.0;
  for (double x : est_true_scores) ss += (x - mean) * (x - mean);
  return ss / k;  // population variance: the score set is exhaustive
}

BiasReport make_bias_report(const std::string& family,
                            std::vector<FormatCell> cells) {
  BiasReport rep;
  rep.family = family;
  rep.cells = std::move(cells);
  std::vector<double> scores;
  for (const auto& c : rep.cells) {
    scores.push_back(c.est_true_e);
    if (!c.reliable) rep.unreliable_formats.push_back(c.format_id);
  }
  if (!scores.empty()) {
    double sum = 0.0;
    for (double x : scores) sum += x;
    rep.mean_est_true_e = sum / scores.size();
  }
  rep.bias = scores.size() >= 2 ? bias_fo(scores) : 0.0;
  return rep;
}

MitigationVerdict compare_mitigation(const BiasReport& before,
                                     const BiasReport& after) {
  if (before.family != after.family ||
      before.cells.size() != after.cells.size())
    throw FamilyMismatchError("compare_mitigation: family mismatch");
  for (size_t i = 0; i < before.cells.size(); ++i)
    if (before.cells[i].format_id != after.cells[i].format_id)
      throw FamilyMismatchError("compare_mitigation: format ordering differs");
  MitigationVerdict v;
  v.bias_decreased = after.bias < before.bias;
  v.all_fi_increased = true;
  for (size_t i = 0; i < before.cells.size(); ++i) {
    double delta = after.cells[i].fi - before.cells[i].fi;
    v.fi_delta.push_back(delta);
    if (delta <= 0.0) v.all_fi_increased = false;
  }
  return v;
}

}  // namespace formatbias
