#pragma once

#include <optional>
#include <string>
#include <vector>

#include "formatbias/types.hpp"

namespace formatbias {

/// One scored sample feeding the aggregation. No default score is ever
/// assigned when the format check fails.
struct EvalRecord {
  std::string sample_id;
  bool follows = false;
  std::optional<double> score;  // in [0,1]; present iff follows
  std::string response_ref;
};

struct ReliabilityVerdict {
  bool reliable = false;
  double s = 0.0;          // sample std of satisfying scores ([0,1] scale)
  double v = 0.0;          // t critical value, df = S_C - 1
  double threshold = 1.0;  // lower bound on FI (fraction scale)
};

/// Aggregated results for one (model, task, format, method) cell.
/// FI, SysE, EstTrueE are percentages in [0,100].
struct FormatCell {
  std::string format_id;
  int n = 0;
  int satisfying = 0;  // S_C
  double fi = 0.0;
  double sys_e = 0.0;
  double est_true_e = 0.0;
  bool reliable = false;
  double sample_std = 0.0;
  double t_crit = 0.0;
};

struct BiasReport {
  std::string family;
  std::vector<FormatCell> cells;
  double mean_est_true_e = 0.0;
  double bias = 0.0;  // %^2
  std::vector<std::string> unreliable_formats;
};

struct MitigationVerdict {
  bool bias_decreased = false;
  std::vector<double> fi_delta;
  bool all_fi_increased = false;
};

/// FI / SysE / EstTrueE aggregation (reliability fields left unset).
/// Throws EmptyInputError.
FormatCell aggregate(const std::vector<EvalRecord>& records);

/// Upper-tail critical value t with P(T_df > t) = alpha_two_tailed,
/// accurate to 1e-6, by numeric inversion of the incomplete-beta-based
/// t CDF. Throws DomainError.
double t_critical(double alpha_two_tailed, int df);

/// Reliability gate on EstTrueE. Scores are used on the [0,1] fraction
/// scale; the verdict is FI > 1/(1 + n*(eps/(v*s))^2), strict inequality.
/// Degenerate cases: S_C <= 1 -> unreliable; s == 0 with S_C >= 2 ->
/// reliable.
ReliabilityVerdict reliability(const std::vector<EvalRecord>& records, int n,
                               double alpha = 0.05, double epsilon = 0.05);

/// Population variance (1/k) of EstTrueE percentages.
/// Throws TooFewFormatsError for k < 2.
double bias_fo(const std::vector<double>& est_true_scores);

BiasReport make_bias_report(const std::string& family,
                            std::vector<FormatCell> cells);

/// The two mitigation criteria, reported separately; no combined verdict.
/// Throws FamilyMismatchError.
MitigationVerdict compare_mitigation(const BiasReport& before,
                                     const BiasReport& after);

namespace stats {
/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);
/// P(T_df <= t) for the Student t distribution.
double student_t_cdf(double t, int df);
}  // namespace stats

}  // namespace formatbias
