#include <doctest.h>

#include <random>

#include "formatbias/errors.hpp"
#include "formatbias/estimator.hpp"

namespace fb = formatbias;

namespace {

std::vector<fb::EvalRecord> make_records(int n, int satisfying,
                                         const std::vector<double>& scores) {
  std::vector<fb::EvalRecord> out;
  for (int i = 0; i < n; ++i) {
    fb::EvalRecord r;
    r.sample_id = "s" + std::to_string(i);
    r.follows = i < satisfying;
    if (r.follows) r.score = scores[i % scores.size()];
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("aggregate computes FI, systematic, and estimated-true scores") {
  auto records = make_records(10, 8, {0.5});
  auto cell = fb::aggregate(records);
  CHECK(cell.n == 10);
  CHECK(cell.satisfying == 8);
  CHECK(cell.fi == doctest::Approx(80.0));
  CHECK(cell.sys_e == doctest::Approx(40.0));
  CHECK(cell.est_true_e == doctest::Approx(50.0));
}

TEST_CASE("zero instruction-following yields zero estimated-true score") {
  auto records = make_records(5, 0, {1.0});
  auto cell = fb::aggregate(records);
  CHECK(cell.fi == 0.0);
  CHECK(cell.est_true_e == 0.0);
}

TEST_CASE("aggregate rejects empty input and is permutation-invariant") {
  CHECK_THROWS_AS(fb::aggregate({}), fb::EmptyInputError);
  auto records = make_records(50, 30, {0.2, 0.9, 0.4});
  auto base = fb::aggregate(records);
  std::mt19937 rng(3);
  std::shuffle(records.begin(), records.end(), rng);
  auto shuffled = fb::aggregate(records);
  CHECK(base.fi == doctest::Approx(shuffled.fi));
  CHECK(base.sys_e == doctest::Approx(shuffled.sys_e));
  CHECK(base.est_true_e == doctest::Approx(shuffled.est_true_e));
}

TEST_CASE("t critical values match reference tables to 1e-6") {
  struct Case {
    int df;
    double expected;
  };
  // two-tailed alpha = 0.05
  const Case cases[] = {{1, 12.7062047364}, {5, 2.5705818356},
                        {10, 2.2281388520}, {30, 2.0422724563},
                        {149, 1.9760131777}, {199, 1.9719565442}};
  for (const auto& c : cases) {
    CHECK(std::abs(fb::t_critical(0.05, c.df) - c.expected) <= 1e-6);
  }
  CHECK_THROWS_AS(fb::t_critical(0.05, 0), fb::DomainError);
  CHECK_THROWS_AS(fb::t_critical(0.7, 5), fb::DomainError);
}

TEST_CASE("student t cdf is symmetric and monotone") {
  CHECK(fb::stats::student_t_cdf(0.0, 7) == doctest::Approx(0.5));
  CHECK(fb::stats::student_t_cdf(2.0, 7) +
            fb::stats::student_t_cdf(-2.0, 7) ==
        doctest::Approx(1.0));
  CHECK(fb::stats::student_t_cdf(1.0, 7) < fb::stats::student_t_cdf(2.0, 7));
}

TEST_CASE("reliability verdict on a frozen worked example") {
  // n = 200, 150 satisfying, scores alternating 0/1: s = 0.5016750466,
  // v = t(0.975, 149) = 1.9760131777, threshold = 0.6627792781, FI = 0.75.
  std::vector<double> scores{0.0, 1.0};
  auto records = make_records(200, 150, scores);
  auto verdict = fb::reliability(records, 200);
  CHECK(verdict.s == doctest::Approx(0.5016750466));
  CHECK(verdict.v == doctest::Approx(1.9760131777));
  CHECK(verdict.threshold == doctest::Approx(0.6627792781));
  CHECK(verdict.reliable);
}

TEST_CASE("reliability degenerate cases") {
  // a single satisfying response can never ground the estimate
  auto one = make_records(100, 1, {1.0});
  CHECK(!fb::reliability(one, 100).reliable);
  // identical satisfying scores: zero spread, estimate exact
  auto flat = make_records(100, 10, {0.7});
  CHECK(fb::reliability(flat, 100).reliable);
  CHECK(fb::reliability(flat, 100).threshold == 0.0);
}

TEST_CASE("reliability is monotone in FI for fixed score spread") {
  std::vector<double> scores{0.0, 1.0};
  bool was_reliable = false;
  for (int satisfying : {10, 40, 80, 120, 160, 200}) {
    auto records = make_records(200, satisfying, scores);
    bool now = fb::reliability(records, 200).reliable;
    if (was_reliable) CHECK(now);
    was_reliable = now;
  }
  CHECK(was_reliable);
}

TEST_CASE("bias is the population variance of estimated-true scores") {
  CHECK(fb::bias_fo({40.90, 27.88}) == doctest::Approx(42.3801));
  CHECK(fb::bias_fo({50.0, 50.0, 50.0}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(fb::bias_fo({1.0}), fb::TooFewFormatsError);
}

TEST_CASE("bias variance properties") {
  std::vector<double> xs{12.0, 55.0, 71.0, 33.0};
  double base = fb::bias_fo(xs);
  std::vector<double> shifted, scaled;
  for (double x : xs) {
    shifted.push_back(x + 13.7);
    scaled.push_back(x * 2.0);
  }
  CHECK(fb::bias_fo(shifted) == doctest::Approx(base));
  CHECK(fb::bias_fo(scaled) == doctest::Approx(base * 4.0));
}

TEST_CASE("mitigation comparison reports both criteria") {
  fb::FormatCell a;
  a.format_id = "wrap.bold";
  a.fi = 60.0;
  a.est_true_e = 40.0;
  fb::FormatCell b;
  b.format_id = "wrap.italic";
  b.fi = 80.0;
  b.est_true_e = 70.0;
  auto before = fb::make_bias_report("demo", {a, b});
  fb::FormatCell a2 = a, b2 = b;
  a2.fi = 90.0;
  a2.est_true_e = 55.0;
  b2.fi = 85.0;
  b2.est_true_e = 60.0;
  auto after = fb::make_bias_report("demo", {a2, b2});
  auto verdict = fb::compare_mitigation(before, after);
  CHECK(verdict.bias_decreased);
  CHECK(verdict.all_fi_increased);

  auto other = fb::make_bias_report("other", {a2});
  CHECK_THROWS_AS(fb::compare_mitigation(before, other),
                  fb::FamilyMismatchError);
}
