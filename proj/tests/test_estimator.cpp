#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "swd/errors.hpp"
#include "swd/estimator.hpp"
#include "swd/sim.hpp"

using namespace swd;

namespace {

TrialLayout benchmark_layout() {
  TrialLayout l = build_layout(10, 5, {2, 3, 4, 5}, {3, 3, 2, 2});
  l.observed_crossover = {2, 2, 2, 3, 3, 3, 4, 4, 5, 5};
  return l;
}

// Noise-free outcomes: period effect j^2 plus delta per treated cell.
TrialData noiseless_data(const TrialLayout& l, double delta) {
  TrialData d;
  d.outcomes.resize(l.n_clusters);
  d.covariates.resize(l.n_clusters);
  for (int i = 0; i < l.n_clusters; ++i) {
    Eigen::VectorXd y(l.cluster_obs(i));
    int row = 0;
    for (int j = 1; j <= l.n_periods; ++j) {
      double x = j >= l.observed_crossover[i] ? 1.0 : 0.0;
      for (int k = 0; k < l.cluster_sizes(i, j - 1); ++k)
        y[row++] = double(j) * j + delta * x;
    }
    d.outcomes[i] = y;
    d.covariates[i] = Eigen::MatrixXd(l.cluster_obs(i), 0);
  }
  return d;
}

WorkingCorrelation independence(double s2 = 1.0) {
  WorkingCorrelation c;
  c.kind = WorkingCorrelation::Kind::independence;
  c.sigma2_resid = s2;
  return c;
}

WorkingMeanSpec categorical_mean() {
  WorkingMeanSpec m;
  m.kind = WorkingMeanSpec::Kind::categorical_time;
  return m;
}

WorkingMeanSpec zero_mean() {
  WorkingMeanSpec m;
  m.kind = WorkingMeanSpec::Kind::zero;
  return m;
}

}  // namespace

TEST_CASE("exact recovery of the effect on noise-free data") {
  TrialLayout l = benchmark_layout();
  TrialData d = noiseless_data(l, 4.0);
  ModelFit fit = estimate(d, l, it_basis(), categorical_mean(), independence(),
                          CenteringSpec{});
  CHECK(fit.res.delta.size() == 1);
  CHECK(fit.res.delta[0] == doctest::Approx(4.0).epsilon(1e-10));
  // Residuals vanish when the model is exact.
  for (const Eigen::VectorXd& r : fit.res.residuals)
    CHECK(r.cwiseAbs().maxCoeff() < 1e-8);
  // Leave-one-out estimates recover the same truth.
  for (const Eigen::VectorXd& loo : fit.res.loo_deltas)
    CHECK(loo[0] == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("two clusters, three periods: hand-solved closed form") {
  // Centered columns are (0, 1/2, 0) for the early cluster and (0, -1/2, 0)
  // for the late one; with m~ = 0 and W~ = I the scalar system collapses to
  // delta = y_early(period 2) - y_late(period 2).
  TrialLayout l = build_layout(2, 3, {2, 3}, {1, 1});
  l.observed_crossover = {2, 3};
  TrialData d;
  Eigen::VectorXd y0(3), y1(3);
  y0 << 0.7, 5.3, 2.1;
  y1 << 1.9, 0.8, -0.4;
  d.outcomes = {y0, y1};
  d.covariates = {Eigen::MatrixXd(3, 0), Eigen::MatrixXd(3, 0)};
  EstimatorOptions opts;
  opts.compute_loo = false;
  ModelFit fit = estimate(d, l, it_basis(), zero_mean(), independence(),
                          CenteringSpec{}, opts);
  CHECK(fit.res.delta[0] == doctest::Approx(5.3 - 0.8).epsilon(1e-12));
}

TEST_CASE("comparator equals the centered estimator on noise-free data") {
  TrialLayout l = benchmark_layout();
  TrialData d = noiseless_data(l, 4.0);
  ModelFit centered = estimate(d, l, it_basis(), categorical_mean(),
                               independence(), CenteringSpec{});
  ModelFit gee = estimate_gee_comparator(d, l, it_basis(), categorical_mean(),
                                         independence());
  CHECK(gee.comparator);
  CHECK(gee.res.delta[0] == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(gee.res.delta[0] == doctest::Approx(centered.res.delta[0]).epsilon(1e-10));
}

TEST_CASE("single-period designs are rejected") {
  CHECK_THROWS_AS(build_layout(2, 1, {2}, {2}), config_error);
}

TEST_CASE("translation invariance with a period-mean working model") {
  TrialLayout l = benchmark_layout();
  TrialData d = noiseless_data(l, 4.0);
  Rng rng(3);
  for (Eigen::VectorXd& y : d.outcomes)
    for (int k = 0; k < y.size(); ++k) y[k] += rng.normal();
  ModelFit base = estimate(d, l, it_basis(), categorical_mean(), independence(),
                           CenteringSpec{});
  TrialData shifted = d;
  for (Eigen::VectorXd& y : shifted.outcomes) y.array() += 100.0;
  ModelFit moved = estimate(shifted, l, it_basis(), categorical_mean(),
                            independence(), CenteringSpec{});
  CHECK(moved.res.delta[0] == doctest::Approx(base.res.delta[0]).epsilon(1e-9));
}

TEST_CASE("near-singular bread names the offending effect column") {
  // A custom basis with a duplicated column cannot be identified.
  std::map<int, Eigen::MatrixXd> rows;
  for (int r = 2; r <= 3; ++r) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 2);
    for (int j = r; j <= 3; ++j) m(j - 1, 0) = m(j - 1, 1) = 1.0;
    rows[r] = m;
  }
  TreatmentBasis b = custom_basis(3, rows, {"eff", "eff_copy"});
  TrialLayout l = build_layout(4, 3, {2, 3}, {2, 2});
  l.observed_crossover = {2, 2, 3, 3};
  TrialData d;
  d.outcomes.assign(4, Eigen::VectorXd::Ones(3));
  d.covariates.assign(4, Eigen::MatrixXd(3, 0));
  EstimatorOptions opts;
  opts.compute_loo = false;
  try {
    estimate(d, l, b, zero_mean(), independence(), CenteringSpec{}, opts);
    FAIL("expected numeric_error");
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("eff") != std::string::npos);
  }
}

TEST_CASE("post-stratified difference: single stratum") {
  std::vector<double> means = {3.0, 5.0, 2.0, 4.0};
  std::vector<int> treated = {1, 1, 0, 0};
  std::vector<int> strata = {0, 0, 0, 0};
  CHECK(estimate_post_stratified(means, treated, strata) ==
        doctest::Approx(4.0 - 3.0).epsilon(1e-12));
}

TEST_CASE("post-stratified difference: two strata, hand value") {
  // Stratum 0: treated 6, control 2 -> difference 4. Stratum 1: treated 5,
  // control 1 -> difference 4... use distinct values: treated 7, control 3.
  std::vector<double> means = {6.0, 2.0, 7.0, 3.0};
  std::vector<int> treated = {1, 0, 1, 0};
  std::vector<int> strata = {0, 0, 1, 1};
  // Equal stratum sizes: 0.5 * 4 + 0.5 * 4 = 4.
  CHECK(estimate_post_stratified(means, treated, strata) ==
        doctest::Approx(4.0).epsilon(1e-12));

  std::vector<double> means2 = {6.0, 2.0, 9.0, 3.0};
  CHECK(estimate_post_stratified(means2, treated, strata) ==
        doctest::Approx(0.5 * 4.0 + 0.5 * 6.0).epsilon(1e-12));
}

TEST_CASE("post-stratified difference: one-armed strata are dropped") {
  std::vector<double> means = {6.0, 2.0, 9.0, 7.0};
  std::vector<int> treated = {1, 0, 1, 1};  // stratum 1 has no controls
  std::vector<int> strata = {0, 0, 1, 1};
  std::vector<std::string> notes;
  CHECK(estimate_post_stratified(means, treated, strata, &notes) ==
        doctest::Approx(4.0).epsilon(1e-12));
  CHECK_FALSE(notes.empty());

  std::vector<int> all_treated = {1, 1, 1, 1};
  CHECK_THROWS_AS(estimate_post_stratified(means, all_treated, strata), numeric_error);
}

TEST_CASE("stratum weights: symmetry, arithmetic, and zero arms") {
  Eigen::VectorXd w = theorem3_weights({4, 4}, {2, 2});
  CHECK(w[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(0.5).epsilon(1e-12));

  // Unnormalized 4*(2/4)*(2/4) = 1 and 4*(1/4)*(3/4) = 3/4.
  Eigen::VectorXd w2 = theorem3_weights({4, 4}, {2, 1});
  CHECK(w2[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
  CHECK(w2[1] == doctest::Approx(3.0 / 7.0).epsilon(1e-12));

  Eigen::VectorXd w3 = theorem3_weights({4, 4}, {0, 2});
  CHECK(w3[0] == doctest::Approx(0.0));
  CHECK(w3[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stratified centering reduces to weighted mean differences") {
  // Three-period design, equal sizes, identity weights, no working mean: the
  // estimator only sees period 2, where it equals the theorem3-weighted
  // within-stratum treated-minus-control difference of cluster means.
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 6 + trial % 5;
    std::vector<int> crossovers(n);
    std::vector<int> strata(n);
    int c2 = 0;
    for (int i = 0; i < n; ++i) {
      crossovers[i] = rng.uniform() < 0.5 ? 2 : 3;
      c2 += crossovers[i] == 2 ? 1 : 0;
      strata[i] = rng.uniform_int(0, 1);
    }
    if (c2 == 0 || c2 == n) continue;
    TrialLayout l = build_layout(n, 3, {2, 3}, {c2, n - c2});
    l.observed_crossover = crossovers;
    TrialData d;
    d.outcomes.resize(n);
    d.covariates.resize(n);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd y(3);
      for (int k = 0; k < 3; ++k) y[k] = 3.0 * rng.normal();
      d.outcomes[i] = y;
      d.covariates[i] = Eigen::MatrixXd(3, 0);
    }

    // Reference: weighted within-stratum differences at period 2.
    std::vector<int> counts(2, 0), treated(2, 0);
    std::vector<double> sum1(2, 0), sum0(2, 0);
    for (int i = 0; i < n; ++i) {
      int k = strata[i];
      ++counts[k];
      if (crossovers[i] == 2) {
        ++treated[k];
        sum1[k] += d.outcomes[i][1];
      } else {
        sum0[k] += d.outcomes[i][1];
      }
    }
    bool any = false;
    for (int k = 0; k < 2; ++k)
      any = any || (treated[k] > 0 && treated[k] < counts[k]);
    if (!any) continue;
    Eigen::VectorXd w = theorem3_weights(counts, treated);
    double ref = 0;
    for (int k = 0; k < 2; ++k) {
      if (w[k] == 0.0) continue;
      ref += w[k] * (sum1[k] / treated[k] - sum0[k] / (counts[k] - treated[k]));
    }

    CenteringSpec cs;
    cs.mode = CenteredDesign::Mode::stratified;
    cs.strata = strata;
    EstimatorOptions opts;
    opts.compute_loo = false;
    ModelFit fit = estimate(d, l, it_basis(), zero_mean(), independence(), cs, opts);
    CHECK(fit.res.delta[0] == doctest::Approx(ref).epsilon(1e-10));
  }
}
