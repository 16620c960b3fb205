// Acceptance gate: ten benchmark criteria, one [PASS]/[FAIL] line each.
// Exit status is the number of failed criteria.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "swd/inference.hpp"
#include "swd/io.hpp"
#include "swd/sim.hpp"

using namespace swd;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what,
            const std::string& detail) {
  std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", criterion,
              what.c_str(), detail.c_str());
  if (!pass) ++g_failures;
}

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

constexpr std::uint64_t kSeed = 12345;
constexpr int kReps = 1000;

const ConfigMetrics& metrics_for(const StudyResult& study, const std::string& name) {
  for (const ConfigMetrics& m : study.configs)
    if (m.config == name) return m;
  throw std::runtime_error("missing config " + name);
}

// Pearson correlation of estimate deviation with the imbalance diagnostic,
// i.e. the standardized deviation-vs-imbalance regression slope.
double standardized_slope(const ConfigMetrics& m) {
  double sx = 0, sy = 0, n = 0;
  for (const ReplicateRecord& r : m.records)
    if (!r.failed && std::isfinite(r.imbalance)) {
      sx += r.imbalance;
      sy += r.deviation;
      n += 1;
    }
  double mx = sx / n, my = sy / n, vxx = 0, vyy = 0, vxy = 0;
  for (const ReplicateRecord& r : m.records)
    if (!r.failed && std::isfinite(r.imbalance)) {
      vxx += (r.imbalance - mx) * (r.imbalance - mx);
      vyy += (r.deviation - my) * (r.deviation - my);
      vxy += (r.imbalance - mx) * (r.deviation - my);
    }
  return vxy / std::sqrt(vxx * vyy);
}

WorkingCorrelation independence(double s2 = 1.0) {
  WorkingCorrelation c;
  c.kind = WorkingCorrelation::Kind::independence;
  c.sigma2_resid = s2;
  return c;
}

WorkingMeanSpec zero_mean() {
  WorkingMeanSpec m;
  m.kind = WorkingMeanSpec::Kind::zero;
  return m;
}

WorkingMeanSpec categorical_mean() {
  WorkingMeanSpec m;
  m.kind = WorkingMeanSpec::Kind::categorical_time;
  return m;
}

// ---------------------------------------------------------------------------

void criterion_1(const StudyResult& s1) {
  const char* labels[] = {"a", "b", "c", "d"};
  const double paper_sd[] = {0.36, 0.32, 0.33, 0.25};
  const double paper_cov[] = {98, 98, 95, 95};
  bool pass = true;
  std::string detail;
  for (int k = 0; k < 4; ++k) {
    const ConfigMetrics& m = metrics_for(s1, std::string("proposed-") + labels[k]);
    bool bias_ok = std::abs(m.bias) <= 0.05;
    bool sd_ok = m.sd >= 0.8 * paper_sd[k] && m.sd <= 1.2 * paper_sd[k];
    bool cov_ok = std::abs(m.coverage_loo - paper_cov[k]) <= 3.0;
    pass = pass && bias_ok && sd_ok && cov_ok;
    detail += std::string("(") + labels[k] + ") bias=" + fmt(m.bias, 3) +
              " sd=" + fmt(m.sd, 3) + " covL=" + fmt(m.coverage_loo, 1) +
              (bias_ok && sd_ok && cov_ok ? "" : " <-") + "  ";
  }
  report(1, pass, "benchmark setting 1, configs (a)-(d): bias/SD/coverage bands",
         detail);
}

void criterion_2(const StudyResult& s1) {
  const ConfigMetrics& lin = metrics_for(s1, "comparator-a");
  const ConfigMetrics& cat = metrics_for(s1, "comparator-c");
  bool lin_ok = lin.bias > 0 && lin.bias >= 0.03;
  bool cat_ok = std::abs(cat.bias) <= 0.05;
  report(2, lin_ok && cat_ok,
         "comparator bias contrast (misspecified vs correct working mean)",
         "linear-mean bias=" + fmt(lin.bias, 4) + " (need >= +0.03)" +
             (lin_ok ? "" : " <-") + "  categorical-mean bias=" + fmt(cat.bias, 4) +
             " (need |bias| <= 0.05)" + (cat_ok ? "" : " <-"));
}

void criterion_3(const StudyResult& s2) {
  const char* labels[] = {"e", "f", "g", "h"};
  const double paper_sd[] = {0.43, 0.45, 0.43, 0.35};
  const double paper_cov[] = {95, 95, 95, 96};
  bool pass = true;
  std::string detail;
  for (int k = 0; k < 4; ++k) {
    const ConfigMetrics& m = metrics_for(s2, std::string("proposed-") + labels[k]);
    bool bias_ok = std::abs(m.bias) <= 0.05;
    bool sd_ok = m.sd >= 0.75 * paper_sd[k] && m.sd <= 1.25 * paper_sd[k];
    bool cov_ok = std::abs(m.coverage_loo - paper_cov[k]) <= 3.0;
    pass = pass && bias_ok && sd_ok && cov_ok;
    detail += std::string("(") + labels[k] + ") bias=" + fmt(m.bias, 3) +
              " sd=" + fmt(m.sd, 3) + " covL=" + fmt(m.coverage_loo, 1) +
              (bias_ok && sd_ok && cov_ok ? "" : " <-") + "  ";
  }
  double slope_prop = std::abs(standardized_slope(metrics_for(s2, "proposed-h")));
  double slope_comp = std::abs(standardized_slope(metrics_for(s2, "comparator-h")));
  bool slopes_ok = slope_prop < 0.1 && slope_comp > 0.5;
  pass = pass && slopes_ok;
  detail += "slope(proposed-h)=" + fmt(slope_prop, 3) +
            " slope(comparator-h)=" + fmt(slope_comp, 3) + (slopes_ok ? "" : " <-");
  report(3, pass, "benchmark setting 2, configs (e)-(h): stability bands + "
                  "deviation-vs-imbalance slopes",
         detail);
}

void criterion_4() {
  // Noise-free outcomes from several layouts with a correctly structured
  // working mean must return the exact effect.
  double worst = 0;
  DgpSpec spec;
  spec.sigma2_cluster = spec.sigma2_slope = spec.sigma2_resid = 0;
  for (int setting : {1, 2}) {
    spec.setting = setting;
    spec.seed = 7 + setting;
    for (int rep = 0; rep < 3; ++rep) {
      SimulatedTrial t = generate(spec, rep);
      PipelineSpec p;
      p.basis = it_basis();
      p.mean = categorical_mean();
      if (setting == 2) {
        // The threshold trend is a stratum-by-period signal: binned stratified
        // centering removes it exactly, making the mean structure correct.
        std::vector<double> k = t.data.cluster_covariate(t.layout, "baseline_size");
        p.centering.mode = CenteredDesign::Mode::stratified;
        p.centering.strata.resize(k.size());
        for (std::size_t i = 0; i < k.size(); ++i)
          p.centering.strata[i] = k[i] > 15.0 ? 1 : 0;
      }
      p.corr_kind = WorkingCorrelation::Kind::exchangeable;
      // Noise-free residuals leave nothing for the moment estimators; recovery
      // must hold for any valid working covariance, so fix one.
      WorkingCorrelation w;
      w.kind = p.corr_kind;
      w.sigma2_cluster = 0.25;
      w.sigma2_resid = 4.0;
      p.fixed_corr = w;
      p.opts.compute_loo = false;
      ModelFit fit = fit_pipeline(t.data, t.layout, p);
      worst = std::max(worst, std::abs(fit.res.delta[0] - t.truth));
    }
  }
  report(4, worst <= 1e-10, "exact recovery on noise-free data",
         "max |estimate - truth| = " + fmt(worst, 14));
}

void criterion_5() {
  // Equal-size designs, N <= 8: averaging the estimate over every
  // cluster-to-sequence permutation of fixed potential outcomes returns the
  // true effect exactly.
  struct Design {
    int n, t;
    std::vector<int> seq, alloc;
  };
  std::vector<Design> designs = {{4, 3, {2, 3}, {2, 2}},
                                 {5, 3, {2, 3}, {3, 2}},
                                 {6, 4, {2, 3, 4}, {2, 2, 2}},
                                 {8, 5, {2, 3, 4, 5}, {2, 2, 2, 2}}};
  const double delta = 4.0;
  double worst = 0;
  Rng rng(101);
  for (const Design& ds : designs) {
    TrialLayout base = build_layout(ds.n, ds.t, ds.seq, ds.alloc);
    std::vector<Eigen::VectorXd> y0(ds.n);
    for (int i = 0; i < ds.n; ++i) {
      y0[i] = Eigen::VectorXd(ds.t);
      for (int j = 0; j < ds.t; ++j) y0[i][j] = 5.0 * rng.normal();
    }
    double mean = 0;
    std::vector<std::vector<int>> all = enumerate_assignments(base);
    for (const std::vector<int>& a : all) {
      TrialLayout l = base;
      l.observed_crossover = a;
      TrialData d;
      d.outcomes.resize(ds.n);
      d.covariates.resize(ds.n);
      for (int i = 0; i < ds.n; ++i) {
        Eigen::MatrixXd g = cluster_design(it_basis(), l, i, a[i]);
        d.outcomes[i] = y0[i] + delta * g.col(0);
        d.covariates[i] = Eigen::MatrixXd(ds.t, 0);
      }
      EstimatorOptions opts;
      opts.compute_loo = false;
      ModelFit fit =
          estimate(d, l, it_basis(), zero_mean(), independence(), CenteringSpec{}, opts);
      mean += fit.res.delta[0] / double(all.size());
    }
    worst = std::max(worst, std::abs(mean - delta));
  }
  report(5, worst <= 1e-10, "permutation unbiasedness over full enumeration",
         "max |enumeration mean - truth| = " + fmt(worst, 14));
}

void criterion_6() {
  // N <= 6 equal-size designs: the analytic marginal/pairwise variance equals
  // the brute-force enumeration variance of the total score, term by term.
  struct Design {
    int n, t;
    std::vector<int> seq, alloc;
  };
  std::vector<Design> designs = {{4, 3, {2, 3}, {2, 2}},
                                 {5, 4, {2, 3, 4}, {2, 2, 1}},
                                 {6, 4, {2, 3, 4}, {2, 2, 2}}};
  double worst = 0;
  Rng rng(55);
  for (const Design& ds : designs) {
    TrialLayout l = build_layout(ds.n, ds.t, ds.seq, ds.alloc);
    std::vector<int> observed;
    for (std::size_t q = 0; q < ds.seq.size(); ++q)
      for (int c = 0; c < ds.alloc[q]; ++c) observed.push_back(ds.seq[q]);
    l.observed_crossover = observed;
    TrialData d;
    d.outcomes.resize(ds.n);
    d.covariates.resize(ds.n);
    for (int i = 0; i < ds.n; ++i) {
      d.outcomes[i] = Eigen::VectorXd(ds.t);
      for (int j = 0; j < ds.t; ++j) d.outcomes[i][j] = 3.0 * rng.normal();
      d.covariates[i] = Eigen::MatrixXd(ds.t, 0);
    }
    EstimatorOptions opts;
    opts.compute_loo = false;
    ModelFit fit =
        estimate(d, l, it_basis(), zero_mean(), independence(), CenteringSpec{}, opts);
    VarianceEstimate v = variance_permutation(fit, assignment_distribution(l),
                                              VarianceEstimate::Mode::plugin);

    // Brute force: per-cluster scores at every hypothetical crossover, with
    // the bread held at the observed assignment (equal sizes keep it fixed).
    double bread = 0;
    for (int i = 0; i < ds.n; ++i) {
      Eigen::MatrixXd lt = fit.centered.at(fit.basis, l, i, observed[i]);
      Eigen::MatrixXd g = cluster_design(fit.basis, l, i, observed[i]);
      bread += (lt.transpose() * g)(0, 0);
    }
    auto score = [&](int i, int r) {
      Eigen::MatrixXd lr = fit.centered.at(fit.basis, l, i, r);
      return (lr.transpose() * fit.res.residuals[i])(0, 0) / bread;
    };
    std::vector<std::vector<int>> all = enumerate_assignments(l);
    double diag = 0, cross = 0;
    for (const std::vector<int>& a : all) {
      for (int i = 0; i < ds.n; ++i) {
        double ai = score(i, a[i]);
        diag += ai * ai / double(all.size());
        for (int j = 0; j < ds.n; ++j)
          if (j != i) cross += ai * score(j, a[j]) / double(all.size());
      }
    }
    worst = std::max(worst, std::abs(v.diag_term(0, 0) - diag));
    worst = std::max(worst, std::abs(v.cross_term(0, 0) - cross));
    worst = std::max(worst, std::abs(v.v(0, 0) - (diag + cross)));
  }
  report(6, worst <= 1e-10,
         "analytic variance equals brute-force enumeration (diag + cross)",
         "max component discrepancy = " + fmt(worst, 14));
}

void criterion_7() {
  // 200 randomized three-period instances: the stratified-centering estimator
  // equals the inverse-variance-weighted within-stratum difference of
  // period-2 cluster means.
  Rng rng(202);
  int tested = 0;
  double worst = 0;
  while (tested < 200) {
    int n = 4 + rng.uniform_int(0, 6);
    std::vector<int> crossovers(n), strata(n);
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
    std::vector<int> counts(2, 0), treated(2, 0);
    std::vector<double> sum1(2, 0), sum0(2, 0);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd y(3);
      for (int j = 0; j < 3; ++j) y[j] = 3.0 * rng.normal();
      d.outcomes[i] = y;
      d.covariates[i] = Eigen::MatrixXd(3, 0);
      int k = strata[i];
      ++counts[k];
      if (crossovers[i] == 2) {
        ++treated[k];
        sum1[k] += y[1];
      } else {
        sum0[k] += y[1];
      }
    }
    bool informative = false;
    for (int k = 0; k < 2; ++k)
      informative = informative || (treated[k] > 0 && treated[k] < counts[k]);
    if (!informative) continue;
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
    worst = std::max(worst, std::abs(fit.res.delta[0] - ref));
    ++tested;
  }
  report(7, worst <= 1e-10,
         "stratified centering equals weighted post-stratification (200 instances)",
         "max |difference| = " + fmt(worst, 14));
}

void criterion_8(const StudyResult& s1) {
  const ConfigMetrics& m = metrics_for(s1, "proposed-d");
  int ok = m.n_reps - m.n_fail;
  bool pass = ok >= 500 && m.mean_se_loo >= m.mean_se_plugin;
  report(8, pass, "leave-one-out SE is conservative relative to plug-in",
         "mean SE plug-in=" + fmt(m.mean_se_plugin, 4) +
             " leave-one-out=" + fmt(m.mean_se_loo, 4) + " over " +
             std::to_string(ok) + " replicates");
}

void criterion_9() {
  // Periods that can never change treatment status carry no information:
  // perturbing their outcomes must leave the estimate bit-identical.
  TrialLayout l = build_layout(10, 5, {2, 3, 4, 5}, {3, 3, 2, 2});
  l.observed_crossover = {2, 2, 2, 3, 3, 3, 4, 4, 5, 5};
  Rng rng(88);
  TrialData d;
  d.outcomes.resize(10);
  d.covariates.resize(10);
  for (int i = 0; i < 10; ++i) {
    d.outcomes[i] = Eigen::VectorXd(5);
    for (int j = 0; j < 5; ++j) d.outcomes[i][j] = 2.0 * rng.normal();
    d.covariates[i] = Eigen::MatrixXd(5, 0);
  }
  EstimatorOptions opts;
  opts.compute_loo = false;

  auto perturb = [&](int period) {
    TrialData p = d;
    for (int i = 0; i < 10; ++i) p.outcomes[i][period] += 50.0 + i;
    return p;
  };

  ModelFit it0 = estimate(d, l, it_basis(), categorical_mean(), independence(),
                          CenteringSpec{}, opts);
  double it_first = std::abs(estimate(perturb(0), l, it_basis(), categorical_mean(),
                                      independence(), CenteringSpec{}, opts)
                                 .res.delta[0] -
                             it0.res.delta[0]);
  double it_last = std::abs(estimate(perturb(4), l, it_basis(), categorical_mean(),
                                     independence(), CenteringSpec{}, opts)
                                .res.delta[0] -
                            it0.res.delta[0]);

  ModelFit et0 = estimate(d, l, eti_basis(5), categorical_mean(), independence(),
                          CenteringSpec{}, opts);
  ModelFit et1 = estimate(perturb(0), l, eti_basis(5), categorical_mean(),
                          independence(), CenteringSpec{}, opts);
  ModelFit et5 = estimate(perturb(4), l, eti_basis(5), categorical_mean(),
                          independence(), CenteringSpec{}, opts);
  double eti_first = (et1.res.delta - et0.res.delta).cwiseAbs().maxCoeff();
  double eti_last = (et5.res.delta - et0.res.delta).cwiseAbs().maxCoeff();

  bool pass = it_first < 1e-12 && it_last < 1e-12 && eti_first < 1e-12 &&
              eti_last > 1e-6;
  report(9, pass, "zero-information periods are inert",
         "indicator basis: first/last period shifts " + fmt(it_first, 14) + "/" +
             fmt(it_last, 14) + "; exposure basis: first " + fmt(eti_first, 14) +
             " inert, last " + fmt(eti_last, 4) + " informative");
}

void criterion_10() {
  VarianceEstimate v;
  v.v = Eigen::MatrixXd::Constant(1, 1, 0.0043 * 0.0043);
  v.se = Eigen::VectorXd::Constant(1, 0.0043);
  v.diag_only = {false};
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, -0.0086);
  std::vector<ConfidenceInterval> ci = confidence_interval(delta, v, 0.95);
  // Agreement within one unit in the fourth decimal place; the published upper
  // endpoint reflects rounding of the inputs (exact value -0.00017).
  double dl = std::abs(ci[0].lower - (-0.0170));
  double du = std::abs(ci[0].upper - (-0.0001));
  bool pass = ci[0].valid && dl <= 1e-4 && du <= 1e-4;
  report(10, pass, "published interval arithmetic from estimate -0.0086, SE 0.0043",
         "emitted (" + fmt(ci[0].lower, 5) + ", " + fmt(ci[0].upper, 5) +
             ") vs (-0.0170, -0.0001)");
}

}  // namespace

int main() {
  std::printf("acceptance: replicated benchmarks use seed %llu, %d replicates\n",
              static_cast<unsigned long long>(kSeed), kReps);

  DgpSpec s1spec;
  s1spec.setting = 1;
  s1spec.seed = kSeed;
  std::vector<SimConfig> s1configs = {
      sim_config('a', false), sim_config('b', false), sim_config('c', false),
      sim_config('d', false), sim_config('a', true),  sim_config('c', true)};
  StudyResult s1 = run_study(s1spec, s1configs, kReps);

  DgpSpec s2spec;
  s2spec.setting = 2;
  s2spec.seed = kSeed;
  std::vector<SimConfig> s2configs = {
      sim_config('e', false), sim_config('f', false), sim_config('g', false),
      sim_config('h', false), sim_config('h', true)};
  StudyResult s2 = run_study(s2spec, s2configs, kReps);

  criterion_1(s1);
  criterion_2(s1);
  criterion_3(s2);
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8(s1);
  criterion_9();
  criterion_10();

  std::printf("acceptance: %d of 10 criteria failed\n", g_failures);
  return g_failures;
}
