#include "swd/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "swd/errors.hpp"
#include "swd/inference.hpp"

namespace swd {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

Rng::Rng(std::uint64_t seed) : state_(seed) {}

Rng Rng::stream(std::uint64_t seed, std::uint64_t replicate) {
  return Rng(seed + kGolden * (replicate + 1));
}

std::uint64_t Rng::next_u64() {
  state_ += kGolden;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw config_error("uniform_int: empty range");
  std::uint64_t range = static_cast<std::uint64_t>(hi) - lo + 1;
  std::uint64_t bound = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t draw;
  do {
    draw = next_u64();
  } while (draw >= bound);
  return lo + static_cast<int>(draw % range);
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  have_spare_ = true;
  return r * std::cos(theta);
}

SimulatedTrial generate(const DgpSpec& spec, std::uint64_t replicate) {
  if (spec.setting != 1 && spec.setting != 2)
    throw config_error("DgpSpec.setting must be 1 or 2");
  const int n = spec.n_clusters;
  const int t = spec.n_periods;
  const int s = t - 1;
  if (t < 2) throw config_error("DgpSpec.n_periods must be at least 2");
  if (n < s) throw config_error("DgpSpec: fewer clusters than sequences");

  Rng rng = Rng::stream(spec.seed, replicate);

  // allocation: base count per sequence, extras to a random subset of sequences
  std::vector<int> sequences(s), allocation(s, n / s);
  std::iota(sequences.begin(), sequences.end(), 2);
  int extras = n - (n / s) * s;
  if (extras > 0) {
    std::vector<int> order(s);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int e = 0; e < extras; ++e) allocation[order[e]] += 1;
  }

  std::vector<int> crossovers;
  for (int q = 0; q < s; ++q)
    for (int c = 0; c < allocation[q]; ++c) crossovers.push_back(sequences[q]);
  rng.shuffle(crossovers);

  std::vector<int> baseline(n), pattern(n);
  Eigen::MatrixXi sizes(n, t);
  for (int i = 0; i < n; ++i) {
    baseline[i] = rng.uniform_int(spec.baseline_min, spec.baseline_max);
    pattern[i] = i % 4;
    for (int j = 0; j < t; ++j)
      sizes(i, j) = baseline[i] + (pattern[i] >= 2 ? j : 0);
  }

  SimulatedTrial out;
  out.layout = build_layout(n, t, sequences, allocation, sizes);
  out.layout.observed_crossover = crossovers;
  out.truth = spec.true_delta;
  out.size_pattern = pattern;

  out.data.covariate_names = {"baseline_size"};
  out.data.outcomes.resize(n);
  out.data.covariates.resize(n);
  for (int i = 0; i < n; ++i) {
    double tau = std::sqrt(spec.sigma2_cluster) * rng.normal();
    double eta = std::sqrt(spec.sigma2_slope) * rng.normal();
    int obs = out.layout.cluster_obs(i);
    Eigen::VectorXd y(obs);
    int row = 0;
    for (int j = 1; j <= t; ++j) {
      double trend = 4.0 * double(j - 1) * double(j - 1);
      if (spec.setting == 2 && baseline[i] <= spec.trend_threshold) trend = 0.0;
      double x = j >= crossovers[i] ? 1.0 : 0.0;
      double mean = 3.0 + trend + spec.true_delta * x + tau + eta * j;
      for (int k = 0; k < sizes(i, j - 1); ++k)
        y[row++] = mean + std::sqrt(spec.sigma2_resid) * rng.normal();
    }
    out.data.outcomes[i] = y;
    out.data.covariates[i] =
        Eigen::MatrixXd::Constant(obs, 1, static_cast<double>(baseline[i]));
  }
  return out;
}

SimConfig sim_config(char label, bool comparator) {
  SimConfig c;
  c.label = std::string(1, label);
  c.comparator = comparator;
  char base;
  switch (label) {
    case 'a': case 'b': case 'c': case 'd':
      base = label;
      break;
    case 'e': case 'f': case 'g': case 'h':
      base = static_cast<char>(label - 4);
      c.adjust_baseline = true;
      break;
    default:
      throw config_error(std::string("unknown simulation config '") + label + "'");
  }
  c.mean_kind = (base == 'a' || base == 'b') ? WorkingMeanSpec::Kind::linear_time
                                             : WorkingMeanSpec::Kind::categorical_time;
  c.corr_kind = (base == 'a' || base == 'c')
                    ? WorkingCorrelation::Kind::exchangeable
                    : WorkingCorrelation::Kind::intercept_slope;
  return c;
}

std::vector<int> median_split(const std::vector<double>& values) {
  if (values.empty()) throw config_error("median_split: no values");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::size_t n = sorted.size();
  double median = n % 2 == 1 ? sorted[n / 2]
                             : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<int> strata(n);
  for (std::size_t i = 0; i < n; ++i) strata[i] = values[i] > median ? 1 : 0;
  return strata;
}

double imbalance_diagnostic(const TrialLayout& layout,
                            const std::vector<double>& covariate) {
  if (static_cast<int>(covariate.size()) != layout.n_clusters)
    throw config_error("imbalance_diagnostic: covariate length != n_clusters");
  if (!layout.has_observed())
    throw config_error("imbalance_diagnostic: layout has no observed assignment");
  const int n = layout.n_clusters;
  std::vector<double> frac(n);
  for (int i = 0; i < n; ++i)
    frac[i] = double(layout.n_periods - layout.observed_crossover[i] + 1) /
              double(layout.n_periods);
  double mc = std::accumulate(covariate.begin(), covariate.end(), 0.0) / n;
  double mf = std::accumulate(frac.begin(), frac.end(), 0.0) / n;
  double sc = 0, sf = 0, scf = 0;
  for (int i = 0; i < n; ++i) {
    sc += (covariate[i] - mc) * (covariate[i] - mc);
    sf += (frac[i] - mf) * (frac[i] - mf);
    scf += (covariate[i] - mc) * (frac[i] - mf);
  }
  if (sc <= 0) throw data_error("imbalance_diagnostic: covariate has zero variance");
  if (sf <= 0)
    throw data_error("imbalance_diagnostic: treatment fraction has zero variance");
  return scf / std::sqrt(sc * sf);
}

namespace {

PipelineSpec pipeline_for(const SimConfig& config, const TrialLayout& layout,
                          const TrialData& data, double cut) {
  PipelineSpec p;
  p.basis = it_basis();
  p.mean.kind = config.mean_kind;
  p.corr_kind = config.corr_kind;
  p.comparator = config.comparator;
  if (config.adjust_baseline) {
    p.mean.covariates = {"baseline_size"};
    if (!config.comparator) {
      // Design adjustment: bin the precision variable at the benchmark cut and
      // center within the two strata, so stratum-by-period signals drop out of
      // the estimating equation.
      std::vector<double> k = data.cluster_covariate(layout, "baseline_size");
      p.centering.mode = CenteredDesign::Mode::stratified;
      p.centering.strata.resize(k.size());
      for (std::size_t i = 0; i < k.size(); ++i)
        p.centering.strata[i] = k[i] > cut ? 1 : 0;
    }
  }
  p.opts.compute_loo = !config.comparator;
  return p;
}

} // namespace

StudyResult run_study(const DgpSpec& spec, const std::vector<SimConfig>& configs,
                      int n_reps) {
  StudyResult study;
  study.spec = spec;
  study.configs.resize(configs.size());
  for (std::size_t c = 0; c < configs.size(); ++c) {
    study.configs[c].config =
        (configs[c].comparator ? "comparator-" : "proposed-") + configs[c].label;
    study.configs[c].n_reps = n_reps;
    study.configs[c].records.reserve(n_reps);
  }

  for (int rep = 0; rep < n_reps; ++rep) {
    SimulatedTrial trial = generate(spec, rep);
    double imbalance = 0;
    try {
      imbalance = imbalance_diagnostic(
          trial.layout, trial.data.cluster_covariate(trial.layout, "baseline_size"));
    } catch (const data_error&) {
      imbalance = std::numeric_limits<double>::quiet_NaN();
    }

    for (std::size_t c = 0; c < configs.size(); ++c) {
      ReplicateRecord rec;
      rec.replicate = rep;
      rec.imbalance = imbalance;
      try {
        PipelineSpec p = pipeline_for(configs[c], trial.layout, trial.data,
                                      spec.trend_threshold);
        ModelFit fit = fit_pipeline(trial.data, trial.layout, p);
        rec.estimate = fit.res.delta[0];
        rec.deviation = rec.estimate - trial.truth;
        if (!configs[c].comparator) {
          AssignmentDistribution dist = assignment_distribution(trial.layout);
          VarianceEstimate vp =
              variance_permutation(fit, dist, VarianceEstimate::Mode::plugin);
          VarianceEstimate vl =
              variance_permutation(fit, dist, VarianceEstimate::Mode::leave_one_out);
          rec.se_plugin = vp.se[0];
          rec.se_loo = vl.se[0];
          auto cip = confidence_interval(fit.res.delta, vp, 0.95);
          auto cil = confidence_interval(fit.res.delta, vl, 0.95);
          rec.covered_plugin =
              cip[0].lower <= trial.truth && trial.truth <= cip[0].upper;
          rec.covered_loo =
              cil[0].lower <= trial.truth && trial.truth <= cil[0].upper;
        }
      } catch (const error& e) {
        rec.failed = true;
        rec.note = e.what();
      }
      study.configs[c].records.push_back(std::move(rec));
    }
  }

  for (std::size_t c = 0; c < configs.size(); ++c) {
    ConfigMetrics& m = study.configs[c];
    double sum = 0, sumsq = 0, sp = 0, sl = 0;
    int ok = 0, covp = 0, covl = 0;
    for (const ReplicateRecord& r : m.records) {
      if (r.failed) {
        ++m.n_fail;
        continue;
      }
      ++ok;
      sum += r.estimate;
      sp += r.se_plugin;
      sl += r.se_loo;
      covp += r.covered_plugin ? 1 : 0;
      covl += r.covered_loo ? 1 : 0;
    }
    if (ok > 0) {
      double mean = sum / ok;
      m.bias = mean - spec.true_delta;
      for (const ReplicateRecord& r : m.records)
        if (!r.failed) sumsq += (r.estimate - mean) * (r.estimate - mean);
      m.sd = ok > 1 ? std::sqrt(sumsq / (ok - 1)) : 0;
      m.mean_se_plugin = sp / ok;
      m.mean_se_loo = sl / ok;
      if (configs[c].comparator) {
        m.coverage_plugin = m.coverage_loo =
            std::numeric_limits<double>::quiet_NaN();
      } else {
        m.coverage_plugin = 100.0 * covp / ok;
        m.coverage_loo = 100.0 * covl / ok;
      }
    }
  }
  return study;
}

} // namespace swd
