#ifndef SWD_SIM_HPP
#define SWD_SIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "swd/data.hpp"
#include "swd/layout.hpp"
#include "swd/pipeline.hpp"

namespace swd {

// Deterministic cross-platform generator: splitmix64 state transitions,
// 53-bit uniforms, Box-Muller normals (cached second deviate). Streams for
// (seed, replicate) are derived by mixing the replicate index into the seed,
// so replicates are independent and order-free.
class Rng {
public:
  explicit Rng(std::uint64_t seed);
  static Rng stream(std::uint64_t seed, std::uint64_t replicate);

  std::uint64_t next_u64();
  double uniform();                 // [0, 1)
  int uniform_int(int lo, int hi);  // inclusive, unbiased
  double normal();
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i)
      std::swap(v[i], v[uniform_int(0, i)]);
  }

private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0;
};

// Data-generating process for the two benchmark settings. Setting one has a
// quadratic period trend for every cluster; setting two switches the trend on
// only for clusters whose baseline size exceeds 15, making it a precision
// variable that can be imbalanced in-sample.
struct DgpSpec {
  int setting = 1;  // 1 or 2
  int n_clusters = 10;
  int n_periods = 5;
  double sigma2_cluster = 0.25;  // random intercept
  double sigma2_slope = 0.25;    // random slope on period index
  double sigma2_resid = 4.0;
  double true_delta = 4.0;
  int baseline_min = 11, baseline_max = 20;
  // Setting-two trend cut: clusters with baseline size strictly above this get
  // the quadratic trend. Also used as the binning cut for the adjusted configs.
  double trend_threshold = 15.0;
  std::uint64_t seed = 0;
};

struct SimulatedTrial {
  TrialLayout layout;
  TrialData data;  // covariate column "baseline_size"
  double truth = 0;
  std::vector<int> size_pattern;  // per cluster: 0..3 (0,1 constant; 2,3 grow)
};

// Draw order per replicate: extra-cluster sequences, assignment shuffle,
// per-cluster baseline sizes, per-cluster (intercept, slope) effects,
// per-observation noise in (cluster, period, individual) order.
SimulatedTrial generate(const DgpSpec& spec, std::uint64_t replicate);

// One benchmark model configuration. Labels a-d pair {linear, categorical}
// working means with {cluster, cluster+slope} working correlations; e-h add
// the baseline-size covariate to the mean and, for the centered estimator,
// stratify the centering on baseline size binned at the trend cut.
struct SimConfig {
  std::string label;
  WorkingMeanSpec::Kind mean_kind = WorkingMeanSpec::Kind::linear_time;
  WorkingCorrelation::Kind corr_kind = WorkingCorrelation::Kind::exchangeable;
  bool adjust_baseline = false;  // covariate in mean + stratified centering
  bool comparator = false;
};

SimConfig sim_config(char label, bool comparator);

// Binary strata from a strict median split of per-cluster values.
std::vector<int> median_split(const std::vector<double>& values);

struct ReplicateRecord {
  std::uint64_t replicate = 0;
  double estimate = 0, deviation = 0;
  double se_plugin = 0, se_loo = 0;
  bool covered_plugin = false, covered_loo = false;
  double imbalance = 0;  // correlation of baseline size with fraction treated
  bool failed = false;
  std::string note;
};

struct ConfigMetrics {
  std::string config;
  int n_reps = 0, n_fail = 0;
  double bias = 0, sd = 0;
  double coverage_plugin = 0, coverage_loo = 0;  // percent, over non-failures
  double mean_se_plugin = 0, mean_se_loo = 0;
  std::vector<ReplicateRecord> records;
};

struct StudyResult {
  DgpSpec spec;
  std::vector<ConfigMetrics> configs;
};

// Replicated benchmark: per config, bias, SD of the estimates, mean SEs, and
// 95% CI coverage under plug-in and leave-one-out variance modes. Estimation
// failures are recorded per replicate, never thrown.
StudyResult run_study(const DgpSpec& spec, const std::vector<SimConfig>& configs,
                      int n_reps);

// In-sample Pearson correlation between a per-cluster covariate and the
// fraction of treated periods. Throws data_error on zero variance.
double imbalance_diagnostic(const TrialLayout& layout,
                            const std::vector<double>& covariate);

} // namespace swd

#endif
