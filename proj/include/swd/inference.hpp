#ifndef SWD_INFERENCE_HPP
#define SWD_INFERENCE_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "swd/estimator.hpp"

namespace swd {

// Permutation-based variance of delta~ with exact marginal/pairwise
// assignment expectations in the meat and the bread held at the observed
// assignment. When the fit used stratified centering the expectations are
// taken over within-stratum permutations of the observed sequences (clusters
// in different strata reassigned independently): the stratified centering
// conditions on each stratum's sequence multiset, and only under that
// conditional distribution do the centered scores have mean zero.
struct VarianceEstimate {
  enum class Mode { plugin, leave_one_out };
  Mode mode = Mode::plugin;
  Eigen::MatrixXd v;           // d x d
  Eigen::MatrixXd diag_term;   // same-cluster component (after bread sandwich)
  Eigen::MatrixXd cross_term;  // cluster-pair component
  Eigen::VectorXd se;          // per component; falls back to the diagonal-only
                               // term when the cross term drives v_kk negative
  std::vector<bool> diag_only; // per component fallback flags
  std::vector<std::string> notes;
};

VarianceEstimate variance_permutation(const ModelFit& fit,
                                      const AssignmentDistribution& dist,
                                      VarianceEstimate::Mode mode);

// Exhaustive version with the bread inside the permutation expectation.
// Refuses designs with more than max_assignments distinct assignments.
VarianceEstimate variance_full_enumeration(const ModelFit& fit,
                                           VarianceEstimate::Mode mode,
                                           long max_assignments = 100000);

struct ConfidenceInterval {
  double lower = 0, upper = 0;
  bool valid = true;
  std::string note;
};

// Normal-quantile intervals by default; t with t_df degrees of freedom when
// t_df > 0. Nonpositive variance entries yield flagged degenerate intervals.
std::vector<ConfidenceInterval> confidence_interval(const Eigen::VectorXd& delta,
                                                    const VarianceEstimate& v,
                                                    double level, int t_df = 0);

struct LooInfluenceRow {
  int cluster = 0;
  std::string cluster_id;
  int crossover = 0;
  int size = 0;                  // total observations in the cluster
  Eigen::VectorXd delta_loo;
  Eigen::VectorXd deviation;     // delta_loo - delta
};

// Leave-one-out influence table ordered by crossover time (plot-ready).
std::vector<LooInfluenceRow> loo_influence(const ModelFit& fit);

// All distinct cluster-to-sequence assignments of a layout, each a vector of
// crossover times per cluster. Used by the full-enumeration variance mode and
// the brute-force oracles.
std::vector<std::vector<int>> enumerate_assignments(const TrialLayout& layout);

} // namespace swd

#endif
