#ifndef SWD_ESTIMATOR_HPP
#define SWD_ESTIMATOR_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "swd/basis.hpp"
#include "swd/centering.hpp"
#include "swd/data.hpp"
#include "swd/layout.hpp"
#include "swd/working.hpp"

namespace swd {

struct CenteringSpec {
  CenteredDesign::Mode mode = CenteredDesign::Mode::marginal;
  std::vector<int> strata;  // required for stratified mode
  // Optional continuous covariates (n_clusters x q) added to the stratified
  // centering basis per period; removes covariate-by-period signals from the
  // estimating equation in addition to stratum-by-period ones.
  Eigen::MatrixXd augment;
  std::vector<std::string> augment_names;
};

struct EstimatorOptions {
  bool compute_loo = true;
  // Leave-one-out re-estimation recomputes the centering over the reduced
  // allocation by default; set false to reuse the full-N distribution.
  bool loo_reduced_distribution = true;
  // Refit the working mean coefficients on the N-1 clusters as well.
  bool loo_refit_mean = false;
  double cond_threshold = 1e10;
};

struct EstimationResult {
  Eigen::VectorXd delta;
  Eigen::VectorXd gamma;                  // working-mean coefficients (may be empty)
  Eigen::MatrixXd bread;                  // sum_i L~_i' W~_i g(X_i)
  std::vector<Eigen::VectorXd> residuals; // Y_i - g(X_i) delta - m~_i
  std::vector<Eigen::VectorXd> loo_deltas;
  std::vector<std::string> labels;        // effect column labels
  std::vector<std::string> diagnostics;
};

// Everything needed to evaluate the fit downstream (variance estimation,
// reporting). Inputs are held by value; a fit is self-contained.
struct ModelFit {
  EstimationResult res;
  TrialLayout layout;
  TreatmentBasis basis;
  WorkingMeanModel mean;
  WorkingCorrelation corr;
  CenteredDesign centered;
  CenteringSpec centering_spec;
  std::vector<Eigen::VectorXd> modifier_h;  // per-cluster modifier encodings
  TrialData data;
  bool comparator = false;

  Eigen::VectorXd modifier(int cluster) const {
    return modifier_h.empty() ? Eigen::VectorXd() : modifier_h[cluster];
  }
};

// Closed-form centered estimator. The working mean is profiled jointly with
// delta (one linear solve over both blocks) unless the spec carries fixed
// coefficients. Throws numeric_error with offending column names when the
// bread matrix is near singular.
ModelFit estimate(const TrialData& data, const TrialLayout& layout,
                  const TreatmentBasis& basis, const WorkingMeanSpec& mean_spec,
                  const WorkingCorrelation& corr, const CenteringSpec& centering,
                  const EstimatorOptions& opts = {});

// Non-centered GEE-form comparator: g(X_i) in place of L~_i. Consistency
// requires a correctly specified working mean.
ModelFit estimate_gee_comparator(const TrialData& data, const TrialLayout& layout,
                                 const TreatmentBasis& basis,
                                 const WorkingMeanSpec& mean_spec,
                                 const WorkingCorrelation& corr,
                                 const EstimatorOptions& opts = {});

// Post-stratified difference of cluster means at one designated period,
// weighted by stratum size. Strata without both arms are dropped with a note.
double estimate_post_stratified(const std::vector<double>& cluster_means,
                                const std::vector<int>& treated,
                                const std::vector<int>& strata,
                                std::vector<std::string>* notes = nullptr);

// Normalized inverse-variance-style stratum weights
// n_k * (w_k(1)/n_k) * (w_k(0)/n_k), renormalized to sum to one.
Eigen::VectorXd theorem3_weights(const std::vector<int>& strata_counts,
                                 const std::vector<int>& treated_counts);

} // namespace swd

#endif
