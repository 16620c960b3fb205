#ifndef SWD_WORKING_HPP
#define SWD_WORKING_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "swd/basis.hpp"
#include "swd/data.hpp"
#include "swd/layout.hpp"

namespace swd {

// ---------------------------------------------------------------------------
// Working control-mean model m~_i(T)

struct WorkingMeanSpec {
  enum class Kind { zero, linear_time, categorical_time, custom_regression };
  Kind kind = Kind::categorical_time;
  std::vector<std::string> covariates;       // cluster or observation level columns
  std::vector<std::string> custom_columns;   // regressors for custom_regression
  std::optional<Eigen::VectorXd> fixed_coefficients;  // skip fitting if set
};

struct WorkingMeanModel {
  WorkingMeanSpec spec;
  Eigen::VectorXd coefficients;  // length = regressor count (possibly 0)
  std::vector<std::string> regressor_names;

  // Regressor matrix for one cluster, n_i x p.
  Eigen::MatrixXd regressors(const TrialLayout& layout, int cluster,
                             const TrialData& data) const;
  // Fitted m~_i(T) vector for one cluster.
  Eigen::VectorXd values(const TrialLayout& layout, int cluster,
                         const TrialData& data) const;
};

// Regressor names implied by a mean spec (period dummies, covariates, ...).
std::vector<std::string> mean_regressor_names(const WorkingMeanSpec& spec,
                                              const TrialLayout& layout);

// Least-squares fit of Y - g(X) * pilot_delta on the model's regressors.
// kind=zero returns an all-zero model. Throws numeric_error on rank
// deficiency, naming the unidentified regressor.
WorkingMeanModel fit_working_mean(const WorkingMeanSpec& spec, const TrialData& data,
                                  const TrialLayout& layout, const TreatmentBasis& basis,
                                  const Eigen::VectorXd& pilot_delta,
                                  const std::vector<Eigen::VectorXd>& modifier_h = {});

// ---------------------------------------------------------------------------
// Working correlation / inverse covariance blocks W~_i

struct WorkingCorrelation {
  enum class Kind {
    independence,
    exchangeable,      // random cluster intercept
    nested_time,       // cluster intercept + cluster-period effect
    intercept_slope    // cluster intercept + random slope on period index
  };
  Kind kind = Kind::independence;
  double sigma2_cluster = 0.0;
  double sigma2_time = 0.0;   // slope variance (intercept_slope) or
                              // cluster-period variance (nested_time)
  double sigma2_resid = 1.0;
  bool truncated = false;     // some moment estimate was clipped at zero
};

// Method-of-moments variance components from pilot residuals.
WorkingCorrelation fit_working_correlation(WorkingCorrelation::Kind kind,
                                           const std::vector<Eigen::VectorXd>& residuals,
                                           const TrialLayout& layout);

// W~_i as an operator, applied via a Woodbury rank-k update so the dense
// n_i x n_i block is never formed unless asked for.
//
// For the random-effect kinds the residual diagonal is cell-balanced:
// var(residual of an observation in cell (i,j)) = sigma2_resid * cbar * n_ij,
// where cbar is the mean of 1/n_ij over all cells of the layout. At the
// cluster-period-mean level this collapses to a covariance block shared by
// every cluster regardless of its sizes, so the implied generalized
// least-squares weights treat all cells alike. Without it, cells with more
// individuals would dominate the period contrasts and the cluster-size
// pattern would leak into the effect equation through the random assignment.
// Equal cell sizes (including all-singleton data) give cbar * n_ij = 1 and
// recover the homoscedastic form exactly. Independence keeps the literal
// identity-over-sigma2 weight.
class ClusterPrecision {
public:
  ClusterPrecision(const WorkingCorrelation& corr, const TrialLayout& layout, int cluster);

  // W~_i * m for an n_i x c right-hand side.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const;

  // Explicit dense block (for small clusters and verification).
  Eigen::MatrixXd dense() const;

  // Implied covariance block V~_i (dense).
  Eigen::MatrixXd covariance() const;

  int rows() const { return n_; }

private:
  int n_;
  Eigen::VectorXd base_;    // per-observation residual variance diagonal
  Eigen::MatrixXd u_;       // n x k random-effect design
  Eigen::MatrixXd d_;       // k x k component covariance
  Eigen::LLT<Eigen::MatrixXd> cap_;  // D^-1 + U' base^-1 U
};

// Dense W~_i block for one cluster (spec surface; wraps ClusterPrecision).
Eigen::MatrixXd inverse_correlation_blocks(const WorkingCorrelation& corr,
                                           const TrialLayout& layout, int cluster);

} // namespace swd

#endif
