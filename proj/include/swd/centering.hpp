#ifndef SWD_CENTERING_HPP
#define SWD_CENTERING_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "swd/basis.hpp"
#include "swd/layout.hpp"
#include "swd/working.hpp"

namespace swd {

// Centered design matrices L~_i = g(X_i) - centering term. With a
// treatment-independent W~ the marginal centering term reduces to the
// assignment-distribution average of the design, E_p[g(X_i)], evaluated with
// cluster i's own sizes; the stratified variant replaces it with the
// within-stratum empirical average at the observed assignments.
struct CenteredDesign {
  enum class Mode { marginal, stratified };
  Mode mode = Mode::marginal;
  std::vector<Eigen::MatrixXd> center;    // per cluster, n_periods x d (per-period rows)
  std::vector<Eigen::MatrixXd> observed;  // per cluster, n_i x d, at observed crossover
  std::vector<int> strata;                // stratified mode only
  std::vector<std::string> notes;         // degenerate-stratum diagnostics

  // L~_i evaluated at a hypothetical crossover (per-observation rows).
  Eigen::MatrixXd at(const TreatmentBasis& basis, const TrialLayout& layout,
                     int cluster, int crossover,
                     const Eigen::VectorXd& h = Eigen::VectorXd()) const;
};

// Permutation-expectation centering. The corr argument is part of the general
// E^{-1}(W)E{W g} form; with treatment-independent W it cancels exactly, so
// only the layout's assignment distribution enters.
CenteredDesign center_marginal(const TreatmentBasis& basis, const TrialLayout& layout,
                               const AssignmentDistribution& dist,
                               const WorkingCorrelation& corr,
                               const std::vector<Eigen::VectorXd>& modifier_h = {});

// Covariate-conditional centering: the within-stratum empirical version of
// E^{-1}(W)E{W g}, aggregated in period space. Degenerate strata contribute
// zero rows. A non-empty augment matrix (n_clusters x q) adds continuous
// cluster-level covariates to the per-period centering basis.
CenteredDesign center_stratified(const TreatmentBasis& basis, const TrialLayout& layout,
                                 const WorkingCorrelation& corr,
                                 const std::vector<int>& strata,
                                 const Eigen::MatrixXd& augment = Eigen::MatrixXd(),
                                 const std::vector<Eigen::VectorXd>& modifier_h = {});

// Per-period centering rows (n_periods x dim) for one stratum, given the
// member clusters at their observed assignments:
// (sum_i P_i' W_i P_i)^{-1} (sum_i P_i' W_i g_i). Weighting by W makes
// sum_i P_i' W_i (g_i - P_i c) vanish identically, so stratum-by-period
// signals drop out of the estimating equation exactly.
Eigen::MatrixXd stratum_center(const TreatmentBasis& basis, const TrialLayout& layout,
                               const WorkingCorrelation& corr,
                               const std::vector<int>& members,
                               const std::vector<Eigen::VectorXd>& modifier_h = {});

// Per-cluster centering rows (n_periods x dim each) for stratified centering,
// optionally augmented with continuous cluster-level covariates. The centering
// basis per period is {stratum indicators} + {augment columns}, fit jointly by
// W-weighted least squares across the given clusters; the fitted value for
// cluster i combines its stratum block with augment(i, .) times the covariate
// blocks. With zero augment columns this reduces to per-stratum solves. The
// augmented form additionally removes covariate-linear-by-period signals from
// the estimating equation. Keys of the returned map are cluster indices.
std::map<int, Eigen::MatrixXd> stratified_centers(
    const TreatmentBasis& basis, const TrialLayout& layout,
    const WorkingCorrelation& corr, const std::vector<int>& clusters,
    const std::vector<int>& strata, const Eigen::MatrixXd& augment,
    const std::vector<Eigen::VectorXd>& modifier_h = {});

// Per-cluster residual vectors with the stratified-centering span swept out by
// least squares: stratum-by-period means plus a per-period linear fit on each
// augment covariate. Signals in that span are absorbed by the (assignment-
// adaptive) stratified centering, so downstream moment fits and permutation
// variance computations should not see them. Returns the input unchanged when
// strata do not cover the layout.
std::vector<Eigen::VectorXd> sweep_centering_span(
    const std::vector<Eigen::VectorXd>& resid, const TrialLayout& layout,
    const std::vector<int>& strata, const Eigen::MatrixXd& augment);

} // namespace swd

#endif
