#include "swd/centering.hpp"

#include <map>

#include "swd/errors.hpp"

namespace swd {

namespace {

Eigen::MatrixXd expand_rows(const Eigen::MatrixXd& period_mat, const TrialLayout& layout,
                            int cluster) {
  Eigen::MatrixXd out(layout.cluster_obs(cluster), period_mat.cols());
  int pos = 0;
  for (int j = 0; j < layout.n_periods; ++j) {
    int n = layout.cluster_sizes(cluster, j);
    out.middleRows(pos, n) = period_mat.row(j).replicate(n, 1);
    pos += n;
  }
  return out;
}

Eigen::VectorXd h_for(const std::vector<Eigen::VectorXd>& modifier_h, int cluster) {
  return modifier_h.empty() ? Eigen::VectorXd() : modifier_h[cluster];
}

} // namespace

Eigen::MatrixXd CenteredDesign::at(const TreatmentBasis& basis, const TrialLayout& layout,
                                   int cluster, int crossover,
                                   const Eigen::VectorXd& h) const {
  Eigen::MatrixXd rows = period_rows(basis, layout, crossover, h) - center[cluster];
  return expand_rows(rows, layout, cluster);
}

CenteredDesign center_marginal(const TreatmentBasis& basis, const TrialLayout& layout,
                               const AssignmentDistribution& dist,
                               const WorkingCorrelation& corr,
                               const std::vector<Eigen::VectorXd>& modifier_h) {
  (void)corr;  // treatment-independent W~: E^{-1}(W)E{W g} = E_p[g]
  CenteredDesign out;
  out.mode = CenteredDesign::Mode::marginal;
  out.center.resize(layout.n_clusters);
  for (int i = 0; i < layout.n_clusters; ++i) {
    Eigen::VectorXd h = h_for(modifier_h, i);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(layout.n_periods, basis.dim);
    for (int s = 0; s < layout.n_sequences(); ++s)
      mean.noalias() += dist.marginal[s] * period_rows(basis, layout, layout.sequences[s], h);
    out.center[i] = mean;
  }
  if (layout.has_observed()) {
    out.observed.resize(layout.n_clusters);
    for (int i = 0; i < layout.n_clusters; ++i)
      out.observed[i] = out.at(basis, layout, i, layout.observed_crossover[i],
                               h_for(modifier_h, i));
  }
  return out;
}

Eigen::MatrixXd stratum_center(const TreatmentBasis& basis, const TrialLayout& layout,
                               const WorkingCorrelation& corr,
                               const std::vector<int>& members,
                               const std::vector<Eigen::VectorXd>& modifier_h) {
  const int t = layout.n_periods;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(t, t);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(t, basis.dim);
  for (int i : members) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(layout.cluster_obs(i), t);
    int pos = 0;
    for (int j = 0; j < t; ++j) {
      int nij = layout.cluster_sizes(i, j);
      p.col(j).segment(pos, nij).setOnes();
      pos += nij;
    }
    ClusterPrecision prec(corr, layout, i);
    Eigen::MatrixXd wp = prec.apply(p);
    Eigen::MatrixXd g = expand_rows(
        period_rows(basis, layout, layout.observed_crossover[i], h_for(modifier_h, i)),
        layout, i);
    a.noalias() += wp.transpose() * p;
    b.noalias() += wp.transpose() * g;
  }
  return a.llt().solve(b);
}

std::map<int, Eigen::MatrixXd> stratified_centers(
    const TreatmentBasis& basis, const TrialLayout& layout,
    const WorkingCorrelation& corr, const std::vector<int>& clusters,
    const std::vector<int>& strata, const Eigen::MatrixXd& augment,
    const std::vector<Eigen::VectorXd>& modifier_h) {
  std::map<int, Eigen::MatrixXd> out;
  const int q = static_cast<int>(augment.cols());
  if (q == 0) {
    std::map<int, std::vector<int>> members;
    for (int i : clusters) members[strata[i]].push_back(i);
    std::map<int, Eigen::MatrixXd> per_stratum;
    for (const auto& [kappa, idx] : members)
      per_stratum[kappa] = stratum_center(basis, layout, corr, idx, modifier_h);
    for (int i : clusters) out[i] = per_stratum[strata[i]];
    return out;
  }
  if (augment.rows() != layout.n_clusters)
    throw config_error("centering augment matrix must have one row per cluster");

  // Relabel strata present in the subset to consecutive indices.
  std::map<int, int> slot;
  for (int i : clusters) slot.emplace(strata[i], 0);
  int nstr = 0;
  for (auto& [kappa, s] : slot) s = nstr++;

  const int t = layout.n_periods;
  const int cdim = nstr + q;          // stratum indicators + covariates
  const int zdim = cdim * t;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(zdim, zdim);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(zdim, basis.dim);
  auto h_coeffs = [&](int i) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cdim);
    h[slot.at(strata[i])] = 1.0;
    for (int c = 0; c < q; ++c) h[nstr + c] = augment(i, c);
    return h;
  };
  for (int i : clusters) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(layout.cluster_obs(i), t);
    int pos = 0;
    for (int j = 0; j < t; ++j) {
      int nij = layout.cluster_sizes(i, j);
      p.col(j).segment(pos, nij).setOnes();
      pos += nij;
    }
    Eigen::VectorXd h = h_coeffs(i);
    Eigen::MatrixXd z(layout.cluster_obs(i), zdim);
    for (int c = 0; c < cdim; ++c) z.middleCols(c * t, t) = h[c] * p;
    ClusterPrecision prec(corr, layout, i);
    Eigen::MatrixXd wz = prec.apply(z);
    Eigen::MatrixXd g = expand_rows(
        period_rows(basis, layout, layout.observed_crossover[i],
                    h_for(modifier_h, i)),
        layout, i);
    a.noalias() += wz.transpose() * z;
    b.noalias() += wz.transpose() * g;
  }
  // Minimum-norm solve tolerates a covariate collinear with the strata.
  Eigen::MatrixXd coef = a.completeOrthogonalDecomposition().solve(b);
  for (int i : clusters) {
    Eigen::VectorXd h = h_coeffs(i);
    Eigen::MatrixXd center = Eigen::MatrixXd::Zero(t, basis.dim);
    for (int c = 0; c < cdim; ++c)
      center.noalias() += h[c] * coef.middleRows(c * t, t);
    out[i] = center;
  }
  return out;
}

CenteredDesign center_stratified(const TreatmentBasis& basis, const TrialLayout& layout,
                                 const WorkingCorrelation& corr,
                                 const std::vector<int>& strata,
                                 const Eigen::MatrixXd& augment,
                                 const std::vector<Eigen::VectorXd>& modifier_h) {
  if (!layout.has_observed())
    throw config_error("stratified centering requires observed crossovers");
  if (static_cast<int>(strata.size()) != layout.n_clusters)
    throw config_error("strata must have one label per cluster");

  CenteredDesign out;
  out.mode = CenteredDesign::Mode::stratified;
  out.strata = strata;
  out.center.resize(layout.n_clusters);

  std::map<int, std::vector<int>> members;
  for (int i = 0; i < layout.n_clusters; ++i) members[strata[i]].push_back(i);
  if (augment.cols() == 0) {
    for (const auto& [kappa, idx] : members) {
      if (idx.size() == 1)
        out.notes.push_back("stratum " + std::to_string(kappa) +
                            " has a single cluster; it contributes zero");
      else {
        bool all_same = true;
        for (int i : idx)
          all_same &= layout.observed_crossover[i] == layout.observed_crossover[idx[0]];
        if (all_same)
          out.notes.push_back("stratum " + std::to_string(kappa) +
                              " has a single sequence; it contributes zero");
      }
    }
  }

  std::vector<int> all(layout.n_clusters);
  for (int i = 0; i < layout.n_clusters; ++i) all[i] = i;
  std::map<int, Eigen::MatrixXd> centers =
      stratified_centers(basis, layout, corr, all, strata, augment, modifier_h);
  for (int i = 0; i < layout.n_clusters; ++i) out.center[i] = centers[i];

  out.observed.resize(layout.n_clusters);
  for (int i = 0; i < layout.n_clusters; ++i)
    out.observed[i] = out.at(basis, layout, i, layout.observed_crossover[i],
                             h_for(modifier_h, i));
  return out;
}

std::vector<Eigen::VectorXd> sweep_centering_span(
    const std::vector<Eigen::VectorXd>& resid, const TrialLayout& layout,
    const std::vector<int>& strata, const Eigen::MatrixXd& augment) {
  const int n = layout.n_clusters;
  const int t = layout.n_periods;
  if (static_cast<int>(strata.size()) != n) return resid;

  std::map<int, int> slot;
  for (int label : strata) slot.emplace(label, 0);
  int ns = 0;
  for (auto& kv : slot) kv.second = ns++;
  const int q = static_cast<int>(augment.cols());
  const int cdim = ns + q;
  const int p = cdim * t;

  auto basis_row = [&](int i, Eigen::VectorXd& h) {
    h.setZero(cdim);
    h[slot.at(strata[i])] = 1.0;
    for (int c = 0; c < q; ++c) h[ns + c] = augment(i, c);
  };

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd h(cdim);
  for (int i = 0; i < n; ++i) {
    basis_row(i, h);
    int pos = 0;
    for (int j = 0; j < t; ++j) {
      int nij = layout.cluster_sizes(i, j);
      double sum = resid[i].segment(pos, nij).sum();
      for (int c = 0; c < cdim; ++c) {
        b[c * t + j] += h[c] * sum;
        for (int cc = 0; cc < cdim; ++cc)
          a(c * t + j, cc * t + j) += h[c] * h[cc] * nij;
      }
      pos += nij;
    }
  }
  Eigen::VectorXd coef = a.completeOrthogonalDecomposition().solve(b);

  std::vector<Eigen::VectorXd> out = resid;
  for (int i = 0; i < n; ++i) {
    basis_row(i, h);
    int pos = 0;
    for (int j = 0; j < t; ++j) {
      int nij = layout.cluster_sizes(i, j);
      double fitted = 0;
      for (int c = 0; c < cdim; ++c) fitted += h[c] * coef[c * t + j];
      out[i].segment(pos, nij).array() -= fitted;
      pos += nij;
    }
  }
  return out;
}

} // namespace swd
