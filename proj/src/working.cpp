#include "swd/working.hpp"

#include <cmath>

#include "swd/errors.hpp"

namespace swd {

namespace {

// Covariate columns shared by every mean-model kind.
void append_covariates(const WorkingMeanSpec& spec, const TrialData& data,
                       const TrialLayout& layout, int cluster,
                       Eigen::MatrixXd& m, int col0) {
  for (size_t c = 0; c < spec.covariates.size(); ++c) {
    int idx = data.covariate_index(spec.covariates[c]);
    if (idx < 0)
      throw data_error("mean-model covariate column not found: " + spec.covariates[c]);
    m.col(col0 + static_cast<int>(c)) = data.covariates[cluster].col(idx);
  }
}

} // namespace

Eigen::MatrixXd WorkingMeanModel::regressors(const TrialLayout& layout, int cluster,
                                             const TrialData& data) const {
  const int n = layout.cluster_obs(cluster);
  const int ncov = static_cast<int>(spec.covariates.size());
  switch (spec.kind) {
    case WorkingMeanSpec::Kind::zero:
      return Eigen::MatrixXd(n, 0);
    case WorkingMeanSpec::Kind::linear_time: {
      Eigen::MatrixXd m(n, 2 + ncov);
      int pos = 0;
      for (int j = 0; j < layout.n_periods; ++j) {
        int nij = layout.cluster_sizes(cluster, j);
        m.block(pos, 0, nij, 1).setOnes();
        m.block(pos, 1, nij, 1).setConstant(j + 1);
        pos += nij;
      }
      append_covariates(spec, data, layout, cluster, m, 2);
      return m;
    }
    case WorkingMeanSpec::Kind::categorical_time: {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, layout.n_periods + ncov);
      int pos = 0;
      for (int j = 0; j < layout.n_periods; ++j) {
        int nij = layout.cluster_sizes(cluster, j);
        m.block(pos, j, nij, 1).setOnes();
        pos += nij;
      }
      append_covariates(spec, data, layout, cluster, m, layout.n_periods);
      return m;
    }
    case WorkingMeanSpec::Kind::custom_regression: {
      const int ncust = static_cast<int>(spec.custom_columns.size());
      Eigen::MatrixXd m(n, 1 + ncust + ncov);
      m.col(0).setOnes();
      for (int c = 0; c < ncust; ++c) {
        int idx = data.covariate_index(spec.custom_columns[c]);
        if (idx < 0)
          throw data_error("custom regressor column not found: " + spec.custom_columns[c]);
        m.col(1 + c) = data.covariates[cluster].col(idx);
      }
      append_covariates(spec, data, layout, cluster, m, 1 + ncust);
      return m;
    }
  }
  throw config_error("unknown working mean kind");
}

Eigen::VectorXd WorkingMeanModel::values(const TrialLayout& layout, int cluster,
                                         const TrialData& data) const {
  const int n = layout.cluster_obs(cluster);
  if (spec.kind == WorkingMeanSpec::Kind::zero) return Eigen::VectorXd::Zero(n);
  return regressors(layout, cluster, data) * coefficients;
}

std::vector<std::string> mean_regressor_names(const WorkingMeanSpec& spec,
                                              const TrialLayout& layout) {
  std::vector<std::string> names;
  switch (spec.kind) {
    case WorkingMeanSpec::Kind::zero:
      break;
    case WorkingMeanSpec::Kind::linear_time:
      names = {"intercept", "time"};
      break;
    case WorkingMeanSpec::Kind::categorical_time:
      for (int j = 1; j <= layout.n_periods; ++j)
        names.push_back("period_" + std::to_string(j));
      break;
    case WorkingMeanSpec::Kind::custom_regression:
      names.push_back("intercept");
      for (const auto& c : spec.custom_columns) names.push_back(c);
      break;
  }
  for (const auto& c : spec.covariates) names.push_back(c);
  return names;
}

WorkingMeanModel fit_working_mean(const WorkingMeanSpec& spec, const TrialData& data,
                                  const TrialLayout& layout, const TreatmentBasis& basis,
                                  const Eigen::VectorXd& pilot_delta,
                                  const std::vector<Eigen::VectorXd>& modifier_h) {
  WorkingMeanModel model;
  model.spec = spec;
  model.regressor_names = mean_regressor_names(spec, layout);
  if (spec.kind == WorkingMeanSpec::Kind::zero) return model;

  if (spec.fixed_coefficients) {
    model.coefficients = *spec.fixed_coefficients;
    if (model.coefficients.size() != static_cast<int>(model.regressor_names.size()))
      throw config_error("fixed mean coefficients have wrong length");
    return model;
  }

  const int p = static_cast<int>(model.regressor_names.size());
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < layout.n_clusters; ++i) {
    if (!layout.has_observed())
      throw config_error("fit_working_mean requires observed crossovers");
    Eigen::VectorXd h = modifier_h.empty() ? Eigen::VectorXd() : modifier_h[i];
    Eigen::MatrixXd g = cluster_design(basis, layout, i, layout.observed_crossover[i], h);
    Eigen::VectorXd y = data.outcomes[i] - g * pilot_delta;
    Eigen::MatrixXd m = model.regressors(layout, i, data);
    xtx.noalias() += m.transpose() * m;
    xty.noalias() += m.transpose() * y;
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(xtx);
  lu.setThreshold(1e-10);
  if (lu.rank() < p) {
    // Name one regressor in the null space for the error message.
    Eigen::MatrixXd kernel = lu.kernel();
    int worst = 0;
    kernel.col(0).cwiseAbs().maxCoeff(&worst);
    throw numeric_error("working mean model is rank deficient; regressor '" +
                        model.regressor_names[worst] + "' is not identified");
  }
  model.coefficients = lu.solve(xty);
  return model;
}

// ---------------------------------------------------------------------------
// Variance components by method of moments

WorkingCorrelation fit_working_correlation(WorkingCorrelation::Kind kind,
                                           const std::vector<Eigen::VectorXd>& residuals,
                                           const TrialLayout& layout) {
  using Kind = WorkingCorrelation::Kind;
  WorkingCorrelation corr;
  corr.kind = kind;

  const int T = layout.n_periods;
  double sum_sq = 0.0, n_obs = 0.0, sum_time_sq = 0.0;  // sum_time_sq = sum over obs of j^2
  // Distinct-pair cross products aggregated through period sums:
  //   sum over pairs in periods (j, j') of r_a r_b = S_j S_j' - [j==j'] Q_j
  double cross_period_prod = 0.0, cross_period_cnt = 0.0;
  double same_period_prod = 0.0, same_period_cnt = 0.0;
  // Pooled within cluster-period variance: unbiased for the individual-level
  // noise under any cluster-level structure.
  double within_ss = 0.0, within_df = 0.0;
  // Weighted regression of pair products on (1, j*j') for intercept+slope.
  double a11 = 0.0, a12 = 0.0, a22 = 0.0, b1 = 0.0, b2 = 0.0;

  for (int i = 0; i < layout.n_clusters; ++i) {
    const Eigen::VectorXd& r = residuals[i];
    if (r.size() != layout.cluster_obs(i))
      throw config_error("residual vector length mismatch for cluster " +
                         layout.cluster_ids[i]);
    sum_sq += r.squaredNorm();
    n_obs += r.size();
    Eigen::VectorXd s(T), q(T);
    int pos = 0;
    for (int j = 0; j < T; ++j) {
      int nij = layout.cluster_sizes(i, j);
      s[j] = r.segment(pos, nij).sum();
      q[j] = r.segment(pos, nij).squaredNorm();
      sum_time_sq += double(nij) * double(j + 1) * double(j + 1);
      if (nij > 1) {
        within_ss += q[j] - s[j] * s[j] / nij;
        within_df += nij - 1;
      }
      pos += nij;
    }
    for (int j = 0; j < T; ++j) {
      for (int jp = 0; jp < T; ++jp) {
        double nij = layout.cluster_sizes(i, j);
        double nijp = layout.cluster_sizes(i, jp);
        double prod = s[j] * s[jp];
        double cnt = nij * nijp;
        if (j == jp) {
          prod -= q[j];
          cnt -= nij;
          same_period_prod += prod;
          same_period_cnt += cnt;
        } else {
          cross_period_prod += prod;
          cross_period_cnt += cnt;
        }
        double x = double(j + 1) * double(jp + 1);
        a11 += cnt;
        a12 += cnt * x;
        a22 += cnt * x * x;
        b1 += prod;
        b2 += prod * x;
      }
    }
  }

  double total = n_obs > 0 ? sum_sq / n_obs : 0.0;
  auto clip = [&corr](double v) {
    if (v < 0) {
      corr.truncated = true;
      return 0.0;
    }
    return v;
  };
  // The pooled within cluster-period variance isolates the individual-level
  // noise no matter how badly the cluster-level structure is misspecified, so
  // it is the preferred route to sigma2_resid whenever some cell has
  // replication; the fitted-component fallback covers singleton cells.
  auto resid_from = [&](double fitted_cell_level) {
    if (within_df > 0) return clip(within_ss / within_df);
    return clip(fitted_cell_level);
  };

  switch (kind) {
    case Kind::independence:
      corr.sigma2_resid = total;
      break;
    case Kind::exchangeable: {
      double pairs = cross_period_cnt + same_period_cnt;
      double c = pairs > 0 ? (cross_period_prod + same_period_prod) / pairs : 0.0;
      corr.sigma2_cluster = clip(c);
      corr.sigma2_resid = resid_from(total - corr.sigma2_cluster);
      break;
    }
    case Kind::nested_time: {
      if (same_period_cnt <= 0)
        throw data_error("cluster-time correlation needs some cluster-period with >= 2 observations");
      double c = cross_period_cnt > 0 ? cross_period_prod / cross_period_cnt : 0.0;
      corr.sigma2_cluster = clip(c);
      corr.sigma2_time = clip(same_period_prod / same_period_cnt - corr.sigma2_cluster);
      corr.sigma2_resid = resid_from(0.0);
      break;
    }
    case Kind::intercept_slope: {
      double det = a11 * a22 - a12 * a12;
      if (std::abs(det) < 1e-12)
        throw data_error("cannot identify intercept and slope components from residual pairs");
      double c = (a22 * b1 - a12 * b2) / det;
      double eta = (a11 * b2 - a12 * b1) / det;
      corr.sigma2_cluster = clip(c);
      corr.sigma2_time = clip(eta);
      // var(r_jk) = s2_cluster + s2_slope * j^2 + s2_resid
      corr.sigma2_resid = resid_from(
          (sum_sq - corr.sigma2_cluster * n_obs - corr.sigma2_time * sum_time_sq) /
          (n_obs > 0 ? n_obs : 1));
      break;
    }
  }
  if (corr.sigma2_resid < 1e-10) corr.sigma2_resid = 1e-10;
  return corr;
}

// ---------------------------------------------------------------------------
// ClusterPrecision

ClusterPrecision::ClusterPrecision(const WorkingCorrelation& corr,
                                   const TrialLayout& layout, int cluster) {
  if (corr.sigma2_resid <= 0 || corr.sigma2_cluster < 0 || corr.sigma2_time < 0)
    throw numeric_error("working covariance parameters are not positive definite");
  n_ = layout.cluster_obs(cluster);

  using Kind = WorkingCorrelation::Kind;
  base_ = Eigen::VectorXd::Constant(n_, corr.sigma2_resid);
  if (corr.kind != Kind::independence) {
    // Cell-balanced residual diagonal: sigma2_resid * cbar * n_ij, with cbar
    // the layout-wide mean of 1/n_ij (see header). Equal sizes give cbar*n=1.
    double cbar = 0.0;
    int cells = 0;
    for (int i = 0; i < layout.n_clusters; ++i)
      for (int j = 0; j < layout.n_periods; ++j)
        if (layout.cluster_sizes(i, j) > 0) {
          cbar += 1.0 / layout.cluster_sizes(i, j);
          ++cells;
        }
    if (cells > 0) cbar /= cells;
    int pos = 0;
    for (int j = 0; j < layout.n_periods; ++j) {
      int nij = layout.cluster_sizes(cluster, j);
      base_.segment(pos, nij).setConstant(corr.sigma2_resid * cbar * nij);
      pos += nij;
    }
  }

  int k = 0;
  switch (corr.kind) {
    case Kind::independence:
      break;
    case Kind::exchangeable:
      if (corr.sigma2_cluster > 0) k = 1;
      break;
    case Kind::intercept_slope:
      k = (corr.sigma2_cluster > 0 ? 1 : 0) + (corr.sigma2_time > 0 ? 1 : 0);
      break;
    case Kind::nested_time:
      k = (corr.sigma2_cluster > 0 ? 1 : 0) +
          (corr.sigma2_time > 0 ? layout.n_periods : 0);
      break;
  }

  u_.resize(n_, k);
  d_ = Eigen::MatrixXd::Zero(k, k);
  int col = 0;
  if (k > 0 && corr.sigma2_cluster > 0) {
    u_.col(col).setOnes();
    d_(col, col) = corr.sigma2_cluster;
    ++col;
  }
  if (corr.kind == Kind::intercept_slope && corr.sigma2_time > 0) {
    int pos = 0;
    for (int j = 0; j < layout.n_periods; ++j) {
      int nij = layout.cluster_sizes(cluster, j);
      u_.col(col).segment(pos, nij).setConstant(j + 1);
      pos += nij;
    }
    d_(col, col) = corr.sigma2_time;
    ++col;
  } else if (corr.kind == Kind::nested_time && corr.sigma2_time > 0) {
    u_.middleCols(col, layout.n_periods).setZero();
    int pos = 0;
    for (int j = 0; j < layout.n_periods; ++j) {
      int nij = layout.cluster_sizes(cluster, j);
      u_.col(col + j).segment(pos, nij).setOnes();
      d_(col + j, col + j) = corr.sigma2_time;
      pos += nij;
    }
    col += layout.n_periods;
  }

  if (k > 0) {
    Eigen::MatrixXd cap =
        d_.inverse() + u_.transpose() * base_.cwiseInverse().asDiagonal() * u_;
    cap_.compute(cap);
    if (cap_.info() != Eigen::Success)
      throw numeric_error("working covariance capacitance matrix is not positive definite");
  }
}

Eigen::MatrixXd ClusterPrecision::apply(const Eigen::MatrixXd& m) const {
  if (m.rows() != n_) throw config_error("ClusterPrecision::apply dimension mismatch");
  Eigen::MatrixXd bm = base_.cwiseInverse().asDiagonal() * m;
  if (u_.cols() == 0) return bm;
  Eigen::MatrixXd ut_m = u_.transpose() * bm;  // k x c
  return bm - base_.cwiseInverse().asDiagonal() * (u_ * cap_.solve(ut_m));
}

Eigen::MatrixXd ClusterPrecision::dense() const {
  return apply(Eigen::MatrixXd::Identity(n_, n_));
}

Eigen::MatrixXd ClusterPrecision::covariance() const {
  Eigen::MatrixXd v = Eigen::MatrixXd(base_.asDiagonal());
  if (u_.cols() > 0) v.noalias() += u_ * d_ * u_.transpose();
  return v;
}

Eigen::MatrixXd inverse_correlation_blocks(const WorkingCorrelation& corr,
                                           const TrialLayout& layout, int cluster) {
  return ClusterPrecision(corr, layout, cluster).dense();
}

} // namespace swd
