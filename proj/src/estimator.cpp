#include "swd/estimator.hpp"

#include <map>
#include <numeric>

#include "swd/errors.hpp"

namespace swd {

namespace {

// Per-cluster modifier encoding vectors h_i = (1, enc(s_1), ...). Centered
// encodings subtract the cross-cluster mean; raw and strata-dummy columns
// pass through.
std::vector<Eigen::VectorXd> modifier_encodings(const TreatmentBasis& basis,
                                                const TrialData& data,
                                                const TrialLayout& layout) {
  if (basis.modifiers.empty()) return {};
  const int M = static_cast<int>(basis.modifiers.size());
  std::vector<std::vector<double>> cols(M);
  for (int m = 0; m < M; ++m) {
    cols[m] = data.cluster_covariate(layout, basis.modifiers[m].name);
    if (basis.modifiers[m].encoding == ModifierEncoding::centered) {
      double mean = std::accumulate(cols[m].begin(), cols[m].end(), 0.0) /
                    static_cast<double>(layout.n_clusters);
      for (double& v : cols[m]) v -= mean;
    }
  }
  std::vector<Eigen::VectorXd> h(layout.n_clusters);
  for (int i = 0; i < layout.n_clusters; ++i) {
    h[i].resize(1 + M);
    h[i][0] = 1.0;
    for (int m = 0; m < M; ++m) h[i][1 + m] = cols[m][i];
  }
  return h;
}

struct ClusterBlocks {
  Eigen::MatrixXd g;   // design at observed crossover
  Eigen::MatrixXd wg;  // W~ g
  Eigen::MatrixXd m;   // mean regressors
  Eigen::MatrixXd wm;
  Eigen::VectorXd wy;
};

void check_bread(const Eigen::MatrixXd& bread, const std::vector<std::string>& labels,
                 double threshold) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(bread, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() > 0 ? sv[0] : 0.0;
  double smin = sv.size() > 0 ? sv[sv.size() - 1] : 0.0;
  if (smax <= 0 || smin <= 0 || smax / smin > threshold) {
    Eigen::VectorXd null_dir = svd.matrixV().col(sv.size() - 1);
    std::string cols;
    for (int c = 0; c < null_dir.size(); ++c)
      if (std::abs(null_dir[c]) > 0.3)
        cols += (cols.empty() ? "" : ", ") + labels[c];
    throw numeric_error(
        "estimating equations are singular; non-identified effect column(s): " +
        (cols.empty() ? std::string("(unknown)") : cols));
  }
}

// Joint solve of the delta block (centered score) and, when gamma is free,
// the working-mean normal equations. centered_l supplies L~_i per cluster.
struct SolveOut {
  Eigen::VectorXd delta, gamma;
  Eigen::MatrixXd bread;
};

SolveOut solve_system(const std::vector<int>& clusters,
                      const std::vector<ClusterBlocks>& blocks,
                      const std::vector<Eigen::MatrixXd>& centered_l,
                      int d, int p, bool gamma_free, const Eigen::VectorXd& gamma_fixed,
                      const std::vector<std::string>& labels, double cond_threshold) {
  Eigen::MatrixXd ltwg = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd ltwm = Eigen::MatrixXd::Zero(d, p);
  Eigen::MatrixXd mtwg = Eigen::MatrixXd::Zero(p, d);
  Eigen::MatrixXd mtwm = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd ltwy = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd mtwy = Eigen::VectorXd::Zero(p);

  for (int i : clusters) {
    const ClusterBlocks& b = blocks[i];
    const Eigen::MatrixXd& l = centered_l[i];
    ltwg.noalias() += l.transpose() * b.wg;
    ltwy.noalias() += l.transpose() * b.wy;
    if (p > 0) {
      ltwm.noalias() += l.transpose() * b.wm;
      if (gamma_free) {
        mtwg.noalias() += b.m.transpose() * b.wg;
        mtwm.noalias() += b.m.transpose() * b.wm;
        mtwy.noalias() += b.m.transpose() * b.wy;
      }
    }
  }

  SolveOut out;
  out.bread = ltwg;
  check_bread(ltwg, labels, cond_threshold);

  if (!gamma_free || p == 0) {
    Eigen::VectorXd rhs = ltwy;
    if (p > 0) rhs -= ltwm * gamma_fixed;
    out.delta = ltwg.fullPivLu().solve(rhs);
    out.gamma = gamma_fixed;
    return out;
  }

  Eigen::MatrixXd a(d + p, d + p);
  a.topLeftCorner(d, d) = ltwg;
  a.topRightCorner(d, p) = ltwm;
  a.bottomLeftCorner(p, d) = mtwg;
  a.bottomRightCorner(p, p) = mtwm;
  Eigen::VectorXd rhs(d + p);
  rhs.head(d) = ltwy;
  rhs.tail(p) = mtwy;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-10);
  if (lu.rank() < d + p)
    throw numeric_error("joint effect/working-mean system is rank deficient");
  Eigen::VectorXd sol = lu.solve(rhs);
  out.delta = sol.head(d);
  out.gamma = sol.tail(p);
  return out;
}

// Centered designs for a subset of clusters under a given distribution
// (marginal mode) or with recomputed stratum averages (stratified mode).
std::vector<Eigen::MatrixXd> centered_for_subset(
    const TreatmentBasis& basis, const TrialLayout& layout,
    const WorkingCorrelation& corr, const CenteringSpec& spec,
    const std::vector<int>& clusters, const AssignmentDistribution& dist,
    const std::vector<Eigen::VectorXd>& modifier_h, bool comparator,
    const std::vector<ClusterBlocks>& blocks) {
  std::vector<Eigen::MatrixXd> out(layout.n_clusters);
  if (comparator) {
    for (int i : clusters) out[i] = blocks[i].g;
    return out;
  }
  auto h_of = [&](int i) {
    return modifier_h.empty() ? Eigen::VectorXd() : modifier_h[i];
  };
  if (spec.mode == CenteredDesign::Mode::marginal) {
    for (int i : clusters) {
      Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(layout.n_periods, basis.dim);
      for (int s = 0; s < layout.n_sequences(); ++s)
        if (dist.marginal[s] > 0)
          mean.noalias() +=
              dist.marginal[s] * period_rows(basis, layout, layout.sequences[s], h_of(i));
      Eigen::MatrixXd rows =
          period_rows(basis, layout, layout.observed_crossover[i], h_of(i)) - mean;
      Eigen::MatrixXd expanded(layout.cluster_obs(i), basis.dim);
      int pos = 0;
      for (int j = 0; j < layout.n_periods; ++j) {
        int n = layout.cluster_sizes(i, j);
        expanded.middleRows(pos, n) = rows.row(j).replicate(n, 1);
        pos += n;
      }
      out[i] = expanded;
    }
    return out;
  }
  // stratified: weighted empirical stratum centers over the subset
  std::map<int, Eigen::MatrixXd> centers = stratified_centers(
      basis, layout, corr, clusters, spec.strata, spec.augment, modifier_h);
  for (int i : clusters) {
    Eigen::MatrixXd rows =
        period_rows(basis, layout, layout.observed_crossover[i], h_of(i)) -
        centers[i];
    Eigen::MatrixXd expanded(layout.cluster_obs(i), basis.dim);
    int pos = 0;
    for (int j = 0; j < layout.n_periods; ++j) {
      int n = layout.cluster_sizes(i, j);
      expanded.middleRows(pos, n) = rows.row(j).replicate(n, 1);
      pos += n;
    }
    out[i] = expanded;
  }
  return out;
}

ModelFit estimate_impl(const TrialData& data, const TrialLayout& layout,
                       const TreatmentBasis& basis, const WorkingMeanSpec& mean_spec,
                       const WorkingCorrelation& corr, const CenteringSpec& centering,
                       const EstimatorOptions& opts, bool comparator) {
  if (!layout.has_observed())
    throw config_error("estimation requires observed crossovers in the layout");
  if (static_cast<int>(data.outcomes.size()) != layout.n_clusters)
    throw data_error("data has " + std::to_string(data.outcomes.size()) +
                     " clusters, layout expects " + std::to_string(layout.n_clusters));
  if (layout.n_periods < 2)
    throw config_error("estimation needs at least 2 periods to separate treatment from time");

  ModelFit fit;
  fit.layout = layout;
  fit.basis = basis;
  fit.corr = corr;
  fit.centering_spec = centering;
  fit.data = data;
  fit.comparator = comparator;
  fit.modifier_h = modifier_encodings(basis, data, layout);
  fit.res.labels = basis.labels;

  const int d = basis.dim;
  AssignmentDistribution dist = assignment_distribution(layout);

  if (!comparator) {
    if (centering.mode == CenteredDesign::Mode::marginal)
      fit.centered = center_marginal(basis, layout, dist, corr, fit.modifier_h);
    else
      fit.centered = center_stratified(basis, layout, corr, centering.strata,
                                       centering.augment, fit.modifier_h);
    for (const auto& n : fit.centered.notes) fit.res.diagnostics.push_back(n);
  }
  if (corr.truncated)
    fit.res.diagnostics.push_back("variance component estimate truncated at zero");

  WorkingMeanModel mean_model;
  mean_model.spec = mean_spec;
  mean_model.regressor_names = mean_regressor_names(mean_spec, layout);
  if (mean_spec.fixed_coefficients) {
    mean_model.coefficients = *mean_spec.fixed_coefficients;
    if (mean_model.coefficients.size() !=
        static_cast<int>(mean_model.regressor_names.size()))
      throw config_error("fixed mean coefficients have wrong length");
  }
  const int p = static_cast<int>(mean_model.regressor_names.size());
  const bool gamma_free = !mean_spec.fixed_coefficients.has_value() &&
                          mean_spec.kind != WorkingMeanSpec::Kind::zero;

  std::vector<ClusterBlocks> blocks(layout.n_clusters);
  std::vector<int> all(layout.n_clusters);
  for (int i = 0; i < layout.n_clusters; ++i) {
    all[i] = i;
    ClusterBlocks& b = blocks[i];
    b.g = cluster_design(basis, layout, i, layout.observed_crossover[i], fit.modifier(i));
    if (data.outcomes[i].size() != layout.cluster_obs(i))
      throw data_error("outcome vector for cluster " + layout.cluster_ids[i] +
                       " has wrong length");
    ClusterPrecision prec(corr, layout, i);
    b.wg = prec.apply(b.g);
    b.m = mean_model.regressors(layout, i, data);
    if (p > 0) b.wm = prec.apply(b.m);
    b.wy = prec.apply(data.outcomes[i]);
  }

  std::vector<Eigen::MatrixXd> l_full =
      centered_for_subset(basis, layout, corr, centering, all, dist, fit.modifier_h,
                          comparator, blocks);

  Eigen::VectorXd gamma_fixed =
      mean_spec.fixed_coefficients ? *mean_spec.fixed_coefficients
                                   : Eigen::VectorXd::Zero(p);
  SolveOut sol = solve_system(all, blocks, l_full, d, p, gamma_free, gamma_fixed,
                              basis.labels, opts.cond_threshold);

  fit.res.delta = sol.delta;
  fit.res.gamma = sol.gamma;
  fit.res.bread = sol.bread;
  mean_model.coefficients = sol.gamma;
  fit.mean = mean_model;
  if (!comparator) {
    // keep observed L~ in sync with what the solve used
    fit.centered.observed = std::vector<Eigen::MatrixXd>(l_full.begin(), l_full.end());
  }

  fit.res.residuals.resize(layout.n_clusters);
  for (int i = 0; i < layout.n_clusters; ++i) {
    Eigen::VectorXd m = p > 0 ? Eigen::VectorXd(blocks[i].m * sol.gamma)
                              : Eigen::VectorXd(Eigen::VectorXd::Zero(blocks[i].g.rows()));
    fit.res.residuals[i] = data.outcomes[i] - blocks[i].g * sol.delta - m;
  }

  if (opts.compute_loo && layout.n_clusters > 2) {
    fit.res.loo_deltas.resize(layout.n_clusters);
    for (int i = 0; i < layout.n_clusters; ++i) {
      std::vector<int> keep;
      for (int j = 0; j < layout.n_clusters; ++j)
        if (j != i) keep.push_back(j);
      AssignmentDistribution dist_i =
          (!comparator && opts.loo_reduced_distribution &&
           centering.mode == CenteredDesign::Mode::marginal)
              ? leave_one_out_distribution(layout, i)
              : dist;
      std::vector<Eigen::MatrixXd> l_i =
          (!comparator && opts.loo_reduced_distribution)
              ? centered_for_subset(basis, layout, corr, centering, keep, dist_i,
                                    fit.modifier_h, comparator, blocks)
              : l_full;
      SolveOut sol_i =
          solve_system(keep, blocks, l_i, d, p, gamma_free && opts.loo_refit_mean,
                       sol.gamma, basis.labels, opts.cond_threshold);
      fit.res.loo_deltas[i] = sol_i.delta;
    }
  }

  return fit;
}

} // namespace

ModelFit estimate(const TrialData& data, const TrialLayout& layout,
                  const TreatmentBasis& basis, const WorkingMeanSpec& mean_spec,
                  const WorkingCorrelation& corr, const CenteringSpec& centering,
                  const EstimatorOptions& opts) {
  return estimate_impl(data, layout, basis, mean_spec, corr, centering, opts, false);
}

ModelFit estimate_gee_comparator(const TrialData& data, const TrialLayout& layout,
                                 const TreatmentBasis& basis,
                                 const WorkingMeanSpec& mean_spec,
                                 const WorkingCorrelation& corr,
                                 const EstimatorOptions& opts) {
  return estimate_impl(data, layout, basis, mean_spec, corr, CenteringSpec{}, opts, true);
}

double estimate_post_stratified(const std::vector<double>& cluster_means,
                                const std::vector<int>& treated,
                                const std::vector<int>& strata,
                                std::vector<std::string>* notes) {
  const size_t n = cluster_means.size();
  if (treated.size() != n || strata.size() != n)
    throw config_error("post-stratification inputs must have equal lengths");

  std::map<int, std::vector<size_t>> members;
  for (size_t i = 0; i < n; ++i) members[strata[i]].push_back(i);

  double total_weight = 0.0, acc = 0.0;
  for (const auto& [kappa, idx] : members) {
    double w1 = 0, w0 = 0, s1 = 0, s0 = 0;
    for (size_t i : idx) {
      if (treated[i]) {
        w1 += 1;
        s1 += cluster_means[i];
      } else {
        w0 += 1;
        s0 += cluster_means[i];
      }
    }
    if (w1 == 0 || w0 == 0) {
      if (notes)
        notes->push_back("stratum " + std::to_string(kappa) +
                         " lacks a treated or control cluster; dropped");
      continue;
    }
    double nk = static_cast<double>(idx.size());
    total_weight += nk;
    acc += nk * (s1 / w1 - s0 / w0);
  }
  if (total_weight == 0)
    throw numeric_error("all strata are degenerate; post-stratified estimate undefined");
  return acc / total_weight;
}

Eigen::VectorXd theorem3_weights(const std::vector<int>& strata_counts,
                                 const std::vector<int>& treated_counts) {
  if (strata_counts.size() != treated_counts.size())
    throw config_error("strata_counts and treated_counts must have equal lengths");
  const int k = static_cast<int>(strata_counts.size());
  Eigen::VectorXd w(k);
  for (int s = 0; s < k; ++s) {
    double nk = strata_counts[s];
    double w1 = treated_counts[s];
    double w0 = nk - w1;
    if (w1 < 0 || w0 < 0) throw config_error("treated count exceeds stratum count");
    w[s] = nk > 0 ? nk * (w1 / nk) * (w0 / nk) : 0.0;
  }
  double total = w.sum();
  if (total <= 0) throw numeric_error("all Theorem-3 stratum weights are zero");
  return w / total;
}

} // namespace swd
