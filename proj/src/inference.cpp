#include "swd/inference.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <map>
#include <set>

#include "swd/errors.hpp"

namespace swd {

namespace {

// Score contributions a_{i,s} = L~_i(r_s)' W~_i Y~_{0i} for every cluster and
// hypothetical sequence, with residuals held at the observed outcomes.
std::vector<std::vector<Eigen::VectorXd>> score_contributions(
    const ModelFit& fit, VarianceEstimate::Mode mode) {
  const TrialLayout& layout = fit.layout;
  const int S = layout.n_sequences();

  std::vector<Eigen::VectorXd> resids(layout.n_clusters);
  for (int i = 0; i < layout.n_clusters; ++i) {
    if (mode == VarianceEstimate::Mode::plugin) {
      resids[i] = fit.res.residuals[i];
    } else {
      if (fit.res.loo_deltas.empty())
        throw config_error("leave-one-out variance requires loo_deltas");
      Eigen::MatrixXd g = cluster_design(fit.basis, layout, i,
                                         layout.observed_crossover[i], fit.modifier(i));
      Eigen::VectorXd m = fit.mean.spec.kind == WorkingMeanSpec::Kind::zero
                              ? Eigen::VectorXd::Zero(g.rows())
                              : Eigen::VectorXd(fit.mean.values(layout, i, fit.data));
      resids[i] = fit.data.outcomes[i] - g * fit.res.loo_deltas[i] - m;
    }
  }
  // The stratified centering re-estimates its conditional expectation at every
  // assignment, so residual components in its span never reach the estimating
  // equation; keeping them here would count phantom variability.
  if (fit.centered.mode == CenteredDesign::Mode::stratified)
    resids = sweep_centering_span(resids, layout, fit.centering_spec.strata,
                                  fit.centering_spec.augment);

  std::vector<std::vector<Eigen::VectorXd>> a(layout.n_clusters);
  for (int i = 0; i < layout.n_clusters; ++i) {
    ClusterPrecision prec(fit.corr, layout, i);
    Eigen::VectorXd u = prec.apply(resids[i]);
    a[i].resize(S);
    for (int s = 0; s < S; ++s) {
      Eigen::MatrixXd l =
          fit.centered.at(fit.basis, layout, i, layout.sequences[s], fit.modifier(i));
      a[i][s] = l.transpose() * u;
    }
  }
  return a;
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& bread_inv, const Eigen::MatrixXd& meat) {
  Eigen::MatrixXd v = bread_inv * meat * bread_inv.transpose();
  return 0.5 * (v + v.transpose());
}

void finish_se(VarianceEstimate& out) {
  const int d = static_cast<int>(out.v.rows());
  out.se.resize(d);
  out.diag_only.assign(d, false);
  for (int k = 0; k < d; ++k) {
    double vkk = out.v(k, k);
    if (vkk > 0) {
      out.se[k] = std::sqrt(vkk);
    } else {
      out.diag_only[k] = true;
      double dk = out.diag_term(k, k);
      out.se[k] = dk > 0 ? std::sqrt(dk) : 0.0;
      out.notes.push_back("cross term drove variance component " + std::to_string(k) +
                          " negative; reporting the conservative diagonal-only SE");
    }
  }
}

} // namespace

VarianceEstimate variance_permutation(const ModelFit& fit,
                                      const AssignmentDistribution& dist,
                                      VarianceEstimate::Mode mode) {
  if (fit.comparator)
    throw config_error("permutation variance is defined for the centered estimator only");
  const TrialLayout& layout = fit.layout;
  const int d = fit.basis.dim;
  const int S = layout.n_sequences();

  auto a = score_contributions(fit, mode);

  Eigen::MatrixXd diag_meat = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd cross_meat = Eigen::MatrixXd::Zero(d, d);

  if (fit.centered.mode == CenteredDesign::Mode::stratified) {
    // The stratified centering holds each stratum's sequence multiset fixed,
    // so the reference distribution is the permutation of sequences within
    // strata: stratum-conditional marginals/pairwise probabilities, with
    // clusters in different strata assigned independently.
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < layout.n_clusters; ++i)
      groups[fit.centered.strata[i]].push_back(i);
    Eigen::MatrixXd m_outer = Eigen::MatrixXd::Zero(d, d);
    for (const auto& [label, members] : groups) {
      const double nk = static_cast<double>(members.size());
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(S);
      for (int i : members)
        counts[layout.sequence_index(layout.observed_crossover[i])] += 1.0;
      std::vector<Eigen::VectorXd> col_sum(S, Eigen::VectorXd::Zero(d));
      for (int s = 0; s < S; ++s)
        for (int i : members) col_sum[s] += a[i][s];
      Eigen::VectorXd mk = Eigen::VectorXd::Zero(d);
      for (int s = 0; s < S; ++s) {
        double ps = counts[s] / nk;
        if (ps == 0) continue;
        mk += ps * col_sum[s];
        for (int i : members)
          diag_meat.noalias() += ps * a[i][s] * a[i][s].transpose();
      }
      m_outer.noalias() += mk * mk.transpose();
      if (members.size() < 2) continue;
      for (int s = 0; s < S; ++s)
        for (int t = 0; t < S; ++t) {
          double q = counts[s] * (counts[t] - (s == t ? 1.0 : 0.0)) /
                     (nk * (nk - 1.0));
          if (q == 0) continue;
          Eigen::MatrixXd pair_sum = col_sum[s] * col_sum[t].transpose();
          for (int i : members)
            pair_sum.noalias() -= a[i][s] * a[i][t].transpose();
          cross_meat.noalias() += q * pair_sum;
        }
    }
    // Independent strata contribute no covariance, and within each stratum
    // the expected total score mk (nonzero because the weighted/augmented
    // centers differ from the plain probability-weighted design average) is
    // removed: the meat estimates the variance of the total score rather than
    // its second moment. Under marginal centering the two coincide.
    cross_meat.noalias() -= m_outer;
  } else {
    for (int i = 0; i < layout.n_clusters; ++i)
      for (int s = 0; s < S; ++s)
        diag_meat.noalias() += dist.marginal[s] * a[i][s] * a[i][s].transpose();

    // sum over distinct cluster pairs and sequence pairs weighted by the exact
    // pairwise assignment probabilities (same-sequence pairs included)
    std::vector<Eigen::VectorXd> col_sum(S, Eigen::VectorXd::Zero(d));
    for (int s = 0; s < S; ++s)
      for (int i = 0; i < layout.n_clusters; ++i) col_sum[s] += a[i][s];
    for (int s = 0; s < S; ++s)
      for (int t = 0; t < S; ++t) {
        if (dist.pairwise(s, t) == 0) continue;
        Eigen::MatrixXd pair_sum = col_sum[s] * col_sum[t].transpose();
        for (int i = 0; i < layout.n_clusters; ++i)
          pair_sum.noalias() -= a[i][s] * a[i][t].transpose();
        cross_meat.noalias() += dist.pairwise(s, t) * pair_sum;
      }
  }

  Eigen::MatrixXd bread_inv = fit.res.bread.fullPivLu().inverse();
  VarianceEstimate out;
  out.mode = mode;
  out.diag_term = sandwich(bread_inv, diag_meat);
  out.cross_term = sandwich(bread_inv, cross_meat);
  out.v = out.diag_term + out.cross_term;
  finish_se(out);
  return out;
}

std::vector<std::vector<int>> enumerate_assignments(const TrialLayout& layout) {
  std::vector<int> base;
  for (int s = 0; s < layout.n_sequences(); ++s)
    for (int c = 0; c < layout.allocation[s]; ++c) base.push_back(layout.sequences[s]);
  std::sort(base.begin(), base.end());
  std::vector<std::vector<int>> out;
  do {
    out.push_back(base);
  } while (std::next_permutation(base.begin(), base.end()));
  return out;
}

VarianceEstimate variance_full_enumeration(const ModelFit& fit,
                                           VarianceEstimate::Mode mode,
                                           long max_assignments) {
  if (fit.comparator)
    throw config_error("permutation variance is defined for the centered estimator only");
  const TrialLayout& layout = fit.layout;
  const int d = fit.basis.dim;

  auto a = score_contributions(fit, mode);
  std::vector<Eigen::MatrixXd> g_at(layout.n_clusters * layout.n_sequences());
  std::vector<Eigen::MatrixXd> wl_at(layout.n_clusters * layout.n_sequences());
  for (int i = 0; i < layout.n_clusters; ++i) {
    ClusterPrecision prec(fit.corr, layout, i);
    for (int s = 0; s < layout.n_sequences(); ++s) {
      int r = layout.sequences[s];
      Eigen::MatrixXd l = fit.centered.at(fit.basis, layout, i, r, fit.modifier(i));
      g_at[i * layout.n_sequences() + s] =
          cluster_design(fit.basis, layout, i, r, fit.modifier(i));
      wl_at[i * layout.n_sequences() + s] = prec.apply(l);
    }
  }

  auto assignments = enumerate_assignments(layout);
  if (fit.centered.mode == CenteredDesign::Mode::stratified) {
    // Keep only assignments preserving each stratum's observed multiset of
    // sequences, matching the conditional distribution the stratified
    // centering is built for.
    std::map<int, std::multiset<int>> observed;
    for (int i = 0; i < layout.n_clusters; ++i)
      observed[fit.centered.strata[i]].insert(layout.observed_crossover[i]);
    std::erase_if(assignments, [&](const std::vector<int>& sigma) {
      std::map<int, std::multiset<int>> got;
      for (int i = 0; i < layout.n_clusters; ++i)
        got[fit.centered.strata[i]].insert(sigma[i]);
      return got != observed;
    });
  }
  if (static_cast<long>(assignments.size()) > max_assignments)
    throw config_error("full-enumeration variance: " +
                       std::to_string(assignments.size()) +
                       " assignments exceed the limit of " +
                       std::to_string(max_assignments));

  Eigen::MatrixXd diag_acc = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd cross_acc = Eigen::MatrixXd::Zero(d, d);
  for (const auto& sigma : assignments) {
    Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
    for (int i = 0; i < layout.n_clusters; ++i) {
      int s = layout.sequence_index(sigma[i]);
      const Eigen::VectorXd& ai = a[i][s];
      bread.noalias() += wl_at[i * layout.n_sequences() + s].transpose() *
                         g_at[i * layout.n_sequences() + s];
      diag.noalias() += ai * ai.transpose();
      total += ai;
    }
    Eigen::MatrixXd cross = total * total.transpose() - diag;
    Eigen::MatrixXd bread_inv = bread.fullPivLu().inverse();
    diag_acc += sandwich(bread_inv, diag);
    cross_acc += sandwich(bread_inv, cross);
  }
  double n = static_cast<double>(assignments.size());

  VarianceEstimate out;
  out.mode = mode;
  out.diag_term = diag_acc / n;
  out.cross_term = cross_acc / n;
  out.v = out.diag_term + out.cross_term;
  finish_se(out);
  return out;
}

std::vector<ConfidenceInterval> confidence_interval(const Eigen::VectorXd& delta,
                                                    const VarianceEstimate& v,
                                                    double level, int t_df) {
  if (level <= 0 || level >= 1) throw config_error("confidence level must be in (0,1)");
  double q;
  if (t_df > 0) {
    boost::math::students_t dist(t_df);
    q = boost::math::quantile(dist, 0.5 + level / 2);
  } else {
    boost::math::normal dist;
    q = boost::math::quantile(dist, 0.5 + level / 2);
  }
  std::vector<ConfidenceInterval> out(delta.size());
  for (int k = 0; k < delta.size(); ++k) {
    ConfidenceInterval& ci = out[k];
    double se = v.se[k];
    ci.lower = delta[k] - q * se;
    ci.upper = delta[k] + q * se;
    if (se <= 0) {
      ci.valid = false;
      ci.note = "zero or invalid standard error; degenerate interval";
    } else if (v.diag_only[k]) {
      ci.note = "diagonal-only conservative SE";
    }
  }
  return out;
}

std::vector<LooInfluenceRow> loo_influence(const ModelFit& fit) {
  if (fit.res.loo_deltas.empty())
    throw config_error("leave-one-out influence requires loo_deltas");
  std::vector<LooInfluenceRow> rows;
  for (int i = 0; i < fit.layout.n_clusters; ++i) {
    LooInfluenceRow r;
    r.cluster = i;
    r.cluster_id = fit.layout.cluster_ids[i];
    r.crossover = fit.layout.observed_crossover[i];
    r.size = fit.layout.cluster_obs(i);
    r.delta_loo = fit.res.loo_deltas[i];
    r.deviation = fit.res.loo_deltas[i] - fit.res.delta;
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const LooInfluenceRow& a, const LooInfluenceRow& b) {
                     return a.crossover < b.crossover;
                   });
  return rows;
}

} // namespace swd
