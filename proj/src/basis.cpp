#include "swd/basis.hpp"

#include "swd/errors.hpp"

namespace swd {

Eigen::RowVectorXd TreatmentBasis::base_row(int crossover, int period) const {
  // period is 1-based, matching the trial's time index.
  switch (kind) {
    case Kind::it: {
      Eigen::RowVectorXd r(1);
      r[0] = period >= crossover ? 1.0 : 0.0;
      return r;
    }
    case Kind::eti: {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(base_dim);
      if (period >= crossover) {
        int tau = period - crossover + 1;  // exposure time
        r[tau - 1] = 1.0;
      }
      return r;
    }
    case Kind::custom: {
      auto it = custom_rows.find(crossover);
      if (it == custom_rows.end())
        throw config_error("custom basis has no rows for crossover time " +
                           std::to_string(crossover));
      if (period < 1 || period > it->second.rows())
        throw config_error("period out of range in custom basis");
      if (period < crossover && it->second.row(period - 1).cwiseAbs().sum() > 0)
        throw config_error("custom basis violates g(0)=0 at period " +
                           std::to_string(period) + " before crossover " +
                           std::to_string(crossover));
      return it->second.row(period - 1);
    }
  }
  throw config_error("unknown basis kind");
}

Eigen::RowVectorXd TreatmentBasis::row(int crossover, int period,
                                       const Eigen::VectorXd& h) const {
  Eigen::RowVectorXd base = base_row(crossover, period);
  if (modifiers.empty()) return base;
  const int n_h = static_cast<int>(h.size());
  if (n_h * base_dim != dim)
    throw config_error("modifier encoding vector has length " + std::to_string(n_h) +
                       ", expected " + std::to_string(dim / base_dim));
  Eigen::RowVectorXd out(dim);
  for (int c = 0; c < n_h; ++c)
    out.segment(c * base_dim, base_dim) = h[c] * base;
  return out;
}

TreatmentBasis it_basis() {
  TreatmentBasis b;
  b.kind = TreatmentBasis::Kind::it;
  b.dim = b.base_dim = 1;
  b.labels = {"treatment"};
  return b;
}

TreatmentBasis eti_basis(int n_periods) {
  if (n_periods < 2) throw config_error("eti basis requires at least 2 periods");
  TreatmentBasis b;
  b.kind = TreatmentBasis::Kind::eti;
  b.dim = b.base_dim = n_periods - 1;
  b.n_periods = n_periods;
  for (int tau = 1; tau < n_periods; ++tau)
    b.labels.push_back("exposure_" + std::to_string(tau));
  return b;
}

TreatmentBasis custom_basis(int n_periods,
                            const std::map<int, Eigen::MatrixXd>& rows_by_crossover,
                            const std::vector<std::string>& labels) {
  if (rows_by_crossover.empty())
    throw config_error("custom basis needs at least one crossover time");
  TreatmentBasis b;
  b.kind = TreatmentBasis::Kind::custom;
  b.n_periods = n_periods;
  int d = -1;
  for (const auto& [r, m] : rows_by_crossover) {
    if (m.rows() != n_periods)
      throw config_error("custom basis rows for crossover " + std::to_string(r) +
                         " must have n_periods rows");
    if (d < 0) d = static_cast<int>(m.cols());
    if (m.cols() != d) throw config_error("custom basis rows have inconsistent widths");
  }
  b.dim = b.base_dim = d;
  b.custom_rows = rows_by_crossover;
  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != d)
      throw config_error("custom basis labels must match dimension");
    b.labels = labels;
  } else {
    for (int c = 0; c < d; ++c) b.labels.push_back("effect_" + std::to_string(c + 1));
  }
  return b;
}

TreatmentBasis with_modifiers(const TreatmentBasis& base,
                              const std::vector<ModifierSpec>& modifiers) {
  if (!base.modifiers.empty())
    throw config_error("basis already carries modifiers");
  if (modifiers.empty()) return base;
  TreatmentBasis b = base;
  b.modifiers = modifiers;
  b.dim = base.base_dim * (1 + static_cast<int>(modifiers.size()));
  std::vector<std::string> labels = base.labels;
  for (const auto& m : modifiers)
    for (const auto& l : base.labels) labels.push_back(l + ":" + m.name);
  b.labels = labels;
  return b;
}

Eigen::MatrixXd period_rows(const TreatmentBasis& basis, const TrialLayout& layout,
                            int crossover, const Eigen::VectorXd& h) {
  Eigen::MatrixXd out(layout.n_periods, basis.dim);
  for (int j = 1; j <= layout.n_periods; ++j)
    out.row(j - 1) = basis.row(crossover, j, h);
  return out;
}

Eigen::MatrixXd cluster_design(const TreatmentBasis& basis, const TrialLayout& layout,
                               int cluster, int crossover, const Eigen::VectorXd& h) {
  if (cluster < 0 || cluster >= layout.n_clusters)
    throw config_error("cluster index out of range");
  Eigen::MatrixXd rows = period_rows(basis, layout, crossover, h);
  Eigen::MatrixXd out(layout.cluster_obs(cluster), basis.dim);
  int pos = 0;
  for (int j = 0; j < layout.n_periods; ++j) {
    int n = layout.cluster_sizes(cluster, j);
    out.middleRows(pos, n) = rows.row(j).replicate(n, 1);
    pos += n;
  }
  return out;
}

} // namespace swd
