#ifndef SWD_BASIS_HPP
#define SWD_BASIS_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "swd/layout.hpp"

namespace swd {

// How cluster-level effect modifiers enter the interaction encoding h(S_i).
enum class ModifierEncoding { raw, centered, strata_dummies };

struct ModifierSpec {
  std::string name;
  ModifierEncoding encoding = ModifierEncoding::centered;
};

// Linear treatment-effect basis: maps (crossover time, period) to a row
// vector of length dim. The row is the zero vector at any period before
// crossover, and is replicated for every individual in a cluster-period.
struct TreatmentBasis {
  enum class Kind { it, eti, custom };
  Kind kind = Kind::it;
  int dim = 1;        // length of the effect vector delta
  int base_dim = 1;   // dim before modifier expansion
  int n_periods = 0;  // required for eti and custom
  std::vector<std::string> labels;  // one per column of delta
  std::vector<ModifierSpec> modifiers;
  // custom: crossover time -> per-period rows (n_periods x base_dim)
  std::map<int, Eigen::MatrixXd> custom_rows;

  // Base row without modifier expansion.
  Eigen::RowVectorXd base_row(int crossover, int period) const;

  // Full row; h is the modifier encoding vector for the cluster (leading 1
  // included). Columns are ordered [h_0*base, h_1*base, ...].
  Eigen::RowVectorXd row(int crossover, int period,
                         const Eigen::VectorXd& h = Eigen::VectorXd()) const;
};

TreatmentBasis it_basis();
TreatmentBasis eti_basis(int n_periods);
TreatmentBasis custom_basis(int n_periods,
                            const std::map<int, Eigen::MatrixXd>& rows_by_crossover,
                            const std::vector<std::string>& labels = {});
TreatmentBasis with_modifiers(const TreatmentBasis& base,
                              const std::vector<ModifierSpec>& modifiers);

// Per-period rows (n_periods x dim) for a hypothetical crossover time.
Eigen::MatrixXd period_rows(const TreatmentBasis& basis, const TrialLayout& layout,
                            int crossover,
                            const Eigen::VectorXd& h = Eigen::VectorXd());

// Stacked per-observation design g(X_i): (sum_j n_ij) x dim, rows ordered by
// period then individual, replicated within each cluster-period.
Eigen::MatrixXd cluster_design(const TreatmentBasis& basis, const TrialLayout& layout,
                               int cluster, int crossover,
                               const Eigen::VectorXd& h = Eigen::VectorXd());

} // namespace swd

#endif
