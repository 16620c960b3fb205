#ifndef SWD_DATA_HPP
#define SWD_DATA_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "swd/layout.hpp"

namespace swd {

// Outcomes and covariates arranged per cluster, rows stacked period-major
// to match cluster_design / TrialLayout ordering.
struct TrialData {
  std::vector<Eigen::VectorXd> outcomes;    // per cluster, length cluster_obs(i)
  std::vector<std::string> covariate_names;
  std::vector<Eigen::MatrixXd> covariates;  // per cluster, n_i x C

  int covariate_index(const std::string& name) const;  // -1 if absent

  // Per-cluster scalar value of a covariate; throws data_error if the column
  // is not constant within any cluster.
  std::vector<double> cluster_covariate(const TrialLayout& layout,
                                        const std::string& name) const;
};

} // namespace swd

#endif
