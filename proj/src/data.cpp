#include "swd/data.hpp"

#include <cmath>

#include "swd/errors.hpp"

namespace swd {

int TrialData::covariate_index(const std::string& name) const {
  for (size_t c = 0; c < covariate_names.size(); ++c)
    if (covariate_names[c] == name) return static_cast<int>(c);
  return -1;
}

std::vector<double> TrialData::cluster_covariate(const TrialLayout& layout,
                                                 const std::string& name) const {
  int c = covariate_index(name);
  if (c < 0) throw data_error("covariate column not found: " + name);
  std::vector<double> out(layout.n_clusters);
  for (int i = 0; i < layout.n_clusters; ++i) {
    const auto col = covariates[i].col(c);
    double v = col[0];
    if ((col.array() != v).any())
      throw data_error("covariate '" + name + "' is not constant within cluster " +
                       layout.cluster_ids[i]);
    out[i] = v;
  }
  return out;
}

} // namespace swd
