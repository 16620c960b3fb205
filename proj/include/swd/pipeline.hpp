#ifndef SWD_PIPELINE_HPP
#define SWD_PIPELINE_HPP

#include <optional>

#include "swd/estimator.hpp"

namespace swd {

// One analysis configuration: effect basis, working models, centering, and
// which estimator to run.
struct PipelineSpec {
  TreatmentBasis basis;
  WorkingMeanSpec mean;
  WorkingCorrelation::Kind corr_kind = WorkingCorrelation::Kind::independence;
  // Skip moment estimation and use these components as-is.
  std::optional<WorkingCorrelation> fixed_corr;
  CenteringSpec centering;
  bool comparator = false;
  EstimatorOptions opts;
};

// Two-stage fit: a pilot pass under working independence supplies residuals
// for the variance-component moment estimators, then the requested working
// correlation drives the final solve.
ModelFit fit_pipeline(const TrialData& data, const TrialLayout& layout,
                      const PipelineSpec& spec);

} // namespace swd

#endif
