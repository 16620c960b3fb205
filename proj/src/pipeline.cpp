#include "swd/pipeline.hpp"

namespace swd {

ModelFit fit_pipeline(const TrialData& data, const TrialLayout& layout,
                      const PipelineSpec& spec) {
  WorkingCorrelation corr;
  if (spec.fixed_corr) {
    corr = *spec.fixed_corr;
  } else if (spec.corr_kind == WorkingCorrelation::Kind::independence) {
    corr.kind = WorkingCorrelation::Kind::independence;
  } else {
    EstimatorOptions pilot_opts = spec.opts;
    pilot_opts.compute_loo = false;
    WorkingCorrelation indep;
    ModelFit pilot =
        spec.comparator
            ? estimate_gee_comparator(data, layout, spec.basis, spec.mean, indep,
                                      pilot_opts)
            : estimate(data, layout, spec.basis, spec.mean, indep, spec.centering,
                       pilot_opts);
    // With stratified centering, sweep its span out of the pilot residuals
    // first: the variance-component moments should capture cluster-level
    // random variation, not the systematic strata trends the centering is
    // about to absorb.
    std::vector<Eigen::VectorXd> resid = pilot.res.residuals;
    if (!spec.comparator &&
        spec.centering.mode == CenteredDesign::Mode::stratified)
      resid = sweep_centering_span(resid, layout, spec.centering.strata,
                                   spec.centering.augment);
    corr = fit_working_correlation(spec.corr_kind, resid, layout);
  }
  return spec.comparator
             ? estimate_gee_comparator(data, layout, spec.basis, spec.mean, corr,
                                       spec.opts)
             : estimate(data, layout, spec.basis, spec.mean, corr, spec.centering,
                        spec.opts);
}

} // namespace swd
