#include "swd/swd_capi.h"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

#include "swd/errors.hpp"
#include "swd/io.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

template <typename Fn>
swd_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SWD_OK;
  } catch (const swd::config_error& e) {
    g_last_error = e.what();
    return SWD_ERR_CONFIG;
  } catch (const swd::data_error& e) {
    g_last_error = e.what();
    return SWD_ERR_DATA;
  } catch (const swd::numeric_error& e) {
    g_last_error = e.what();
    return SWD_ERR_NUMERIC;
  } catch (const swd::io_error& e) {
    g_last_error = e.what();
    return SWD_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SWD_ERR_OTHER;
  }
}

} // namespace

extern "C" {

const char* swd_version(void) { return "1.0.0"; }

const char* swd_last_error(void) { return g_last_error.c_str(); }

void swd_free(char* ptr) { std::free(ptr); }

swd_status swd_analyze(const char* data_csv, const char* design_text,
                       const char* config_json, char** report_json_out,
                       char** report_text_out) {
  if (!data_csv || !design_text || !config_json) {
    g_last_error = "null input";
    return SWD_ERR_CONFIG;
  }
  return guarded([&] {
    swd::AnalysisConfig config = swd::parse_config_text(config_json);
    swd::TrialLayout design = swd::parse_design_text(design_text);
    swd::LongDataset dataset = swd::parse_dataset_text(data_csv, config.columns);
    swd::AnalysisReport report = swd::analyze(dataset, design, config);
    if (report_json_out) *report_json_out = dup_string(swd::report_json(report));
    if (report_text_out) *report_text_out = dup_string(swd::report_text(report));
  });
}

swd_status swd_simulate(const char* spec_json, char** metrics_csv_out,
                        char** records_csv_out) {
  if (!spec_json) {
    g_last_error = "null input";
    return SWD_ERR_CONFIG;
  }
  return guarded([&] {
    swd::SimCommand cmd = swd::parse_sim_command(spec_json);
    swd::StudyResult study = swd::run_study(cmd.spec, cmd.configs, cmd.reps);
    if (metrics_csv_out) *metrics_csv_out = dup_string(swd::metrics_csv(study));
    if (records_csv_out) *records_csv_out = dup_string(swd::records_csv(study));
  });
}

swd_status swd_validate_design(const char* design_text, char** summary_out) {
  if (!design_text) {
    g_last_error = "null input";
    return SWD_ERR_CONFIG;
  }
  return guarded([&] {
    swd::TrialLayout layout = swd::parse_design_text(design_text);
    std::ostringstream ss;
    ss << "design ok: " << layout.n_clusters << " clusters, " << layout.n_periods
       << " periods, " << layout.n_sequences() << " sequences";
    if (summary_out) *summary_out = dup_string(ss.str());
  });
}

swd_status swd_validate_config(const char* config_json, char** summary_out) {
  if (!config_json) {
    g_last_error = "null input";
    return SWD_ERR_CONFIG;
  }
  return guarded([&] {
    swd::AnalysisConfig cfg = swd::parse_config_text(config_json);
    std::ostringstream ss;
    ss << "config ok: effect=" << cfg.effect_model
       << ", estimator=" << (cfg.comparator ? "gee" : "centered");
    if (summary_out) *summary_out = dup_string(ss.str());
  });
}

} // extern "C"
