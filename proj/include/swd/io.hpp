#ifndef SWD_IO_HPP
#define SWD_IO_HPP

#include <string>
#include <vector>

#include "swd/inference.hpp"
#include "swd/pipeline.hpp"
#include "swd/sim.hpp"

namespace swd {

// ---------------------------------------------------------------------------
// Long-format CSV ingestion (one row per individual observation)

struct DatasetSchema {
  std::string cluster = "cluster";
  std::string period = "period";
  std::string outcome = "outcome";
  // Rows with a missing/unparseable required field are dropped and counted;
  // exceeding this fraction of the file is a data error.
  double max_drop_fraction = 0.5;
};

struct LongDataset {
  struct Row {
    std::string cluster;
    int period = 0;
    double outcome = 0;
    std::vector<double> covariates;
  };
  std::vector<std::string> covariate_columns;
  std::vector<Row> rows;
  int n_read = 0;     // data lines seen
  int n_dropped = 0;  // rows dropped for missing required fields
  std::vector<std::string> notes;  // e.g. categorical encodings
};

// Comma-separated text with a header row. Non-core columns become covariates;
// a column with any non-numeric value is encoded categorically (sorted
// distinct values -> 0,1,2,...) with the coding recorded in notes.
LongDataset parse_dataset_text(const std::string& text, const DatasetSchema& schema);
LongDataset read_dataset(const std::string& path, const DatasetSchema& schema);

// Joins a dataset against a randomization design: takes cluster-period sizes
// from the row counts, checks every design cell has data (naming any gap),
// and stacks outcomes/covariates in layout order.
struct BoundData {
  TrialLayout layout;
  TrialData data;
};
BoundData bind_dataset(const LongDataset& dataset, const TrialLayout& design);

// ---------------------------------------------------------------------------
// Analysis configuration (JSON document; see README for the schema)

struct AnalysisConfig {
  DatasetSchema columns;
  // effect
  std::string effect_model = "it";  // it | eti | custom
  std::map<int, Eigen::MatrixXd> custom_rows;
  std::vector<std::string> custom_labels;
  std::vector<ModifierSpec> modifiers;
  // working mean
  WorkingMeanSpec mean;
  // working correlation
  WorkingCorrelation::Kind corr_kind = WorkingCorrelation::Kind::independence;
  std::optional<WorkingCorrelation> fixed_corr;
  // design adjustment: "" (none), "strata:<col>" (distinct per-cluster
  // values), "median:<col>" (two-stratum strict median split), or
  // "cut:<col>@<value>" (two strata split at a fixed threshold)
  std::string adjust = "";
  // continuous covariates added to the stratified centering basis
  std::vector<std::string> adjust_augment;
  // inference
  double level = 0.95;
  bool loo = true;
  bool full_enumeration = false;
  bool comparator = false;
  EstimatorOptions opts;
};

AnalysisConfig parse_config_text(const std::string& json_text);
AnalysisConfig read_config_file(const std::string& path);

// ---------------------------------------------------------------------------
// Full pipeline and reports

struct AnalysisReport {
  std::vector<std::string> labels;
  Eigen::VectorXd delta;
  std::vector<double> se_plugin, se_loo;
  std::vector<ConfidenceInterval> ci_plugin, ci_loo;
  double level = 0.95;
  std::string corr_kind;
  double sigma2_cluster = 0, sigma2_time = 0, sigma2_resid = 0;
  bool corr_truncated = false;
  int n_clusters = 0, n_periods = 0;
  long n_obs = 0;
  int n_dropped = 0;
  std::vector<LooInfluenceRow> influence;
  std::vector<std::string> notes;
};

AnalysisReport analyze(const LongDataset& dataset, const TrialLayout& design,
                       const AnalysisConfig& config);

std::string report_json(const AnalysisReport& report);
AnalysisReport parse_report_json(const std::string& text);
std::string report_text(const AnalysisReport& report);

// ---------------------------------------------------------------------------
// Simulation command (JSON document; see README)

struct SimCommand {
  DgpSpec spec;
  std::vector<SimConfig> configs;
  int reps = 1000;
};

// Keys: setting, reps, seed, configs (array of "a".."h" or "comparator-<x>"),
// plus optional overrides of the DgpSpec fields.
SimCommand parse_sim_command(const std::string& json_text);

// ---------------------------------------------------------------------------
// Simulation outputs

std::string metrics_csv(const StudyResult& study);
std::string records_csv(const StudyResult& study);
// Long-format CSV of one simulated replicate (columns cluster, period,
// outcome, baseline_size), for round-tripping through analyze.
std::string dataset_csv(const SimulatedTrial& trial);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace swd

#endif
