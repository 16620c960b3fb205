#include "swd/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "swd/errors.hpp"

namespace swd {

using nlohmann::json;

// ---------------------------------------------------------------------------
// file helpers

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << content;
  if (!out) throw io_error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// CSV parsing

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) return false;
  out = static_cast<int>(v);
  return out == v;
}

} // namespace

LongDataset parse_dataset_text(const std::string& text, const DatasetSchema& schema) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw data_error("dataset is empty");
  std::vector<std::string> header = split_csv_line(line);

  auto col = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  int ci = col(schema.cluster), pi = col(schema.period), oi = col(schema.outcome);
  if (ci < 0) throw data_error("dataset is missing column '" + schema.cluster + "'");
  if (pi < 0) throw data_error("dataset is missing column '" + schema.period + "'");
  if (oi < 0) throw data_error("dataset is missing column '" + schema.outcome + "'");

  LongDataset ds;
  std::vector<int> cov_cols;
  for (int c = 0; c < static_cast<int>(header.size()); ++c)
    if (c != ci && c != pi && c != oi) {
      cov_cols.push_back(c);
      ds.covariate_columns.push_back(header[c]);
    }

  // raw covariate cells; numeric/categorical decided per column after the scan
  std::vector<std::vector<std::string>> raw_cov;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++ds.n_read;
    std::vector<std::string> f = split_csv_line(line);
    if (f.size() < header.size()) f.resize(header.size());
    LongDataset::Row row;
    row.cluster = f[ci];
    bool ok = !row.cluster.empty() && parse_int(f[pi], row.period) &&
              parse_double(f[oi], row.outcome);
    if (!ok) {
      ++ds.n_dropped;
      continue;
    }
    std::vector<std::string> rc;
    for (int c : cov_cols) rc.push_back(f[c]);
    raw_cov.push_back(std::move(rc));
    ds.rows.push_back(std::move(row));
  }
  if (ds.n_read == 0) throw data_error("dataset has a header but no data rows");
  if (ds.n_dropped > schema.max_drop_fraction * ds.n_read)
    throw data_error(std::to_string(ds.n_dropped) + " of " +
                     std::to_string(ds.n_read) +
                     " rows dropped for missing required fields (limit " +
                     std::to_string(schema.max_drop_fraction * 100) + "%)");
  if (ds.n_dropped > 0)
    ds.notes.push_back("dropped " + std::to_string(ds.n_dropped) +
                       " rows with missing required fields");

  const std::size_t k = cov_cols.size();
  for (auto& row : ds.rows) row.covariates.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    bool numeric = true;
    double v;
    for (const auto& rc : raw_cov)
      if (!parse_double(rc[c], v)) {
        numeric = false;
        break;
      }
    if (numeric) {
      for (std::size_t r = 0; r < ds.rows.size(); ++r) {
        parse_double(raw_cov[r][c], v);
        ds.rows[r].covariates[c] = v;
      }
    } else {
      std::set<std::string> levels;
      for (const auto& rc : raw_cov) levels.insert(rc[c]);
      std::map<std::string, double> code;
      std::string legend;
      for (const auto& l : levels) {
        legend += (code.empty() ? "" : ", ") + l + "=" + std::to_string(code.size());
        code[l] = static_cast<double>(code.size());
      }
      for (std::size_t r = 0; r < ds.rows.size(); ++r)
        ds.rows[r].covariates[c] = code[raw_cov[r][c]];
      ds.notes.push_back("column '" + ds.covariate_columns[c] +
                         "' encoded categorically: " + legend);
    }
  }
  return ds;
}

LongDataset read_dataset(const std::string& path, const DatasetSchema& schema) {
  return parse_dataset_text(read_text_file(path), schema);
}

BoundData bind_dataset(const LongDataset& dataset, const TrialLayout& design) {
  if (!design.has_observed())
    throw config_error("design has no per-cluster crossover assignments");
  std::map<std::string, int> cluster_of;
  for (int i = 0; i < design.n_clusters; ++i) cluster_of[design.cluster_ids[i]] = i;

  const int t = design.n_periods;
  // bucket rows by (cluster, period), preserving file order
  std::vector<std::vector<std::vector<const LongDataset::Row*>>> cells(
      design.n_clusters, std::vector<std::vector<const LongDataset::Row*>>(t));
  for (const auto& row : dataset.rows) {
    auto it = cluster_of.find(row.cluster);
    if (it == cluster_of.end())
      throw data_error("dataset cluster '" + row.cluster + "' is not in the design");
    if (row.period < 1 || row.period > t)
      throw data_error("cluster '" + row.cluster + "': period " +
                       std::to_string(row.period) + " outside 1.." + std::to_string(t));
    cells[it->second][row.period - 1].push_back(&row);
  }

  Eigen::MatrixXi sizes(design.n_clusters, t);
  for (int i = 0; i < design.n_clusters; ++i)
    for (int j = 0; j < t; ++j) {
      if (cells[i][j].empty())
        throw data_error("no rows for cluster '" + design.cluster_ids[i] +
                         "', period " + std::to_string(j + 1));
      sizes(i, j) = static_cast<int>(cells[i][j].size());
    }

  BoundData out;
  out.layout = build_layout(design.n_clusters, design.n_periods, design.sequences,
                            design.allocation, sizes, design.cluster_ids);
  out.layout.observed_crossover = design.observed_crossover;
  out.data.covariate_names = dataset.covariate_columns;
  const int k = static_cast<int>(dataset.covariate_columns.size());
  for (int i = 0; i < design.n_clusters; ++i) {
    int obs = out.layout.cluster_obs(i);
    Eigen::VectorXd y(obs);
    Eigen::MatrixXd cov(obs, k);
    int row = 0;
    for (int j = 0; j < t; ++j)
      for (const LongDataset::Row* r : cells[i][j]) {
        y[row] = r->outcome;
        for (int c = 0; c < k; ++c) cov(row, c) = r->covariates[c];
        ++row;
      }
    out.data.outcomes.push_back(std::move(y));
    out.data.covariates.push_back(std::move(cov));
  }
  return out;
}

// ---------------------------------------------------------------------------
// configuration

namespace {

WorkingCorrelation::Kind corr_kind_from(const std::string& s) {
  if (s == "independence") return WorkingCorrelation::Kind::independence;
  if (s == "cluster" || s == "exchangeable") return WorkingCorrelation::Kind::exchangeable;
  if (s == "cluster_time" || s == "intercept_slope")
    return WorkingCorrelation::Kind::intercept_slope;
  if (s == "nested" || s == "nested_time") return WorkingCorrelation::Kind::nested_time;
  throw config_error("unknown working correlation '" + s + "'");
}

std::string corr_kind_name(WorkingCorrelation::Kind k) {
  switch (k) {
    case WorkingCorrelation::Kind::independence: return "independence";
    case WorkingCorrelation::Kind::exchangeable: return "cluster";
    case WorkingCorrelation::Kind::intercept_slope: return "cluster_time";
    case WorkingCorrelation::Kind::nested_time: return "nested";
  }
  return "?";
}

} // namespace

AnalysisConfig parse_config_text(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  AnalysisConfig cfg;
  try {
    if (j.contains("columns")) {
      const json& c = j["columns"];
      cfg.columns.cluster = c.value("cluster", cfg.columns.cluster);
      cfg.columns.period = c.value("period", cfg.columns.period);
      cfg.columns.outcome = c.value("outcome", cfg.columns.outcome);
      cfg.columns.max_drop_fraction =
          c.value("max_drop_fraction", cfg.columns.max_drop_fraction);
    }
    if (j.contains("effect")) {
      const json& e = j["effect"];
      cfg.effect_model = e.value("model", "it");
      if (cfg.effect_model != "it" && cfg.effect_model != "eti" &&
          cfg.effect_model != "custom")
        throw config_error("effect.model must be it, eti, or custom");
      if (cfg.effect_model == "custom") {
        if (!e.contains("rows_by_crossover"))
          throw config_error("effect.model=custom requires rows_by_crossover");
        for (auto& [key, rows] : e["rows_by_crossover"].items()) {
          int r = std::stoi(key);
          Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
          for (std::size_t a = 0; a < rows.size(); ++a)
            for (std::size_t b = 0; b < rows[a].size(); ++b)
              m(a, b) = rows[a][b].get<double>();
          cfg.custom_rows[r] = m;
        }
        if (e.contains("labels"))
          cfg.custom_labels = e["labels"].get<std::vector<std::string>>();
      }
      for (const json& m : e.value("modifiers", json::array())) {
        ModifierSpec spec;
        spec.name = m.at("column").get<std::string>();
        std::string enc = m.value("encoding", "centered");
        if (enc == "raw") spec.encoding = ModifierEncoding::raw;
        else if (enc == "centered") spec.encoding = ModifierEncoding::centered;
        else if (enc == "strata") spec.encoding = ModifierEncoding::strata_dummies;
        else throw config_error("unknown modifier encoding '" + enc + "'");
        cfg.modifiers.push_back(spec);
      }
    }
    if (j.contains("working_mean")) {
      const json& m = j["working_mean"];
      std::string kind = m.value("model", "categorical");
      if (kind == "zero") cfg.mean.kind = WorkingMeanSpec::Kind::zero;
      else if (kind == "linear") cfg.mean.kind = WorkingMeanSpec::Kind::linear_time;
      else if (kind == "categorical")
        cfg.mean.kind = WorkingMeanSpec::Kind::categorical_time;
      else if (kind == "custom") cfg.mean.kind = WorkingMeanSpec::Kind::custom_regression;
      else throw config_error("unknown working mean model '" + kind + "'");
      cfg.mean.covariates =
          m.value("covariates", std::vector<std::string>{});
      cfg.mean.custom_columns = m.value("columns", std::vector<std::string>{});
      if (m.contains("fixed_coefficients")) {
        auto v = m["fixed_coefficients"].get<std::vector<double>>();
        cfg.mean.fixed_coefficients =
            Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
      }
    }
    cfg.corr_kind = corr_kind_from(j.value("working_correlation", "independence"));
    if (j.contains("corr_params")) {
      const json& p = j["corr_params"];
      WorkingCorrelation w;
      w.kind = cfg.corr_kind;
      w.sigma2_cluster = p.value("sigma2_cluster", 0.0);
      w.sigma2_time = p.value("sigma2_time", 0.0);
      w.sigma2_resid = p.value("sigma2_resid", 1.0);
      cfg.fixed_corr = w;
    }
    if (j.contains("adjust")) {
      cfg.adjust = j["adjust"].value("design", "");
      if (cfg.adjust == "none") cfg.adjust = "";
      if (!cfg.adjust.empty() && cfg.adjust.rfind("strata:", 0) != 0 &&
          cfg.adjust.rfind("median:", 0) != 0 && cfg.adjust.rfind("cut:", 0) != 0)
        throw config_error(
            "adjust.design must be none, strata:<column>, median:<column>, "
            "or cut:<column>@<value>");
      if (j["adjust"].contains("augment")) {
        const json& a = j["adjust"]["augment"];
        if (a.is_string()) cfg.adjust_augment = {a.get<std::string>()};
        else cfg.adjust_augment = a.get<std::vector<std::string>>();
        if (cfg.adjust.empty())
          throw config_error("adjust.augment requires adjust.design");
      }
    }
    if (j.contains("inference")) {
      const json& f = j["inference"];
      cfg.level = f.value("level", 0.95);
      cfg.loo = f.value("loo", true);
      cfg.full_enumeration = f.value("full_enumeration", false);
      cfg.opts.loo_reduced_distribution =
          f.value("loo_reduced_distribution", true);
      cfg.opts.loo_refit_mean = f.value("loo_refit_mean", false);
    }
    cfg.comparator = j.value("estimator", "centered") == "gee"
                         ? true
                         : (j.value("estimator", "centered") == "centered"
                                ? false
                                : throw config_error(
                                      "estimator must be centered or gee"));
  } catch (const json::exception& e) {
    throw config_error(std::string("bad config value: ") + e.what());
  }
  if (cfg.level <= 0 || cfg.level >= 1)
    throw config_error("inference.level must be in (0,1)");
  return cfg;
}

AnalysisConfig read_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

// ---------------------------------------------------------------------------
// pipeline

namespace {

std::vector<int> strata_from_adjust(const std::string& adjust,
                                    const TrialLayout& layout, const TrialData& data) {
  std::string mode = adjust.substr(0, adjust.find(':'));
  std::string column = adjust.substr(adjust.find(':') + 1);
  if (mode == "cut") {
    std::size_t at = column.rfind('@');
    if (at == std::string::npos)
      throw config_error("cut adjustment needs the form cut:<column>@<value>");
    double threshold = 0;
    try {
      threshold = std::stod(column.substr(at + 1));
    } catch (const std::exception&) {
      throw config_error("cut adjustment threshold is not a number");
    }
    std::vector<double> values =
        data.cluster_covariate(layout, column.substr(0, at));
    std::vector<int> strata(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      strata[i] = values[i] > threshold ? 1 : 0;
    return strata;
  }
  std::vector<double> values = data.cluster_covariate(layout, column);
  if (mode == "median") return median_split(values);
  // distinct values -> stratum ids in sorted order
  std::set<double> levels(values.begin(), values.end());
  std::map<double, int> id;
  for (double l : levels) id[l] = static_cast<int>(id.size());
  std::vector<int> strata(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) strata[i] = id[values[i]];
  return strata;
}

} // namespace

AnalysisReport analyze(const LongDataset& dataset, const TrialLayout& design,
                       const AnalysisConfig& config) {
  BoundData bound = bind_dataset(dataset, design);

  PipelineSpec spec;
  if (config.effect_model == "it") spec.basis = it_basis();
  else if (config.effect_model == "eti") spec.basis = eti_basis(design.n_periods);
  else spec.basis = custom_basis(design.n_periods, config.custom_rows,
                                 config.custom_labels);
  if (!config.modifiers.empty())
    spec.basis = with_modifiers(spec.basis, config.modifiers);
  spec.mean = config.mean;
  spec.corr_kind = config.corr_kind;
  spec.fixed_corr = config.fixed_corr;
  spec.comparator = config.comparator;
  spec.opts = config.opts;
  spec.opts.compute_loo = config.loo && !config.comparator;
  if (!config.adjust.empty()) {
    if (config.comparator)
      throw config_error("design adjustment applies to the centered estimator only");
    spec.centering.mode = CenteredDesign::Mode::stratified;
    spec.centering.strata = strata_from_adjust(config.adjust, bound.layout, bound.data);
    if (!config.adjust_augment.empty()) {
      int n = bound.layout.n_clusters;
      spec.centering.augment.resize(n, config.adjust_augment.size());
      for (std::size_t c = 0; c < config.adjust_augment.size(); ++c) {
        std::vector<double> values =
            bound.data.cluster_covariate(bound.layout, config.adjust_augment[c]);
        for (int i = 0; i < n; ++i) spec.centering.augment(i, c) = values[i];
      }
      spec.centering.augment_names = config.adjust_augment;
    }
  }

  ModelFit fit = fit_pipeline(bound.data, bound.layout, spec);

  AnalysisReport rep;
  rep.labels = fit.res.labels;
  rep.delta = fit.res.delta;
  rep.level = config.level;
  rep.corr_kind = corr_kind_name(fit.corr.kind);
  rep.sigma2_cluster = fit.corr.sigma2_cluster;
  rep.sigma2_time = fit.corr.sigma2_time;
  rep.sigma2_resid = fit.corr.sigma2_resid;
  rep.corr_truncated = fit.corr.truncated;
  rep.n_clusters = bound.layout.n_clusters;
  rep.n_periods = bound.layout.n_periods;
  for (int i = 0; i < bound.layout.n_clusters; ++i)
    rep.n_obs += bound.layout.cluster_obs(i);
  rep.n_dropped = dataset.n_dropped;
  rep.notes = dataset.notes;
  for (const auto& n : fit.res.diagnostics) rep.notes.push_back(n);
  for (const auto& n : fit.centered.notes) rep.notes.push_back(n);

  if (!config.comparator) {
    AssignmentDistribution dist = assignment_distribution(bound.layout);
    VarianceEstimate vp =
        config.full_enumeration
            ? variance_full_enumeration(fit, VarianceEstimate::Mode::plugin)
            : variance_permutation(fit, dist, VarianceEstimate::Mode::plugin);
    rep.se_plugin.assign(vp.se.data(), vp.se.data() + vp.se.size());
    rep.ci_plugin = confidence_interval(fit.res.delta, vp, config.level);
    for (const auto& n : vp.notes) rep.notes.push_back("plugin variance: " + n);
    if (config.loo) {
      VarianceEstimate vl =
          config.full_enumeration
              ? variance_full_enumeration(fit, VarianceEstimate::Mode::leave_one_out)
              : variance_permutation(fit, dist, VarianceEstimate::Mode::leave_one_out);
      rep.se_loo.assign(vl.se.data(), vl.se.data() + vl.se.size());
      rep.ci_loo = confidence_interval(fit.res.delta, vl, config.level);
      for (const auto& n : vl.notes) rep.notes.push_back("loo variance: " + n);
      rep.influence = loo_influence(fit);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// reports

std::string report_json(const AnalysisReport& r) {
  json j;
  j["labels"] = r.labels;
  j["estimate"] = std::vector<double>(r.delta.data(), r.delta.data() + r.delta.size());
  j["level"] = r.level;
  auto cis = [](const std::vector<ConfidenceInterval>& v) {
    json a = json::array();
    for (const auto& ci : v) {
      json e = {{"lower", ci.lower}, {"upper", ci.upper}, {"valid", ci.valid}};
      if (!ci.note.empty()) e["note"] = ci.note;
      a.push_back(e);
    }
    return a;
  };
  j["se_plugin"] = r.se_plugin;
  j["ci_plugin"] = cis(r.ci_plugin);
  j["se_loo"] = r.se_loo;
  j["ci_loo"] = cis(r.ci_loo);
  j["working_correlation"] = {{"kind", r.corr_kind},
                              {"sigma2_cluster", r.sigma2_cluster},
                              {"sigma2_time", r.sigma2_time},
                              {"sigma2_resid", r.sigma2_resid},
                              {"truncated", r.corr_truncated}};
  j["design"] = {{"n_clusters", r.n_clusters},
                 {"n_periods", r.n_periods},
                 {"n_obs", r.n_obs},
                 {"n_dropped", r.n_dropped}};
  json infl = json::array();
  for (const auto& row : r.influence) {
    json e;
    e["cluster"] = row.cluster_id;
    e["crossover"] = row.crossover;
    e["size"] = row.size;
    e["delta_loo"] =
        std::vector<double>(row.delta_loo.data(),
                            row.delta_loo.data() + row.delta_loo.size());
    e["deviation"] =
        std::vector<double>(row.deviation.data(),
                            row.deviation.data() + row.deviation.size());
    infl.push_back(e);
  }
  j["loo_influence"] = infl;
  j["notes"] = r.notes;
  return j.dump(2) + "\n";
}

AnalysisReport parse_report_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw io_error(std::string("report is not valid JSON: ") + e.what());
  }
  AnalysisReport r;
  r.labels = j.at("labels").get<std::vector<std::string>>();
  auto est = j.at("estimate").get<std::vector<double>>();
  r.delta = Eigen::Map<const Eigen::VectorXd>(est.data(), est.size());
  r.level = j.at("level").get<double>();
  auto cis = [](const json& a) {
    std::vector<ConfidenceInterval> v;
    for (const auto& e : a) {
      ConfidenceInterval ci;
      ci.lower = e.at("lower").get<double>();
      ci.upper = e.at("upper").get<double>();
      ci.valid = e.at("valid").get<bool>();
      ci.note = e.value("note", "");
      v.push_back(ci);
    }
    return v;
  };
  r.se_plugin = j.at("se_plugin").get<std::vector<double>>();
  r.ci_plugin = cis(j.at("ci_plugin"));
  r.se_loo = j.at("se_loo").get<std::vector<double>>();
  r.ci_loo = cis(j.at("ci_loo"));
  const json& w = j.at("working_correlation");
  r.corr_kind = w.at("kind").get<std::string>();
  r.sigma2_cluster = w.at("sigma2_cluster").get<double>();
  r.sigma2_time = w.at("sigma2_time").get<double>();
  r.sigma2_resid = w.at("sigma2_resid").get<double>();
  r.corr_truncated = w.at("truncated").get<bool>();
  const json& d = j.at("design");
  r.n_clusters = d.at("n_clusters").get<int>();
  r.n_periods = d.at("n_periods").get<int>();
  r.n_obs = d.at("n_obs").get<long>();
  r.n_dropped = d.at("n_dropped").get<int>();
  for (const auto& e : j.at("loo_influence")) {
    LooInfluenceRow row;
    row.cluster_id = e.at("cluster").get<std::string>();
    row.crossover = e.at("crossover").get<int>();
    row.size = e.at("size").get<int>();
    auto dl = e.at("delta_loo").get<std::vector<double>>();
    auto dv = e.at("deviation").get<std::vector<double>>();
    row.delta_loo = Eigen::Map<const Eigen::VectorXd>(dl.data(), dl.size());
    row.deviation = Eigen::Map<const Eigen::VectorXd>(dv.data(), dv.size());
    r.influence.push_back(std::move(row));
  }
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

namespace {

std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

} // namespace

std::string report_text(const AnalysisReport& r) {
  std::ostringstream out;
  out << "Design: " << r.n_clusters << " clusters x " << r.n_periods
      << " periods, " << r.n_obs << " observations";
  if (r.n_dropped > 0) out << " (" << r.n_dropped << " rows dropped)";
  out << "\n";
  out << "Working correlation: " << r.corr_kind << " (sigma2_cluster="
      << fixed(r.sigma2_cluster) << ", sigma2_time=" << fixed(r.sigma2_time)
      << ", sigma2_resid=" << fixed(r.sigma2_resid)
      << (r.corr_truncated ? ", truncated" : "") << ")\n\n";

  std::size_t w = 8;
  for (const auto& l : r.labels) w = std::max(w, l.size());
  int pct = static_cast<int>(std::lround(r.level * 100));
  out << std::string(w, ' ') << "  Estimate";
  if (!r.se_plugin.empty()) out << "   SE(plug-in)   " << pct << "% CI(plug-in)";
  if (!r.se_loo.empty()) out << "       SE(L1O)        " << pct << "% CI(L1O)";
  out << "\n";
  for (int k = 0; k < r.delta.size(); ++k) {
    out << r.labels[k] << std::string(w - r.labels[k].size(), ' ');
    out << "  " << fixed(r.delta[k], 4);
    if (!r.se_plugin.empty())
      out << "   " << fixed(r.se_plugin[k], 4) << "   (" << fixed(r.ci_plugin[k].lower)
          << ", " << fixed(r.ci_plugin[k].upper) << ")";
    if (!r.se_loo.empty())
      out << "   " << fixed(r.se_loo[k], 4) << "   (" << fixed(r.ci_loo[k].lower)
          << ", " << fixed(r.ci_loo[k].upper) << ")";
    out << "\n";
  }

  if (!r.influence.empty()) {
    out << "\nLeave-one-out influence (sorted by crossover):\n";
    out << "cluster  crossover  size  delta_loo  deviation\n";
    for (const auto& row : r.influence)
      out << row.cluster_id << "  " << row.crossover << "  " << row.size << "  "
          << fixed(row.delta_loo[0], 4) << "  " << fixed(row.deviation[0], 4) << "\n";
  }
  if (!r.notes.empty()) {
    out << "\nNotes:\n";
    for (const auto& n : r.notes) out << "  - " << n << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// simulation command

SimCommand parse_sim_command(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("simulation spec is not valid JSON: ") + e.what());
  }
  SimCommand cmd;
  try {
    cmd.spec.setting = j.value("setting", 1);
    cmd.reps = j.value("reps", 1000);
    cmd.spec.seed = j.value("seed", std::uint64_t(0));
    cmd.spec.n_clusters = j.value("n_clusters", cmd.spec.n_clusters);
    cmd.spec.n_periods = j.value("n_periods", cmd.spec.n_periods);
    cmd.spec.sigma2_cluster = j.value("sigma2_cluster", cmd.spec.sigma2_cluster);
    cmd.spec.sigma2_slope = j.value("sigma2_slope", cmd.spec.sigma2_slope);
    cmd.spec.sigma2_resid = j.value("sigma2_resid", cmd.spec.sigma2_resid);
    cmd.spec.true_delta = j.value("true_delta", cmd.spec.true_delta);
    std::vector<std::string> names =
        j.value("configs", std::vector<std::string>{"a", "b", "c", "d"});
    for (const std::string& name : names) {
      bool comparator = false;
      std::string label = name;
      if (label.rfind("comparator-", 0) == 0) {
        comparator = true;
        label = label.substr(11);
      }
      if (label.size() != 1)
        throw config_error("unknown simulation config '" + name + "'");
      cmd.configs.push_back(sim_config(label[0], comparator));
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("bad simulation spec value: ") + e.what());
  }
  if (cmd.reps < 1) throw config_error("reps must be positive");
  return cmd;
}

// ---------------------------------------------------------------------------
// simulation outputs

namespace {

std::string num(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

} // namespace

std::string metrics_csv(const StudyResult& study) {
  std::ostringstream out;
  out << "config,n_reps,n_fail,bias,sd,coverage_plugin,coverage_loo,"
         "mean_se_plugin,mean_se_loo\n";
  for (const auto& m : study.configs)
    out << m.config << ',' << m.n_reps << ',' << m.n_fail << ',' << num(m.bias)
        << ',' << num(m.sd) << ',' << num(m.coverage_plugin) << ','
        << num(m.coverage_loo) << ',' << num(m.mean_se_plugin) << ','
        << num(m.mean_se_loo) << "\n";
  return out.str();
}

std::string records_csv(const StudyResult& study) {
  std::ostringstream out;
  out << "config,replicate,estimate,deviation,se_plugin,se_loo,covered_plugin,"
         "covered_loo,imbalance,failed,note\n";
  for (const auto& m : study.configs)
    for (const auto& r : m.records) {
      std::string note = r.note;
      std::replace(note.begin(), note.end(), ',', ';');
      out << m.config << ',' << r.replicate << ',' << num(r.estimate) << ','
          << num(r.deviation) << ',' << num(r.se_plugin) << ',' << num(r.se_loo)
          << ',' << (r.covered_plugin ? 1 : 0) << ',' << (r.covered_loo ? 1 : 0)
          << ',' << num(r.imbalance) << ',' << (r.failed ? 1 : 0) << ',' << note
          << "\n";
    }
  return out.str();
}

std::string dataset_csv(const SimulatedTrial& trial) {
  std::ostringstream out;
  out << "cluster,period,outcome,baseline_size\n";
  for (int i = 0; i < trial.layout.n_clusters; ++i) {
    int row = 0;
    for (int j = 1; j <= trial.layout.n_periods; ++j)
      for (int k = 0; k < trial.layout.cluster_sizes(i, j - 1); ++k) {
        out << trial.layout.cluster_ids[i] << ',' << j << ','
            << num(trial.data.outcomes[i][row]) << ','
            << num(trial.data.covariates[i](row, 0)) << "\n";
        ++row;
      }
  }
  return out.str();
}

} // namespace swd
