#include "swd/layout.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "swd/errors.hpp"

namespace swd {

int TrialLayout::cluster_obs(int cluster) const {
  return cluster_sizes.row(cluster).sum();
}

int TrialLayout::sequence_index(int crossover) const {
  for (int s = 0; s < n_sequences(); ++s)
    if (sequences[s] == crossover) return s;
  throw config_error("crossover time " + std::to_string(crossover) +
                     " is not one of the design sequences");
}

int TrialLayout::period_offset(int cluster, int period) const {
  int off = 0;
  for (int j = 0; j < period; ++j) off += cluster_sizes(cluster, j);
  return off;
}

TrialLayout build_layout(int n_clusters, int n_periods,
                         const std::vector<int>& sequences,
                         const std::vector<int>& allocation,
                         const Eigen::MatrixXi& cluster_sizes,
                         const std::vector<std::string>& cluster_ids) {
  if (n_clusters < 1 || n_periods < 1)
    throw config_error("n_clusters and n_periods must be positive");
  if (sequences.empty()) throw config_error("at least one sequence is required");
  if (sequences.size() != allocation.size())
    throw config_error("sequences and allocation must have equal length");

  // Merge duplicate crossover times; the distribution depends only on them.
  std::map<int, int> merged;
  for (size_t s = 0; s < sequences.size(); ++s) {
    int r = sequences[s];
    if (r < 2 || r > n_periods)
      throw config_error("crossover time " + std::to_string(r) +
                         " outside {2,...," + std::to_string(n_periods) + "}");
    if (allocation[s] < 1)
      throw config_error("allocation counts must be positive");
    merged[r] += allocation[s];
  }

  TrialLayout out;
  out.n_clusters = n_clusters;
  out.n_periods = n_periods;
  for (const auto& [r, c] : merged) {
    out.sequences.push_back(r);
    out.allocation.push_back(c);
  }
  int total = std::accumulate(out.allocation.begin(), out.allocation.end(), 0);
  if (total != n_clusters)
    throw config_error("allocation sums to " + std::to_string(total) +
                       " but n_clusters is " + std::to_string(n_clusters));

  if (cluster_sizes.size() == 0) {
    out.cluster_sizes = Eigen::MatrixXi::Ones(n_clusters, n_periods);
  } else {
    if (cluster_sizes.rows() != n_clusters || cluster_sizes.cols() != n_periods)
      throw config_error("cluster_sizes must be n_clusters x n_periods");
    if ((cluster_sizes.array() < 1).any())
      throw config_error("all cluster-period sizes must be >= 1");
    out.cluster_sizes = cluster_sizes;
  }

  if (cluster_ids.empty()) {
    for (int i = 0; i < n_clusters; ++i)
      out.cluster_ids.push_back(std::to_string(i + 1));
  } else {
    if (static_cast<int>(cluster_ids.size()) != n_clusters)
      throw config_error("cluster_ids length must equal n_clusters");
    out.cluster_ids = cluster_ids;
  }
  return out;
}

std::vector<int> treatment_path(const TrialLayout& layout, int crossover) {
  layout.sequence_index(crossover);  // validates membership
  std::vector<int> path(layout.n_periods, 0);
  for (int j = crossover - 1; j < layout.n_periods; ++j) path[j] = 1;
  return path;
}

AssignmentDistribution assignment_distribution(const TrialLayout& layout) {
  const int S = layout.n_sequences();
  const double N = layout.n_clusters;
  AssignmentDistribution dist;
  dist.marginal.resize(S);
  dist.pairwise.resize(S, S);
  for (int s = 0; s < S; ++s) dist.marginal[s] = layout.allocation[s] / N;
  if (layout.n_clusters < 2) {
    dist.pairwise.setZero();
    return dist;
  }
  for (int s = 0; s < S; ++s)
    for (int t = 0; t < S; ++t) {
      double cs = layout.allocation[s];
      double ct = (s == t) ? cs - 1 : layout.allocation[t];
      dist.pairwise(s, t) = cs * ct / (N * (N - 1));
    }
  return dist;
}

AssignmentDistribution leave_one_out_distribution(const TrialLayout& layout,
                                                  int drop_cluster) {
  if (!layout.has_observed())
    throw config_error("leave-one-out distribution requires observed crossovers");
  if (drop_cluster < 0 || drop_cluster >= layout.n_clusters)
    throw config_error("drop_cluster index out of range");

  int s_drop = layout.sequence_index(layout.observed_crossover[drop_cluster]);
  if (layout.allocation[s_drop] < 1)
    throw config_error("inconsistent observed assignment: sequence count already zero");

  TrialLayout reduced = layout;
  reduced.n_clusters -= 1;
  reduced.allocation[s_drop] -= 1;
  if (reduced.allocation[s_drop] == 0) {
    reduced.allocation.erase(reduced.allocation.begin() + s_drop);
    reduced.sequences.erase(reduced.sequences.begin() + s_drop);
  }

  AssignmentDistribution red = assignment_distribution(reduced);
  // Re-expand to the full sequence index set so callers keep a stable indexing.
  const int S = layout.n_sequences();
  AssignmentDistribution out;
  out.marginal = Eigen::VectorXd::Zero(S);
  out.pairwise = Eigen::MatrixXd::Zero(S, S);
  for (int s = 0, rs = 0; s < S; ++s) {
    bool present = rs < reduced.n_sequences() && reduced.sequences[rs] == layout.sequences[s];
    if (!present) continue;
    out.marginal[s] = red.marginal[rs];
    for (int t = 0, rt = 0; t < S; ++t) {
      bool present_t = rt < reduced.n_sequences() && reduced.sequences[rt] == layout.sequences[t];
      if (!present_t) continue;
      out.pairwise(s, t) = red.pairwise(rs, rt);
      ++rt;
    }
    ++rs;
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<int> parse_ints(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& tok : split_ws(s)) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw config_error("cannot parse integer '" + tok + "' in " + what);
    }
  }
  return out;
}

} // namespace

TrialLayout parse_design_text(const std::string& text) {
  int n_clusters = -1, n_periods = -1;
  std::vector<int> sequences, allocation;
  struct ClusterLine {
    std::string id;
    int crossover = -1;
    std::vector<int> sizes;
  };
  std::vector<ClusterLine> clusters;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;

    auto fail = [&](const std::string& m) {
      throw config_error("design file line " + std::to_string(lineno) + ": " + m);
    };

    if (line.rfind("cluster", 0) == 0 && (line.size() == 7 || line[7] == ' ' || line[7] == '\t')) {
      auto toks = split_ws(line);
      if (toks.size() < 3) fail("expected: cluster <id> crossover=<r> [sizes=<n1 ... nT>]");
      ClusterLine c;
      c.id = toks[1];
      for (size_t t = 2; t < toks.size(); ++t) {
        if (toks[t].rfind("crossover=", 0) == 0) {
          try {
            c.crossover = std::stoi(toks[t].substr(10));
          } catch (const std::exception&) {
            fail("bad crossover value");
          }
        } else if (toks[t].rfind("sizes=", 0) == 0) {
          std::string rest = toks[t].substr(6);
          for (size_t u = t + 1; u < toks.size(); ++u) rest += " " + toks[u];
          c.sizes = parse_ints(rest, "sizes");
          break;
        } else {
          fail("unknown token '" + toks[t] + "'");
        }
      }
      if (c.crossover < 0) fail("cluster line missing crossover=");
      clusters.push_back(std::move(c));
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "n_clusters") n_clusters = std::stoi(val);
      else if (key == "n_periods") n_periods = std::stoi(val);
      else if (key == "sequences") sequences = parse_ints(val, "sequences");
      else if (key == "allocation") allocation = parse_ints(val, "allocation");
      else fail("unknown key '" + key + "'");
    } catch (const config_error&) {
      throw;
    } catch (const std::exception&) {
      fail("bad value for '" + key + "'");
    }
  }

  if (n_clusters < 0) throw config_error("design file missing n_clusters");
  if (n_periods < 0) throw config_error("design file missing n_periods");
  if (sequences.empty()) throw config_error("design file missing sequences");
  if (allocation.empty()) throw config_error("design file missing allocation");
  if (!clusters.empty() && static_cast<int>(clusters.size()) != n_clusters)
    throw config_error("design file has " + std::to_string(clusters.size()) +
                       " cluster lines but n_clusters is " + std::to_string(n_clusters));

  Eigen::MatrixXi sizes;
  std::vector<std::string> ids;
  std::vector<int> crossovers;
  if (!clusters.empty()) {
    bool any_sizes = false;
    for (const auto& c : clusters) any_sizes |= !c.sizes.empty();
    if (any_sizes) sizes = Eigen::MatrixXi::Ones(n_clusters, n_periods);
    for (int i = 0; i < n_clusters; ++i) {
      ids.push_back(clusters[i].id);
      crossovers.push_back(clusters[i].crossover);
      if (!clusters[i].sizes.empty()) {
        if (static_cast<int>(clusters[i].sizes.size()) != n_periods)
          throw config_error("cluster '" + clusters[i].id + "' has " +
                             std::to_string(clusters[i].sizes.size()) +
                             " sizes, expected " + std::to_string(n_periods));
        for (int j = 0; j < n_periods; ++j) sizes(i, j) = clusters[i].sizes[j];
      }
    }
  }

  TrialLayout layout = build_layout(n_clusters, n_periods, sequences, allocation, sizes, ids);
  if (!crossovers.empty()) {
    // Observed crossovers must be consistent with the allocation counts.
    std::vector<int> counts(layout.n_sequences(), 0);
    for (int r : crossovers) counts[layout.sequence_index(r)]++;
    for (int s = 0; s < layout.n_sequences(); ++s)
      if (counts[s] != layout.allocation[s])
        throw config_error("observed crossovers give " + std::to_string(counts[s]) +
                           " clusters at time " + std::to_string(layout.sequences[s]) +
                           " but allocation says " + std::to_string(layout.allocation[s]));
    layout.observed_crossover = crossovers;
  }
  return layout;
}

TrialLayout read_design_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open design file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_design_text(buf.str());
}

std::string format_design_text(const TrialLayout& layout) {
  std::ostringstream out;
  out << "n_clusters = " << layout.n_clusters << "\n";
  out << "n_periods = " << layout.n_periods << "\n";
  out << "sequences =";
  for (int r : layout.sequences) out << " " << r;
  out << "\nallocation =";
  for (int c : layout.allocation) out << " " << c;
  out << "\n";
  if (layout.has_observed()) {
    for (int i = 0; i < layout.n_clusters; ++i) {
      out << "cluster " << layout.cluster_ids[i]
          << " crossover=" << layout.observed_crossover[i] << " sizes=";
      for (int j = 0; j < layout.n_periods; ++j) {
        if (j) out << " ";
        out << layout.cluster_sizes(i, j);
      }
      out << "\n";
    }
  }
  return out.str();
}

void write_design_file(const TrialLayout& layout, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write design file: " + path);
  out << format_design_text(layout);
}

} // namespace swd
