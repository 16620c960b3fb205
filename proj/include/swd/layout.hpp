#ifndef SWD_LAYOUT_HPP
#define SWD_LAYOUT_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace swd {

// Randomization design of a stepped wedge trial: N clusters, T periods,
// S distinct crossover times with fixed per-sequence allocation counts.
// Immutable after construction.
struct TrialLayout {
  int n_clusters = 0;
  int n_periods = 0;
  std::vector<int> sequences;   // distinct crossover times, ascending, each in [2, T]
  std::vector<int> allocation;  // clusters per sequence, sums to n_clusters
  Eigen::MatrixXi cluster_sizes;            // N x T, all >= 1
  std::vector<int> observed_crossover;      // length N once data attached, else empty
  std::vector<std::string> cluster_ids;     // length N

  int n_sequences() const { return static_cast<int>(sequences.size()); }
  bool has_observed() const { return !observed_crossover.empty(); }

  // Total observations in cluster i across all periods.
  int cluster_obs(int cluster) const;

  // Index into sequences/allocation for a crossover time; throws if absent.
  int sequence_index(int crossover) const;

  // Row offset of (cluster, period) within the cluster's stacked vector.
  int period_offset(int cluster, int period) const;
};

// Exact marginal and pairwise sequence probabilities under uniform
// permutation of cluster-to-sequence labels with fixed counts.
struct AssignmentDistribution {
  Eigen::VectorXd marginal;  // S
  Eigen::MatrixXd pairwise;  // S x S, ordered distinct cluster pairs
};

// Validates and canonicalizes a layout. Duplicate crossover times are merged
// with summed allocation. cluster_sizes may be empty (defaults to all 1) or
// N x T. Throws config_error on violated invariants.
TrialLayout build_layout(int n_clusters, int n_periods,
                         const std::vector<int>& sequences,
                         const std::vector<int>& allocation,
                         const Eigen::MatrixXi& cluster_sizes = Eigen::MatrixXi(),
                         const std::vector<std::string>& cluster_ids = {});

// Binary treatment indicators (X_1,...,X_T) for a given crossover time:
// zero before crossover, one from crossover onward.
std::vector<int> treatment_path(const TrialLayout& layout, int crossover);

AssignmentDistribution assignment_distribution(const TrialLayout& layout);

// Distribution over the remaining N-1 clusters after removing drop_cluster,
// with its sequence count reduced by one. Requires observed crossovers.
AssignmentDistribution leave_one_out_distribution(const TrialLayout& layout,
                                                  int drop_cluster);

// Key-value design file (see README for the grammar).
TrialLayout read_design_file(const std::string& path);
void write_design_file(const TrialLayout& layout, const std::string& path);
TrialLayout parse_design_text(const std::string& text);
std::string format_design_text(const TrialLayout& layout);

} // namespace swd

#endif
