#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "swd/errors.hpp"
#include "swd/inference.hpp"
#include "swd/layout.hpp"

using namespace swd;

namespace {

// The benchmark design: 10 clusters, 5 periods, crossover times 2..5 with
// allocation (3, 3, 2, 2).
TrialLayout benchmark_layout() {
  return build_layout(10, 5, {2, 3, 4, 5}, {3, 3, 2, 2});
}

}  // namespace

TEST_CASE("build_layout validates and canonicalizes") {
  TrialLayout l = benchmark_layout();
  CHECK(l.n_clusters == 10);
  CHECK(l.n_periods == 5);
  CHECK(l.n_sequences() == 4);
  CHECK(l.cluster_sizes.rows() == 10);
  CHECK(l.cluster_sizes.cols() == 5);
  CHECK(l.cluster_sizes.minCoeff() == 1);  // defaults to one per cell
  CHECK(l.cluster_obs(0) == 5);
  CHECK(l.sequence_index(2) == 0);
  CHECK(l.sequence_index(5) == 3);
  CHECK_THROWS_AS((void)l.sequence_index(6), config_error);

  // Minimal valid design.
  TrialLayout tiny = build_layout(2, 3, {2, 3}, {1, 1});
  CHECK(tiny.n_sequences() == 2);

  // Allocation must sum to the cluster count.
  CHECK_THROWS_AS(build_layout(10, 5, {2, 3, 4, 5}, {3, 3, 2, 3}), config_error);
  // Crossover times must lie in [2, T].
  CHECK_THROWS_AS(build_layout(4, 3, {1, 2}, {2, 2}), config_error);
  CHECK_THROWS_AS(build_layout(4, 3, {2, 4}, {2, 2}), config_error);

  // Duplicate crossover times merge with summed allocation.
  TrialLayout merged = build_layout(6, 4, {2, 3, 3}, {2, 2, 2});
  CHECK(merged.n_sequences() == 2);
  CHECK(merged.sequences == std::vector<int>{2, 3});
  CHECK(merged.allocation == std::vector<int>{2, 4});
}

TEST_CASE("treatment_path is zero before crossover, one after") {
  TrialLayout l = benchmark_layout();
  CHECK(treatment_path(l, 2) == std::vector<int>{0, 1, 1, 1, 1});
  CHECK(treatment_path(l, 5) == std::vector<int>{0, 0, 0, 0, 1});
  TrialLayout tiny = build_layout(2, 3, {2, 3}, {1, 1});
  CHECK(treatment_path(tiny, 3) == std::vector<int>{0, 0, 1});

  // Monotone nondecreasing for every admissible crossover.
  for (int r : l.sequences) {
    std::vector<int> x = treatment_path(l, r);
    CHECK(std::is_sorted(x.begin(), x.end()));
    CHECK(x.front() == 0);
    CHECK(x.back() == 1);
  }
}

TEST_CASE("assignment_distribution: exact marginals and pairwise") {
  TrialLayout l = benchmark_layout();
  AssignmentDistribution d = assignment_distribution(l);

  CHECK(d.marginal.size() == 4);
  CHECK(d.marginal[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(d.marginal[1] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(d.marginal[2] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(d.marginal[3] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(d.marginal.sum() == doctest::Approx(1.0).epsilon(1e-12));

  // q_{s,s'} = c_s (c_{s'} - [s = s']) / (N (N - 1)).
  CHECK(d.pairwise(0, 0) == doctest::Approx(3.0 * 2.0 / 90.0).epsilon(1e-12));  // 1/15
  CHECK(d.pairwise(0, 1) == doctest::Approx(3.0 * 3.0 / 90.0).epsilon(1e-12));  // 1/10
  CHECK(d.pairwise(2, 2) == doctest::Approx(2.0 * 1.0 / 90.0).epsilon(1e-12));
  CHECK(d.pairwise(2, 3) == doctest::Approx(2.0 * 2.0 / 90.0).epsilon(1e-12));
  CHECK(d.pairwise.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((d.pairwise - d.pairwise.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  // Row sums of the pairwise matrix recover the marginals.
  for (int s = 0; s < 4; ++s)
    CHECK(d.pairwise.row(s).sum() == doctest::Approx(d.marginal[s]).epsilon(1e-12));

  // Two clusters, one per sequence: the pair is forced onto distinct sequences.
  TrialLayout tiny = build_layout(2, 3, {2, 3}, {1, 1});
  AssignmentDistribution dt = assignment_distribution(tiny);
  CHECK(dt.marginal[0] == doctest::Approx(0.5));
  CHECK(dt.pairwise(0, 0) == doctest::Approx(0.0));
  CHECK(dt.pairwise(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("assignment_distribution matches brute-force enumeration") {
  TrialLayout l = build_layout(7, 4, {2, 3, 4}, {3, 2, 2});
  AssignmentDistribution d = assignment_distribution(l);
  std::vector<std::vector<int>> all = enumerate_assignments(l);
  // Multinomial count 7! / (3! 2! 2!) = 210.
  CHECK(all.size() == 210);

  Eigen::VectorXd marg = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd pair = Eigen::MatrixXd::Zero(3, 3);
  for (const std::vector<int>& a : all) {
    marg[l.sequence_index(a[0])] += 1.0;
    pair(l.sequence_index(a[0]), l.sequence_index(a[1])) += 1.0;
  }
  marg /= double(all.size());
  pair /= double(all.size());
  CHECK((marg - d.marginal).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((pair - d.pairwise).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("leave_one_out_distribution removes one cluster's sequence slot") {
  TrialLayout l = benchmark_layout();
  l.observed_crossover = {2, 2, 2, 3, 3, 3, 4, 4, 5, 5};

  // Dropping a crossover-3 cluster leaves counts (3, 2, 2, 2) over 9 clusters.
  AssignmentDistribution d3 = leave_one_out_distribution(l, 3);
  CHECK(d3.marginal[0] == doctest::Approx(3.0 / 9.0).epsilon(1e-12));
  CHECK(d3.marginal[1] == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  CHECK(d3.marginal[2] == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  CHECK(d3.marginal[3] == doctest::Approx(2.0 / 9.0).epsilon(1e-12));

  // Dropping a crossover-2 cluster leaves counts (2, 3, 2, 2).
  AssignmentDistribution d0 = leave_one_out_distribution(l, 0);
  CHECK(d0.marginal[0] == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  CHECK(d0.marginal[1] == doctest::Approx(3.0 / 9.0).epsilon(1e-12));

  // Two clusters: removing one makes the other's sequence deterministic.
  TrialLayout tiny = build_layout(2, 3, {2, 3}, {1, 1});
  tiny.observed_crossover = {2, 3};
  AssignmentDistribution dt = leave_one_out_distribution(tiny, 0);
  CHECK(dt.marginal[0] == doctest::Approx(0.0));
  CHECK(dt.marginal[1] == doctest::Approx(1.0));
}

TEST_CASE("period_offset indexes stacked cluster vectors") {
  Eigen::MatrixXi sizes(2, 3);
  sizes << 2, 3, 4, 1, 1, 1;
  TrialLayout l = build_layout(2, 3, {2, 3}, {1, 1}, sizes);
  CHECK(l.cluster_obs(0) == 9);
  CHECK(l.cluster_obs(1) == 3);
  CHECK(l.period_offset(0, 0) == 0);
  CHECK(l.period_offset(0, 1) == 2);
  CHECK(l.period_offset(0, 2) == 5);
  CHECK(l.period_offset(1, 2) == 2);
}

TEST_CASE("design text round trip") {
  TrialLayout l = benchmark_layout();
  l.observed_crossover = {2, 2, 2, 3, 3, 3, 4, 4, 5, 5};
  std::string text = format_design_text(l);
  TrialLayout back = parse_design_text(text);
  CHECK(back.n_clusters == l.n_clusters);
  CHECK(back.n_periods == l.n_periods);
  CHECK(back.sequences == l.sequences);
  CHECK(back.allocation == l.allocation);
  CHECK(back.observed_crossover == l.observed_crossover);
  CHECK(back.cluster_sizes == l.cluster_sizes);

  // Comments and blank lines are ignored.
  TrialLayout commented = parse_design_text(
      "# benchmark design\n"
      "n_clusters = 4\n\n"
      "n_periods = 3  # three periods\n"
      "sequences = 2 3\n"
      "allocation = 2 2\n");
  CHECK(commented.n_clusters == 4);
  CHECK(commented.n_sequences() == 2);

  CHECK_THROWS_AS(parse_design_text("n_clusters = 4\n"), config_error);
}
