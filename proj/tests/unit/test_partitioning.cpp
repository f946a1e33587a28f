#include <doctest.h>

#include <krondpp/dpp_model.hpp>
#include <krondpp/learning.hpp>
#include <krondpp/partitioning.hpp>
#include <krondpp/rng.hpp>
#include <krondpp/sampling.hpp>
#include <krondpp/synth.hpp>
#include <krondpp/types.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "test_helpers.hpp"

using namespace krondpp;
using krondpp::test::max_abs_diff;

namespace {

// Checks the structural invariants every plan must satisfy.
void check_plan(const TrainingSet& t, const PartitionPlan& plan) {
  REQUIRE(plan.groups.size() == plan.unions.size());

  std::vector<int> seen(static_cast<std::size_t>(t.count()), 0);
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    CHECK_FALSE(plan.groups[g].empty());
    std::set<Index> expected_union;
    for (Index idx : plan.groups[g]) {
      REQUIRE(idx >= 0);
      REQUIRE(idx < t.count());
      ++seen[static_cast<std::size_t>(idx)];
      const Subset& y = t.subset(idx);
      expected_union.insert(y.begin(), y.end());
    }
    // The stored union is sorted, duplicate-free, and strictly within budget.
    const Subset& u = plan.unions[g];
    CHECK(std::is_sorted(u.begin(), u.end()));
    CHECK(Subset(expected_union.begin(), expected_union.end()) == u);
    CHECK(static_cast<Index>(u.size()) < plan.z);
  }
  // Every subset appears in exactly one group.
  for (int count : seen) CHECK(count == 1);
}

}  // namespace

TEST_CASE("greedy_partition worked example") {
  const TrainingSet t(8, {{0, 1}, {1, 2}, {5, 6}});
  const PartitionPlan plan = greedy_partition(t, 4);
  check_plan(t, plan);

  // All sizes tie at 2, so visiting order is the original order: the first
  // two subsets share a group (union {0,1,2} fits under 4), the third opens
  // a second group. Two groups is also the optimum, since the total union
  // has 5 elements and no single group may reach 4.
  REQUIRE(plan.groups.size() == 2);
  CHECK(plan.groups[0] == std::vector<Index>{0, 1});
  CHECK(plan.groups[1] == std::vector<Index>{2});
  CHECK(plan.unions[0] == Subset{0, 1, 2});
  CHECK(plan.unions[1] == Subset{5, 6});
}

TEST_CASE("greedy_partition visits subsets by decreasing size") {
  // The size-3 subset is visited first despite appearing last, so it seeds
  // the first group.
  const TrainingSet t(10, {{0}, {1, 2}, {4, 5, 6}});
  const PartitionPlan plan = greedy_partition(t, 5);
  check_plan(t, plan);
  REQUIRE_FALSE(plan.groups.empty());
  CHECK(plan.groups[0].front() == 2);
}

TEST_CASE("greedy_partition validates the budget") {
  const TrainingSet t(8, {{0, 1, 2}});
  CHECK_THROWS_AS(greedy_partition(t, 3), DimensionError);  // needs z > max size
  CHECK_THROWS_AS(greedy_partition(t, 0), DimensionError);
  CHECK_NOTHROW(greedy_partition(t, 4));
}

TEST_CASE("greedy_partition of an empty training set is empty") {
  const TrainingSet t(8, {});
  const PartitionPlan plan = greedy_partition(t, 4);
  CHECK(plan.groups.empty());
  CHECK(plan.unions.empty());
  CHECK(plan.z == 4);
}

TEST_CASE("greedy_partition invariants hold on random instances") {
  RngStream rng(101);
  std::vector<Index> dims{3, 4};
  const KronKernel truth = synth_kernel(dims, rng);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Subset> subsets;
    const Index n = 5 + static_cast<Index>(rng.uniform_index(15));
    while (static_cast<Index>(subsets.size()) < n) {
      Subset y = sample_kron(truth, rng).subset;
      if (!y.empty()) subsets.push_back(std::move(y));
    }
    const TrainingSet t(12, std::move(subsets));
    const Index z = t.max_subset_size() + 1 + static_cast<Index>(rng.uniform_index(6));
    const PartitionPlan plan = greedy_partition(t, z);
    check_plan(t, plan);

    // Storage stays within groups * z^2 entries by construction.
    Index stored = 0;
    for (const Subset& u : plan.unions) stored += static_cast<Index>(u.size() * u.size());
    CHECK(stored <= static_cast<Index>(plan.groups.size()) * z * z);
  }
}

TEST_CASE("theta_grouped reassembles the batch statistic") {
  RngStream rng(102);
  std::vector<Index> dims{3, 4};
  const KronKernel k = synth_kernel(dims, rng);
  std::vector<Subset> subsets;
  while (subsets.size() < 9) {
    Subset y = sample_kron(k, rng).subset;
    if (!y.empty()) subsets.push_back(std::move(y));
  }
  const TrainingSet t(12, std::move(subsets));
  const PartitionPlan plan = greedy_partition(t, t.max_subset_size() + 2);
  const std::vector<ThetaAccumulator> groups = theta_grouped(k, t, plan);

  REQUIRE(groups.size() == plan.groups.size());
  Matrix total = Matrix::Zero(12, 12);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    CHECK(groups[g].is_sparse());
    CHECK(groups[g].support() == plan.unions[g]);
    CHECK(groups[g].contributions() == static_cast<Index>(plan.groups[g].size()));
    total += groups[g].densify();
  }
  // Group statistics are unnormalized; dividing the sum by n recovers the
  // batch statistic exactly.
  total /= static_cast<double>(t.count());
  CHECK(max_abs_diff(total, theta_batch(k, t).densify()) < 1e-14);
}

TEST_CASE("theta_grouped rejects plans that do not cover the training set") {
  RngStream rng(103);
  std::vector<Index> dims{2, 3};
  const KronKernel k = synth_kernel(dims, rng);
  const TrainingSet t(6, {{0, 1}, {2}, {3, 5}});
  PartitionPlan plan = greedy_partition(t, 4);

  PartitionPlan missing = plan;
  REQUIRE_FALSE(missing.groups.empty());
  missing.groups.back().pop_back();
  CHECK_THROWS_AS(theta_grouped(k, t, missing), DimensionError);

  PartitionPlan duplicated = plan;
  duplicated.groups.front().push_back(duplicated.groups.front().front());
  CHECK_THROWS_AS(theta_grouped(k, t, duplicated), DimensionError);
}
