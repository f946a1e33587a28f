#include "krondpp/partitioning.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace krondpp {

PartitionPlan greedy_partition(const TrainingSet& t, Index z) {
  if (z < 1) throw DimensionError("greedy_partition: z must be positive");
  if (t.max_subset_size() >= z) {
    std::ostringstream msg;
    msg << "greedy_partition: z = " << z << " must exceed the largest subset size "
        << t.max_subset_size();
    throw DimensionError(msg.str());
  }

  PartitionPlan plan;
  plan.z = z;

  // Visit subsets largest first; ties keep the original order.
  std::vector<Index> order(static_cast<std::size_t>(t.count()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return t.subset(a).size() > t.subset(b).size();
  });

  for (Index idx : order) {
    const Subset& y = t.subset(idx);
    bool placed = false;
    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
      Subset merged;
      merged.reserve(plan.unions[g].size() + y.size());
      std::set_union(plan.unions[g].begin(), plan.unions[g].end(), y.begin(), y.end(),
                     std::back_inserter(merged));
      if (static_cast<Index>(merged.size()) < z) {
        plan.groups[g].push_back(idx);
        plan.unions[g] = std::move(merged);
        placed = true;
        break;
      }
    }
    if (!placed) {
      plan.groups.push_back({idx});
      plan.unions.push_back(y);
    }
  }
  return plan;
}

std::vector<ThetaAccumulator> theta_grouped(const KronKernel& k, const TrainingSet& t,
                                            const PartitionPlan& plan) {
  if (t.ground_size() != k.dim())
    throw DimensionError("theta_grouped: training set ground size does not match kernel dimension");
  // The plan must assign every subset exactly once.
  std::vector<int> seen(static_cast<std::size_t>(t.count()), 0);
  for (const auto& group : plan.groups)
    for (Index idx : group) {
      if (idx < 0 || idx >= t.count())
        throw DimensionError("theta_grouped: plan references a subset outside the training set");
      ++seen[static_cast<std::size_t>(idx)];
    }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i] != 1)
      throw DimensionError("theta_grouped: plan must cover every subset exactly once");

  std::vector<ThetaAccumulator> out;
  out.reserve(plan.groups.size());
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    ThetaAccumulator theta = ThetaAccumulator::sparse(k.dim(), plan.unions[g]);
    for (Index idx : plan.groups[g])
      theta.add_scatter(t.subset(idx), inverse_with_jitter(kron_submatrix(k, t.subset(idx))), 1.0);
    out.push_back(std::move(theta));
  }
  return out;
}

}  // namespace krondpp
