#pragma once

#include "krondpp/dpp_model.hpp"
#include "krondpp/learning.hpp"
#include "krondpp/types.hpp"

#include <vector>

namespace krondpp {

// Assignment of training subsets to groups whose unions stay below a size
// budget z, so per-group statistics fit in at most z^2 stored entries.
struct PartitionPlan {
  Index z = 0;
  std::vector<std::vector<Index>> groups;  // subset indices per group
  std::vector<Subset> unions;              // sorted union of each group
};

// Greedy first-fit partition: subsets are visited in order of decreasing
// size (ties by original index) and placed into the first group whose union
// would stay strictly below z; otherwise a new group is opened. Requires
// z > max |Y_i|. An empty training set yields an empty plan.
PartitionPlan greedy_partition(const TrainingSet& t, Index z);

// Per-group unnormalized statistics Theta_k = sum_{Y_i in group k}
// U_i L_{Y_i}^{-1} U_i^T, each sparse over its group union. Dividing the sum
// of densified group statistics by n recovers theta_batch exactly.
std::vector<ThetaAccumulator> theta_grouped(const KronKernel& k, const TrainingSet& t,
                                            const PartitionPlan& plan);

}  // namespace krondpp
