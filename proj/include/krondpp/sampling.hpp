#pragma once

#include "krondpp/dpp_model.hpp"
#include "krondpp/rng.hpp"
#include "krondpp/types.hpp"

#include <vector>

namespace krondpp {

struct SampleReport {
  Subset subset;                  // drawn items, sorted ascending
  std::vector<Index> elementary;  // selected eigenvalue positions (phase 1)
  double phase1_seconds = 0.0;
  double phase2_seconds = 0.0;
};

// Phase 1 of the two-phase sampler: independently keeps position i with
// probability lambda_i / (1 + lambda_i), iterating positions in the order
// given (callers pass eigenvalues ascending). Exactly one uniform draw is
// consumed per eigenvalue regardless of the outcome, so streams stay aligned
// across kernels with equal spectra. Eigenvalues below 1e-14 are clamped to
// zero; values below -1e-14 raise NumericalError.
std::vector<Index> select_elementary(const Vector& values, RngStream& rng);

// Draws one subset from the process with the given dense eigensystem
// (values ascending). Phase 2 repeatedly picks an item i with probability
// proportional to the i-th squared row norm of the selected eigenvector
// basis, then eliminates coordinate i from the basis and restores
// orthonormality before the next pick.
SampleReport sample_dense(const EigenSystem& eig, RngStream& rng);

// Same draw from a factored kernel: phase 1 runs on the sorted joint
// eigenvalues (ascending, ties by joint index); phase 2 materializes only
// the |J| selected joint eigenvectors (an N x |J| block), never the joint
// kernel. Feeding sample_dense the system from materialize_sorted and the
// same seed yields the identical subset.
SampleReport sample_kron(const KronKernel& k, RngStream& rng);

// Exact distribution over all 2^N subsets by determinant enumeration;
// result[mask] is the probability of the subset whose members are the set
// bits of mask (bit i = item i). Guarded to N <= 20.
std::vector<double> enumerate_distribution(const KronKernel& k);

// Dense-kernel variant of the same enumeration.
std::vector<double> enumerate_distribution_dense(const Matrix& l);

// Expected sample size sum_i lambda_i / (1 + lambda_i).
double expected_sample_size(const Vector& values);

}  // namespace krondpp
