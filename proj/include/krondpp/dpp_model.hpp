#pragma once

#include "krondpp/kron_linalg.hpp"
#include "krondpp/types.hpp"

namespace krondpp {

// A subset of the ground set, stored as strictly increasing indices.
using Subset = std::vector<Index>;

// Kernel of the point-process model in factored form: the joint kernel is
// the Kronecker product of the stored factors and is never materialized by
// the factored code paths. Ground-set items are joint indices following
// index_join over the factor dimensions.
class KronKernel {
 public:
  explicit KronKernel(std::vector<SpdMatrix> factors);

  Index num_factors() const { return static_cast<Index>(factors_.size()); }
  Index dim() const { return dim_; }
  const SpdMatrix& factor(Index k) const { return factors_.at(static_cast<std::size_t>(k)); }
  const std::vector<SpdMatrix>& factors() const { return factors_; }
  const std::vector<Index>& dims() const { return dims_; }

  // Joint kernel entry: product of factor entries at the split indices.
  double entry(Index i, Index j) const;

  // Dense joint kernel, O(N^2) memory. For the dense baseline and small
  // problems only.
  Matrix materialize() const;

 private:
  std::vector<SpdMatrix> factors_;
  std::vector<Index> dims_;
  Index dim_;
};

// Observed subsets over a common ground set. Subsets are sorted on
// construction; duplicate indices within a subset and out-of-range indices
// are rejected. Empty subsets are representable programmatically.
class TrainingSet {
 public:
  TrainingSet(Index ground_size, std::vector<Subset> subsets);

  Index ground_size() const { return ground_size_; }
  Index count() const { return static_cast<Index>(subsets_.size()); }
  // Size of the largest subset (0 when the set is empty).
  Index max_subset_size() const;
  const std::vector<Subset>& subsets() const { return subsets_; }
  const Subset& subset(Index i) const { return subsets_.at(static_cast<std::size_t>(i)); }

 private:
  Index ground_size_;
  std::vector<Subset> subsets_;
};

// Principal submatrix of the joint kernel at rows/columns y, built from
// factor entries in O(|y|^2 m) without materializing the joint kernel.
Matrix kron_submatrix(const KronKernel& k, const Subset& y);

// log det(L + I) computed from factor eigenvalues: sum over joint
// eigenvalues of log(1 + prod_k d_k). O(N) after factor eigendecompositions.
double log_det_norm(const KronKernel& k);

// Mean log-likelihood of the training set:
//   (1/n) sum_i [log det L_{Y_i}] - log det(L + I).
// Uses the factored normalization term; per-subset determinants use Cholesky
// with one jitter retry for singular submatrices.
double log_likelihood(const KronKernel& k, const TrainingSet& t);

// Dense-kernel variant of the mean log-likelihood (baseline path).
double log_likelihood_dense(const SpdMatrix& l, const TrainingSet& t);

// Dense likelihood gradient factor
//   Delta = (1/n) sum_i U_i L_{Y_i}^{-1} U_i^T - (L + I)^{-1},
// where U_i scatters the |Y_i| x |Y_i| inverse into an N x N matrix.
// The result is symmetrized. O(N^3 + n kappa^3) time, O(N^2) memory.
Matrix grad_delta(const SpdMatrix& l, const TrainingSet& t);

// Marginal kernel K = L (L + I)^{-1}; principal minors of K give the
// inclusion probabilities P(A subset of Y) = det(K_A).
Matrix marginal_kernel(const SpdMatrix& l);

// Probability of drawing exactly y: det(L_y) / det(L + I). The empty subset
// gets 1 / det(L + I). Returns 0 when the submatrix determinant underflows
// to a non-positive value.
double subset_prob(const KronKernel& k, const Subset& y);

// log det of an observed submatrix: Cholesky, retried once with diagonal
// jitter 1e-10 * trace/|y| when the factorization fails (duplicate items in
// real data make exactly singular submatrices possible), then a hard
// NumericalError. 0 x 0 input gives 0.
double logdet_with_jitter(const Matrix& m);

// Inverse of an observed submatrix under the same jitter-retry policy.
Matrix inverse_with_jitter(const Matrix& m);

}  // namespace krondpp
