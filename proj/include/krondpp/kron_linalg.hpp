#pragma once

#include "krondpp/types.hpp"

#include <span>

namespace krondpp {

// Dense Kronecker product a (x) b. Entry ((i1,i2),(j1,j2)) = a(i1,j1)*b(i2,j2)
// with the row-major joint index i = i1*rows(b) + i2.
Matrix kron_product(const Matrix& a, const Matrix& b);

// Partial trace over the second factor of an (n1*n2) x (n1*n2) matrix viewed
// as an n1 x n1 grid of n2 x n2 blocks M_(ij): returns the n1 x n1 matrix
// [tr M_(ij)]. Preserves positive semidefiniteness.
Matrix partial_trace_1(const Matrix& m, Index n1, Index n2);

// Partial trace over the first factor: the n2 x n2 sum of the diagonal
// blocks, sum_i M_(ii). Preserves positive semidefiniteness.
Matrix partial_trace_2(const Matrix& m, Index n1, Index n2);

// Eigendecomposition of a symmetric matrix. The input is symmetrized as
// (M + M^T)/2 before factoring to absorb round-off; grossly non-symmetric
// input (relative asymmetry above 1e-8) is rejected. Values ascend.
EigenSystem sym_eig(const Matrix& m);

// Factored eigendecomposition of L_1 (x) ... (x) L_m from the per-factor
// systems. Never materializes the joint matrix.
KronEigenSystem kron_eig(const std::vector<SpdMatrix>& factors);

// Materializes a KronEigenSystem as a dense system sorted ascending (ties
// broken by joint index). Intended for small dimensions.
EigenSystem materialize_sorted(const KronEigenSystem& kes);

// Rearrangement of an (n1*n2) x (n1*n2) matrix into the n1^2 x n2^2 matrix R
// whose row i*n1 + j is vec(M_(ij)), with vec stacking columns. R has rank 1
// exactly when M is a Kronecker product, and then sigma_1 = ||A||_F ||B||_F.
Matrix rearrange(const Matrix& m, Index n1, Index n2);

struct SingularPair {
  Vector u;
  double sigma = 0.0;
  Vector v;
};

// Leading singular triple (u, sigma, v) of a rectangular matrix by power
// iteration on R^T R, started from the normalized all-ones vector. Converged
// when ||R^T u - sigma v|| <= tol * sigma. The sign is fixed so the first
// coordinate of u with magnitude above 1e-14 is positive. Throws
// NumericalError if max_iter iterations do not converge.
SingularPair leading_singular_pair(const Matrix& r, double tol = 1e-10, int max_iter = 1000);

// Row-major mixed-radix flattening of a multi-index: for dims (N_1,...,N_m),
// joint = ((p_1*N_2 + p_2)*N_3 + p_3)... Throws DimensionError when a part
// is out of range.
Index index_join(std::span<const Index> parts, std::span<const Index> dims);

// Inverse of index_join.
std::vector<Index> index_split(Index joint, std::span<const Index> dims);

// Log-determinant of a symmetric positive definite matrix via Cholesky.
// Throws NumericalError if the factorization fails. 0 x 0 input gives 0.
double logdet_spd(const Matrix& m);

// Inverse of a symmetric positive definite matrix via Cholesky; result is
// symmetrized. Throws NumericalError if the factorization fails.
Matrix inverse_spd(const Matrix& m);

// Smallest eigenvalue. Exact (full symmetric eigensolver) up to dimension
// 512; beyond that, estimated by power iteration for the dominant eigenvalue
// followed by a second power iteration on the shifted complement, so large
// kernels avoid the full O(N^3) eigendecomposition.
double min_eigenvalue(const Matrix& m);

}  // namespace krondpp
