#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace krondpp {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Thrown when matrix/index shapes are inconsistent or an index is out of range.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when a numerical guarantee fails (loss of positive definiteness,
// factorization breakdown, non-convergence of an iterative method).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown on file-format and filesystem failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Symmetric positive definite matrix. Construction either validates the
// input (checked) or takes the caller's word for it (trusted); both paths
// symmetrize as (M + M^T)/2 to absorb round-off, so stored data is always
// exactly symmetric.
class SpdMatrix {
 public:
  // Validates approximate symmetry (relative infinity-norm asymmetry at most
  // 1e-12) and positive definiteness with margin `floor` (smallest eigenvalue
  // must exceed `floor`, verified via Cholesky of M - floor*I). Throws
  // DimensionError / NumericalError.
  static SpdMatrix checked(Matrix m, double floor = 0.0);

  // Symmetrizes without any definiteness check. For matrices produced by
  // operations that preserve positive definiteness by construction.
  static SpdMatrix trusted(Matrix m);

  const Matrix& mat() const { return mat_; }
  Index rows() const { return mat_.rows(); }
  double operator()(Index i, Index j) const { return mat_(i, j); }

 private:
  explicit SpdMatrix(Matrix m) : mat_(std::move(m)) {}
  Matrix mat_;
};

// Eigendecomposition of a symmetric matrix: values ascending, vectors holds
// the corresponding orthonormal eigenvectors as columns.
struct EigenSystem {
  Vector values;
  Matrix vectors;
};

// Eigendecomposition of a Kronecker product, kept in factored form: the
// joint matrix L_1 (x) ... (x) L_m has eigenvalues prod_k d_k(j_k) and
// eigenvectors (x)_k p_k(j_k) where (d_k, p_k) is the k-th factor system.
// The joint index of the multi-index (j_1, ..., j_m) follows the row-major
// convention joint = ((j_1*N_2 + j_2)*N_3 + j_3)... matching index_join.
struct KronEigenSystem {
  std::vector<EigenSystem> factors;
  std::vector<Index> dims;

  Index joint_size() const;
  // Eigenvalue of the given joint index: product over factors.
  double joint_value(Index joint) const;
  // Joint indices ordered by ascending eigenvalue, ties broken by joint
  // index so the order is deterministic.
  std::vector<Index> sorted_order() const;
  // Materializes one joint eigenvector (Kronecker product of the factor
  // columns selected by the joint index). O(N) time and memory.
  Vector joint_vector(Index joint) const;
};

}  // namespace krondpp
