#pragma once

#include "krondpp/dpp_model.hpp"
#include "krondpp/rng.hpp"
#include "krondpp/types.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace krondpp {

// Sufficient statistic Theta = weighted sum of scattered subset-kernel
// inverses U_i L_{Y_i}^{-1} U_i^T. Dense storage is N x N; sparse storage
// keeps only the block over a sorted support (the union of the contributing
// subsets), at most z^2 entries for a union of size z.
class ThetaAccumulator {
 public:
  // Dense N x N accumulator initialized to zero.
  static ThetaAccumulator dense(Index ground_size);
  // Sparse accumulator over a sorted, duplicate-free support.
  static ThetaAccumulator sparse(Index ground_size, std::vector<Index> support);

  bool is_sparse() const { return sparse_; }
  Index ground_size() const { return ground_size_; }
  // Number of stored rows/columns: N when dense, |support| when sparse.
  Index stored_size() const { return block_.rows(); }
  const std::vector<Index>& support() const { return support_; }
  // Stored block: the full matrix when dense, the support block when sparse.
  const Matrix& block() const { return block_; }
  Index contributions() const { return contributions_; }

  // Adds weight * U L_y^{-1} U^T for one subset. The subset must lie inside
  // the support when sparse. `inv` is the |y| x |y| inverse.
  void add_scatter(const Subset& y, const Matrix& inv, double weight);
  void scale(double s) { block_ *= s; }

  // Entry in ground-set coordinates (0 outside the sparse support).
  double entry(Index i, Index j) const;
  // Dense N x N view (scatters the sparse block).
  Matrix densify() const;

 private:
  ThetaAccumulator(Index ground_size, std::vector<Index> support, bool sparse);
  Index position(Index ground_index) const;

  Index ground_size_;
  bool sparse_;
  std::vector<Index> support_;
  Matrix block_;
  Index contributions_ = 0;
};

// Full-sample statistic (1/n) sum_i U_i L_{Y_i}^{-1} U_i^T, dense.
ThetaAccumulator theta_batch(const KronKernel& k, const TrainingSet& t);

// Minibatch statistic (1/b) sum over the minibatch, sparse over the union
// of the minibatch subsets. Densified, it equals theta_batch restricted to
// the same subsets. Never allocates an N x N matrix.
ThetaAccumulator theta_sparse(const KronKernel& k, std::span<const Subset> minibatch);

enum class FitMode { kBatch, kStochastic };

struct FitConfig {
  double step_size = 1.0;      // Picard step a; a=1 guarantees batch ascent
  int max_iter = 100;
  FitMode mode = FitMode::kBatch;
  int minibatch_size = 1;      // stochastic mode only
  double tol = 1e-4;           // relative log-likelihood change for stopping
  std::uint64_t seed = 0;      // minibatch shuffling
  double pd_floor = 1e-10;     // positive definiteness margin for iterates
};

struct FitRecord {
  int iteration;           // 1-based
  double seconds;          // cumulative update time, excludes evaluation
  double log_likelihood;   // evaluated after the iteration, off the clock
  double min_eigenvalue;   // smallest eigenvalue over the stored iterate(s)
};

struct FitHistory {
  std::vector<FitRecord> records;
};

// Verifies min eigenvalue > floor via Cholesky of M - floor*I and returns
// the symmetrized matrix; throws NumericalError reporting the offending
// eigenvalue otherwise.
SpdMatrix check_pd(const Matrix& m, double floor);

// One dense fixed-point step L <- L + a L Delta L, with Delta recomputed
// from the training set. Throws NumericalError when the result is not
// positive definite with margin pd_floor.
SpdMatrix picard_step(const SpdMatrix& l, const TrainingSet& t, double a,
                      double pd_floor = 1e-10);
// Same step from a precomputed Delta (lets callers retry a halved step
// without recomputing the gradient).
SpdMatrix picard_step_with_delta(const SpdMatrix& l, const Matrix& delta, double a,
                                 double pd_floor = 1e-10);

// Factored fixed-point update of the first factor,
//   L1 <- L1 + (a/N2) * Tr_1((I (x) L2^{-1}) L Delta L),
// computed without materializing any N x N matrix:
//   Tr_1(...) = L1 A L1 - P1 diag(d1_k^2 alpha_k) P1^T,
//   A[r,s]    = tr(Theta_(rs) L2),
//   alpha_k   = sum_l d2_l / (1 + d1_k d2_l),
// where (d1, P1), (d2, P2) are the factor eigensystems. Accepts dense or
// sparse Theta. Cost O(z^2 + N1^3 + N2^3) for a sparse support of size z.
SpdMatrix krk_step_factor1(const SpdMatrix& l1, const SpdMatrix& l2,
                           const ThetaAccumulator& theta, double a,
                           double pd_floor = 1e-10);

// Factored update of the second factor,
//   L2 <- L2 + (a/N1) * Tr_2((L1^{-1} (x) I) L Delta L)
//       = L2 + (a/N1) * (L2 M2 L2 - P2 diag(d2_l^2 beta_l) P2^T),
//   M2[p,q] = sum_{i,j} L1[i,j] Theta_(ij)[p,q],
//   beta_l  = sum_k d1_k / (1 + d1_k d2_l).
SpdMatrix krk_step_factor2(const SpdMatrix& l1, const SpdMatrix& l2,
                           const ThetaAccumulator& theta, double a,
                           double pd_floor = 1e-10);

// One joint multiplicative update of both factors: forms M = L^{-1} + Delta
// densely (this path is O(max(N1,N2)^4)), rearranges it, extracts the
// leading singular triple (u, sigma, v) by power iteration, maps U = mat(u),
// V = mat(v), balances with
//   alpha = sgn(U_00) sqrt(sigma ||L2 V L2||_F / ||L1 U L1||_F),
// and steps
//   L1 <- L1 + a (alpha L1 U L1 - L1),
//   L2 <- L2 + a ((sigma/alpha) L2 V L2 - L2).
// At a = 1 the two updated factors have equal Frobenius norms.
std::pair<SpdMatrix, SpdMatrix> joint_picard_step(const SpdMatrix& l1, const SpdMatrix& l2,
                                                  const TrainingSet& t, double a,
                                                  double pd_floor = 1e-10);

// Core of the joint update applied to a caller-supplied M = L^{-1} + Delta.
// At a stationary point (Delta = 0) M is exactly a Kronecker product and the
// a = 1 step reproduces the joint kernel while equalizing the factor norms.
std::pair<SpdMatrix, SpdMatrix> joint_picard_step_from_m(const SpdMatrix& l1,
                                                         const SpdMatrix& l2,
                                                         const Matrix& m, double a,
                                                         double pd_floor = 1e-10);

// Fixed-point ascent on the factored kernel (two-factor kernels only).
// Batch mode recomputes Theta before each factor update; stochastic mode
// draws minibatches without replacement per epoch and reuses one sparse
// Theta for both factor updates. If a step loses positive definiteness it
// is retried with a halved step size (that step only). Batch mode stops on
// max_iter or relative log-likelihood change below tol; stochastic mode
// stops only on max_iter.
std::pair<KronKernel, FitHistory> fit_krk(const KronKernel& k0, const TrainingSet& t,
                                          const FitConfig& cfg);

// Dense baseline: the same driver around picard_step (batch only).
std::pair<SpdMatrix, FitHistory> fit_picard(const SpdMatrix& l0, const TrainingSet& t,
                                            const FitConfig& cfg);

// Joint multiplicative driver around joint_picard_step (batch only).
std::pair<KronKernel, FitHistory> fit_joint(const KronKernel& k0, const TrainingSet& t,
                                            const FitConfig& cfg);

// Random Gram-matrix kernel factor X^T X with X entries uniform on
// [0, sqrt(2)), filled row by row from the stream. Used for synthetic
// ground truth and random initialization.
Matrix random_gram_matrix(Index n, RngStream& rng);

}  // namespace krondpp
