#include "krondpp/learning.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace krondpp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Retries a positive-definiteness-violating step with a halved step size,
// affecting the current step only.
template <typename Fn>
auto step_with_retry(Fn&& fn, double a, int iteration, const char* what)
    -> decltype(fn(a)) {
  constexpr int kMaxHalvings = 40;
  for (int h = 0;; ++h) {
    try {
      return fn(a);
    } catch (const NumericalError& e) {
      if (h >= kMaxHalvings) {
        std::ostringstream msg;
        msg << what << " failed at iteration " << iteration
            << " after exhausting step-size halvings: " << e.what();
        throw NumericalError(msg.str());
      }
      a *= 0.5;
    }
  }
}

void validate_fit_inputs(Index kernel_dim, const TrainingSet& t, const FitConfig& cfg) {
  if (t.ground_size() != kernel_dim)
    throw DimensionError("fit: training set ground size does not match kernel dimension");
  if (t.count() < 1) throw DimensionError("fit: training set must be non-empty");
  if (cfg.max_iter < 0) throw DimensionError("fit: max_iter must be non-negative");
  if (!(cfg.step_size > 0.0)) throw DimensionError("fit: step size must be positive");
  if (cfg.tol < 0.0) throw DimensionError("fit: tol must be non-negative");
  if (cfg.mode == FitMode::kStochastic && cfg.minibatch_size < 1)
    throw DimensionError("fit: minibatch size must be positive");
}

bool converged(double phi, double phi_prev, double tol) {
  return std::abs(phi - phi_prev) < tol * std::max(std::abs(phi_prev), 1e-30);
}

// Without-replacement minibatch scheduler: reshuffles the subset order at
// each epoch boundary; the final chunk of an epoch may be smaller than the
// requested minibatch size.
class MinibatchScheduler {
 public:
  MinibatchScheduler(Index count, Index batch, std::uint64_t seed)
      : count_(count), batch_(batch), rng_(seed), order_(static_cast<std::size_t>(count)) {
    for (Index i = 0; i < count_; ++i) order_[static_cast<std::size_t>(i)] = i;
    cursor_ = count_;  // force a shuffle on first use
  }

  std::vector<Index> next() {
    if (cursor_ >= count_) {
      for (Index i = count_ - 1; i > 0; --i) {
        const Index j = rng_.uniform_index(i + 1);
        std::swap(order_[static_cast<std::size_t>(i)], order_[static_cast<std::size_t>(j)]);
      }
      cursor_ = 0;
    }
    const Index take = std::min(batch_, count_ - cursor_);
    std::vector<Index> chunk(order_.begin() + cursor_, order_.begin() + cursor_ + take);
    cursor_ += take;
    return chunk;
  }

 private:
  Index count_;
  Index batch_;
  RngStream rng_;
  std::vector<Index> order_;
  Index cursor_;
};

}  // namespace

ThetaAccumulator::ThetaAccumulator(Index ground_size, std::vector<Index> support, bool sparse)
    : ground_size_(ground_size), sparse_(sparse), support_(std::move(support)) {
  const Index s = sparse_ ? static_cast<Index>(support_.size()) : ground_size_;
  block_ = Matrix::Zero(s, s);
}

ThetaAccumulator ThetaAccumulator::dense(Index ground_size) {
  if (ground_size < 1) throw DimensionError("ThetaAccumulator: ground set must be non-empty");
  return ThetaAccumulator(ground_size, {}, false);
}

ThetaAccumulator ThetaAccumulator::sparse(Index ground_size, std::vector<Index> support) {
  if (ground_size < 1) throw DimensionError("ThetaAccumulator: ground set must be non-empty");
  for (std::size_t a = 0; a < support.size(); ++a) {
    if (support[a] < 0 || support[a] >= ground_size)
      throw DimensionError("ThetaAccumulator: support index out of range");
    if (a > 0 && support[a] <= support[a - 1])
      throw DimensionError("ThetaAccumulator: support must be strictly increasing");
  }
  return ThetaAccumulator(ground_size, std::move(support), true);
}

Index ThetaAccumulator::position(Index ground_index) const {
  if (ground_index < 0 || ground_index >= ground_size_)
    throw DimensionError("ThetaAccumulator: index out of range");
  if (!sparse_) return ground_index;
  const auto it = std::lower_bound(support_.begin(), support_.end(), ground_index);
  if (it == support_.end() || *it != ground_index)
    throw DimensionError("ThetaAccumulator: index outside the sparse support");
  return static_cast<Index>(it - support_.begin());
}

void ThetaAccumulator::add_scatter(const Subset& y, const Matrix& inv, double weight) {
  const Index s = static_cast<Index>(y.size());
  if (inv.rows() != s || inv.cols() != s)
    throw DimensionError("ThetaAccumulator: inverse block does not match subset size");
  std::vector<Index> pos(static_cast<std::size_t>(s));
  for (Index a = 0; a < s; ++a) pos[static_cast<std::size_t>(a)] = position(y[static_cast<std::size_t>(a)]);
  for (Index a = 0; a < s; ++a)
    for (Index b = 0; b < s; ++b)
      block_(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]) += weight * inv(a, b);
  ++contributions_;
}

double ThetaAccumulator::entry(Index i, Index j) const {
  if (i < 0 || i >= ground_size_ || j < 0 || j >= ground_size_)
    throw DimensionError("ThetaAccumulator: index out of range");
  if (!sparse_) return block_(i, j);
  const auto find = [&](Index g) -> Index {
    const auto it = std::lower_bound(support_.begin(), support_.end(), g);
    if (it == support_.end() || *it != g) return -1;
    return static_cast<Index>(it - support_.begin());
  };
  const Index pi = find(i);
  const Index pj = find(j);
  if (pi < 0 || pj < 0) return 0.0;
  return block_(pi, pj);
}

Matrix ThetaAccumulator::densify() const {
  if (!sparse_) return block_;
  Matrix out = Matrix::Zero(ground_size_, ground_size_);
  const Index s = static_cast<Index>(support_.size());
  for (Index r = 0; r < s; ++r)
    for (Index c = 0; c < s; ++c)
      out(support_[static_cast<std::size_t>(r)], support_[static_cast<std::size_t>(c)]) = block_(r, c);
  return out;
}

ThetaAccumulator theta_batch(const KronKernel& k, const TrainingSet& t) {
  if (t.ground_size() != k.dim())
    throw DimensionError("theta_batch: training set ground size does not match kernel dimension");
  if (t.count() < 1) throw DimensionError("theta_batch: training set must be non-empty");
  ThetaAccumulator theta = ThetaAccumulator::dense(k.dim());
  const double weight = 1.0 / static_cast<double>(t.count());
  for (const Subset& y : t.subsets())
    theta.add_scatter(y, inverse_with_jitter(kron_submatrix(k, y)), weight);
  return theta;
}

ThetaAccumulator theta_sparse(const KronKernel& k, std::span<const Subset> minibatch) {
  if (minibatch.empty()) throw DimensionError("theta_sparse: minibatch must be non-empty");
  std::vector<Index> support;
  for (const Subset& y : minibatch) support.insert(support.end(), y.begin(), y.end());
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  ThetaAccumulator theta = ThetaAccumulator::sparse(k.dim(), std::move(support));
  const double weight = 1.0 / static_cast<double>(minibatch.size());
  for (const Subset& y : minibatch)
    theta.add_scatter(y, inverse_with_jitter(kron_submatrix(k, y)), weight);
  return theta;
}

SpdMatrix check_pd(const Matrix& m, double floor) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw DimensionError("check_pd: matrix must be square and non-empty");
  Matrix sym = 0.5 * (m + m.transpose());
  Matrix shifted = sym;
  shifted.diagonal().array() -= floor;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "check_pd: positive definiteness lost (smallest eigenvalue approximately "
        << min_eigenvalue(sym) << ", required margin " << floor << ")";
    throw NumericalError(msg.str());
  }
  return SpdMatrix::trusted(std::move(sym));
}

SpdMatrix picard_step_with_delta(const SpdMatrix& l, const Matrix& delta, double a,
                                 double pd_floor) {
  if (delta.rows() != l.rows() || delta.cols() != l.rows())
    throw DimensionError("picard_step: gradient dimension mismatch");
  Matrix next = l.mat() + a * (l.mat() * delta * l.mat());
  return check_pd(next, pd_floor);
}

SpdMatrix picard_step(const SpdMatrix& l, const TrainingSet& t, double a, double pd_floor) {
  return picard_step_with_delta(l, grad_delta(l, t), a, pd_floor);
}

namespace {

void validate_krk_theta(const SpdMatrix& l1, const SpdMatrix& l2, const ThetaAccumulator& theta) {
  if (theta.ground_size() != l1.rows() * l2.rows())
    throw DimensionError("krk step: Theta ground size does not match factor dimensions");
}

}  // namespace

SpdMatrix krk_step_factor1(const SpdMatrix& l1, const SpdMatrix& l2,
                           const ThetaAccumulator& theta, double a, double pd_floor) {
  validate_krk_theta(l1, l2, theta);
  const Index n1 = l1.rows();
  const Index n2 = l2.rows();
  const EigenSystem e1 = sym_eig(l1.mat());
  const EigenSystem e2 = sym_eig(l2.mat());

  // A[r,s] = tr(Theta_(rs) L2), assembled blockwise (dense Theta) or entry
  // by entry over the stored support (sparse Theta).
  Matrix A = Matrix::Zero(n1, n1);
  if (!theta.is_sparse()) {
    const Matrix& th = theta.block();
    for (Index k = 0; k < n1; ++k)
      for (Index l = 0; l < n1; ++l)
        A(k, l) = th.block(k * n2, l * n2, n2, n2).cwiseProduct(l2.mat()).sum();
  } else {
    const std::vector<Index>& sup = theta.support();
    const Index s = static_cast<Index>(sup.size());
    const Matrix& th = theta.block();
    for (Index r = 0; r < s; ++r) {
      const Index p1 = sup[static_cast<std::size_t>(r)] / n2;
      const Index p2 = sup[static_cast<std::size_t>(r)] % n2;
      for (Index c = 0; c < s; ++c) {
        const Index q1 = sup[static_cast<std::size_t>(c)] / n2;
        const Index q2 = sup[static_cast<std::size_t>(c)] % n2;
        A(p1, q1) += th(r, c) * l2(q2, p2);
      }
    }
  }

  // Normalization part: P1 diag(d1_k^2 alpha_k) P1^T with
  // alpha_k = sum_l d2_l / (1 + d1_k d2_l).
  Vector diag(n1);
  for (Index k = 0; k < n1; ++k) {
    const double d1 = e1.values(k);
    double alpha = 0.0;
    for (Index l = 0; l < n2; ++l) {
      const double d2 = e2.values(l);
      alpha += d2 / (1.0 + d1 * d2);
    }
    diag(k) = d1 * d1 * alpha;
  }
  const Matrix b = e1.vectors * diag.asDiagonal() * e1.vectors.transpose();

  Matrix next = l1.mat() + (a / static_cast<double>(n2)) * (l1.mat() * A * l1.mat() - b);
  return check_pd(next, pd_floor);
}

SpdMatrix krk_step_factor2(const SpdMatrix& l1, const SpdMatrix& l2,
                           const ThetaAccumulator& theta, double a, double pd_floor) {
  validate_krk_theta(l1, l2, theta);
  const Index n1 = l1.rows();
  const Index n2 = l2.rows();
  const EigenSystem e1 = sym_eig(l1.mat());
  const EigenSystem e2 = sym_eig(l2.mat());

  // M2 = sum_{i,j} L1[i,j] Theta_(ij).
  Matrix m2 = Matrix::Zero(n2, n2);
  if (!theta.is_sparse()) {
    const Matrix& th = theta.block();
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n1; ++j)
        m2 += l1(i, j) * th.block(i * n2, j * n2, n2, n2);
  } else {
    const std::vector<Index>& sup = theta.support();
    const Index s = static_cast<Index>(sup.size());
    const Matrix& th = theta.block();
    for (Index r = 0; r < s; ++r) {
      const Index p1 = sup[static_cast<std::size_t>(r)] / n2;
      const Index p2 = sup[static_cast<std::size_t>(r)] % n2;
      for (Index c = 0; c < s; ++c) {
        const Index q1 = sup[static_cast<std::size_t>(c)] / n2;
        const Index q2 = sup[static_cast<std::size_t>(c)] % n2;
        m2(p2, q2) += l1(p1, q1) * th(r, c);
      }
    }
  }

  // Normalization part: P2 diag(d2_l^2 beta_l) P2^T with
  // beta_l = sum_k d1_k / (1 + d1_k d2_l).
  Vector diag(n2);
  for (Index l = 0; l < n2; ++l) {
    const double d2 = e2.values(l);
    double beta = 0.0;
    for (Index k = 0; k < n1; ++k) {
      const double d1 = e1.values(k);
      beta += d1 / (1.0 + d1 * d2);
    }
    diag(l) = d2 * d2 * beta;
  }
  const Matrix b = e2.vectors * diag.asDiagonal() * e2.vectors.transpose();

  Matrix next = l2.mat() + (a / static_cast<double>(n1)) * (l2.mat() * m2 * l2.mat() - b);
  return check_pd(next, pd_floor);
}

std::pair<SpdMatrix, SpdMatrix> joint_picard_step_from_m(const SpdMatrix& l1,
                                                         const SpdMatrix& l2,
                                                         const Matrix& m, double a,
                                                         double pd_floor) {
  const Index n1 = l1.rows();
  const Index n2 = l2.rows();
  if (m.rows() != n1 * n2 || m.cols() != n1 * n2)
    throw DimensionError("joint_picard_step_from_m: matrix does not match the factor dimensions");

  const SingularPair sp = leading_singular_pair(rearrange(m, n1, n2));

  Matrix u(n1, n1);
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n1; ++j) u(i, j) = sp.u(i * n1 + j);
  u = 0.5 * (u + u.transpose()).eval();
  Matrix v(n2, n2);
  for (Index p = 0; p < n2; ++p)
    for (Index q = 0; q < n2; ++q) v(p, q) = sp.v(q * n2 + p);
  v = 0.5 * (v + v.transpose()).eval();

  const Matrix t1 = l1.mat() * u * l1.mat();
  const Matrix t2 = l2.mat() * v * l2.mat();
  const double norm1 = t1.norm();
  const double norm2 = t2.norm();
  if (norm1 == 0.0 || norm2 == 0.0 || sp.sigma == 0.0)
    throw NumericalError("joint_picard_step: degenerate leading singular direction");

  const double sign = u(0, 0) < 0.0 ? -1.0 : 1.0;
  const double alpha = sign * std::sqrt(sp.sigma * norm2 / norm1);

  Matrix next1 = l1.mat() + a * (alpha * t1 - l1.mat());
  Matrix next2 = l2.mat() + a * ((sp.sigma / alpha) * t2 - l2.mat());
  SpdMatrix out1 = check_pd(next1, pd_floor);
  SpdMatrix out2 = check_pd(next2, pd_floor);
  return {std::move(out1), std::move(out2)};
}

std::pair<SpdMatrix, SpdMatrix> joint_picard_step(const SpdMatrix& l1, const SpdMatrix& l2,
                                                  const TrainingSet& t, double a,
                                                  double pd_floor) {
  const Index n1 = l1.rows();
  const Index n2 = l2.rows();
  if (t.ground_size() != n1 * n2)
    throw DimensionError("joint_picard_step: training set ground size does not match kernel dimension");

  const KronKernel kernel({l1, l2});
  const Matrix theta = theta_batch(kernel, t).densify();
  const Matrix linv = kron_product(inverse_spd(l1.mat()), inverse_spd(l2.mat()));
  Matrix norm = kron_product(l1.mat(), l2.mat());
  norm.diagonal().array() += 1.0;
  const Matrix m = linv + theta - inverse_spd(norm);
  return joint_picard_step_from_m(l1, l2, m, a, pd_floor);
}

std::pair<KronKernel, FitHistory> fit_krk(const KronKernel& k0, const TrainingSet& t,
                                          const FitConfig& cfg) {
  if (k0.num_factors() != 2)
    throw DimensionError("fit_krk: a two-factor kernel is required");
  validate_fit_inputs(k0.dim(), t, cfg);

  SpdMatrix l1 = k0.factor(0);
  SpdMatrix l2 = k0.factor(1);
  FitHistory history;
  double phi_prev = log_likelihood(KronKernel({l1, l2}), t);
  double elapsed = 0.0;

  MinibatchScheduler scheduler(t.count(), std::min<Index>(cfg.minibatch_size, t.count()),
                               cfg.seed);
  std::vector<Subset> chunk_subsets;

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const auto start = Clock::now();
    if (cfg.mode == FitMode::kBatch) {
      const ThetaAccumulator th1 = theta_batch(KronKernel({l1, l2}), t);
      l1 = step_with_retry(
          [&](double a) { return krk_step_factor1(l1, l2, th1, a, cfg.pd_floor); },
          cfg.step_size, it, "fit_krk: factor-1 update");
      const ThetaAccumulator th2 = theta_batch(KronKernel({l1, l2}), t);
      l2 = step_with_retry(
          [&](double a) { return krk_step_factor2(l1, l2, th2, a, cfg.pd_floor); },
          cfg.step_size, it, "fit_krk: factor-2 update");
    } else {
      const std::vector<Index> chunk = scheduler.next();
      chunk_subsets.clear();
      for (Index idx : chunk) chunk_subsets.push_back(t.subset(idx));
      const ThetaAccumulator th = theta_sparse(KronKernel({l1, l2}), chunk_subsets);
      l1 = step_with_retry(
          [&](double a) { return krk_step_factor1(l1, l2, th, a, cfg.pd_floor); },
          cfg.step_size, it, "fit_krk: factor-1 update");
      l2 = step_with_retry(
          [&](double a) { return krk_step_factor2(l1, l2, th, a, cfg.pd_floor); },
          cfg.step_size, it, "fit_krk: factor-2 update");
    }
    elapsed += seconds_since(start);

    const double phi = log_likelihood(KronKernel({l1, l2}), t);
    const double mineig = std::min(min_eigenvalue(l1.mat()), min_eigenvalue(l2.mat()));
    history.records.push_back({it, elapsed, phi, mineig});
    if (cfg.mode == FitMode::kBatch && converged(phi, phi_prev, cfg.tol)) break;
    phi_prev = phi;
  }
  return {KronKernel({l1, l2}), std::move(history)};
}

std::pair<SpdMatrix, FitHistory> fit_picard(const SpdMatrix& l0, const TrainingSet& t,
                                            const FitConfig& cfg) {
  if (cfg.mode != FitMode::kBatch)
    throw DimensionError("fit_picard: the dense baseline supports batch mode only");
  validate_fit_inputs(l0.rows(), t, cfg);

  SpdMatrix l = l0;
  FitHistory history;
  double phi_prev = log_likelihood_dense(l, t);
  double elapsed = 0.0;

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const auto start = Clock::now();
    const Matrix delta = grad_delta(l, t);
    l = step_with_retry(
        [&](double a) { return picard_step_with_delta(l, delta, a, cfg.pd_floor); },
        cfg.step_size, it, "fit_picard: update");
    elapsed += seconds_since(start);

    const double phi = log_likelihood_dense(l, t);
    const double mineig = min_eigenvalue(l.mat());
    history.records.push_back({it, elapsed, phi, mineig});
    if (converged(phi, phi_prev, cfg.tol)) break;
    phi_prev = phi;
  }
  return {std::move(l), std::move(history)};
}

std::pair<KronKernel, FitHistory> fit_joint(const KronKernel& k0, const TrainingSet& t,
                                            const FitConfig& cfg) {
  if (k0.num_factors() != 2)
    throw DimensionError("fit_joint: a two-factor kernel is required");
  if (cfg.mode != FitMode::kBatch)
    throw DimensionError("fit_joint: the joint update supports batch mode only");
  validate_fit_inputs(k0.dim(), t, cfg);

  SpdMatrix l1 = k0.factor(0);
  SpdMatrix l2 = k0.factor(1);
  FitHistory history;
  double phi_prev = log_likelihood(KronKernel({l1, l2}), t);
  double elapsed = 0.0;

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const auto start = Clock::now();
    std::tie(l1, l2) = step_with_retry(
        [&](double a) { return joint_picard_step(l1, l2, t, a, cfg.pd_floor); },
        cfg.step_size, it, "fit_joint: update");
    elapsed += seconds_since(start);

    const double phi = log_likelihood(KronKernel({l1, l2}), t);
    const double mineig = std::min(min_eigenvalue(l1.mat()), min_eigenvalue(l2.mat()));
    history.records.push_back({it, elapsed, phi, mineig});
    if (converged(phi, phi_prev, cfg.tol)) break;
    phi_prev = phi;
  }
  return {KronKernel({l1, l2}), std::move(history)};
}

Matrix random_gram_matrix(Index n, RngStream& rng) {
  if (n < 1) throw DimensionError("random_gram_matrix: dimension must be positive");
  const double scale = std::sqrt(2.0);
  Matrix x(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) x(i, j) = scale * rng.uniform();
  Matrix gram = x.transpose() * x;
  return 0.5 * (gram + gram.transpose());
}

}  // namespace krondpp
