#include "krondpp/dpp_model.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace krondpp {

KronKernel::KronKernel(std::vector<SpdMatrix> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw DimensionError("KronKernel: at least one factor required");
  dim_ = 1;
  for (const SpdMatrix& f : factors_) {
    dims_.push_back(f.rows());
    dim_ *= f.rows();
  }
}

double KronKernel::entry(Index i, Index j) const {
  const std::vector<Index> pi = index_split(i, dims_);
  const std::vector<Index> pj = index_split(j, dims_);
  double v = 1.0;
  for (std::size_t k = 0; k < factors_.size(); ++k) v *= factors_[k](pi[k], pj[k]);
  return v;
}

Matrix KronKernel::materialize() const {
  Matrix out = factors_[0].mat();
  for (std::size_t k = 1; k < factors_.size(); ++k) out = kron_product(out, factors_[k].mat());
  return out;
}

TrainingSet::TrainingSet(Index ground_size, std::vector<Subset> subsets)
    : ground_size_(ground_size), subsets_(std::move(subsets)) {
  if (ground_size_ < 1) throw DimensionError("TrainingSet: ground set must be non-empty");
  for (std::size_t i = 0; i < subsets_.size(); ++i) {
    Subset& y = subsets_[i];
    std::sort(y.begin(), y.end());
    for (std::size_t a = 0; a < y.size(); ++a) {
      if (y[a] < 0 || y[a] >= ground_size_) {
        std::ostringstream msg;
        msg << "TrainingSet: subset " << i << " has index " << y[a] << " outside [0, "
            << ground_size_ << ")";
        throw DimensionError(msg.str());
      }
      if (a > 0 && y[a] == y[a - 1]) {
        std::ostringstream msg;
        msg << "TrainingSet: subset " << i << " contains duplicate index " << y[a];
        throw DimensionError(msg.str());
      }
    }
  }
}

Index TrainingSet::max_subset_size() const {
  Index kappa = 0;
  for (const Subset& y : subsets_) kappa = std::max(kappa, static_cast<Index>(y.size()));
  return kappa;
}

Matrix kron_submatrix(const KronKernel& k, const Subset& y) {
  const Index s = static_cast<Index>(y.size());
  const std::size_t m = static_cast<std::size_t>(k.num_factors());
  // Pre-split each subset index once; entries are then m-fold products.
  std::vector<std::vector<Index>> parts(static_cast<std::size_t>(s));
  for (Index a = 0; a < s; ++a) parts[static_cast<std::size_t>(a)] = index_split(y[static_cast<std::size_t>(a)], k.dims());
  Matrix out(s, s);
  for (Index a = 0; a < s; ++a) {
    for (Index b = a; b < s; ++b) {
      double v = 1.0;
      for (std::size_t f = 0; f < m; ++f)
        v *= k.factor(static_cast<Index>(f))(parts[static_cast<std::size_t>(a)][f], parts[static_cast<std::size_t>(b)][f]);
      out(a, b) = v;
      out(b, a) = v;
    }
  }
  return out;
}

double log_det_norm(const KronKernel& k) {
  const KronEigenSystem kes = kron_eig(k.factors());
  const Index n = kes.joint_size();
  double sum = 0.0;
  for (Index j = 0; j < n; ++j) {
    const double lambda = kes.joint_value(j);
    if (lambda <= -1.0)
      throw NumericalError("log_det_norm: joint eigenvalue at or below -1; kernel is not positive definite");
    sum += std::log1p(lambda);
  }
  return sum;
}

double logdet_with_jitter(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  try {
    return logdet_spd(m);
  } catch (const NumericalError&) {
    Matrix jittered = m;
    jittered.diagonal().array() += 1e-10 * m.trace() / static_cast<double>(m.rows());
    try {
      return logdet_spd(jittered);
    } catch (const NumericalError&) {
      throw NumericalError("logdet_with_jitter: submatrix not positive definite even after jitter");
    }
  }
}

Matrix inverse_with_jitter(const Matrix& m) {
  if (m.rows() == 0) return Matrix(0, 0);
  try {
    return inverse_spd(m);
  } catch (const NumericalError&) {
    Matrix jittered = m;
    jittered.diagonal().array() += 1e-10 * m.trace() / static_cast<double>(m.rows());
    try {
      return inverse_spd(jittered);
    } catch (const NumericalError&) {
      throw NumericalError("inverse_with_jitter: submatrix not positive definite even after jitter");
    }
  }
}

double log_likelihood(const KronKernel& k, const TrainingSet& t) {
  if (t.count() < 1) throw DimensionError("log_likelihood: training set must be non-empty");
  if (t.ground_size() != k.dim())
    throw DimensionError("log_likelihood: training set ground size does not match kernel dimension");
  double sum = 0.0;
  for (const Subset& y : t.subsets()) sum += logdet_with_jitter(kron_submatrix(k, y));
  return sum / static_cast<double>(t.count()) - log_det_norm(k);
}

namespace {

Matrix dense_submatrix(const Matrix& l, const Subset& y) {
  const Index s = static_cast<Index>(y.size());
  Matrix out(s, s);
  for (Index a = 0; a < s; ++a)
    for (Index b = 0; b < s; ++b)
      out(a, b) = l(y[static_cast<std::size_t>(a)], y[static_cast<std::size_t>(b)]);
  return out;
}

}  // namespace

double log_likelihood_dense(const SpdMatrix& l, const TrainingSet& t) {
  if (t.count() < 1) throw DimensionError("log_likelihood_dense: training set must be non-empty");
  if (t.ground_size() != l.rows())
    throw DimensionError("log_likelihood_dense: training set ground size does not match kernel dimension");
  Matrix norm = l.mat();
  norm.diagonal().array() += 1.0;
  const double logdet_norm = logdet_spd(norm);
  double sum = 0.0;
  for (const Subset& y : t.subsets()) sum += logdet_with_jitter(dense_submatrix(l.mat(), y));
  return sum / static_cast<double>(t.count()) - logdet_norm;
}

Matrix grad_delta(const SpdMatrix& l, const TrainingSet& t) {
  if (t.count() < 1) throw DimensionError("grad_delta: training set must be non-empty");
  if (t.ground_size() != l.rows())
    throw DimensionError("grad_delta: training set ground size does not match kernel dimension");
  const Index n = l.rows();
  Matrix delta = Matrix::Zero(n, n);
  const double weight = 1.0 / static_cast<double>(t.count());
  for (const Subset& y : t.subsets()) {
    const Matrix inv = inverse_with_jitter(dense_submatrix(l.mat(), y));
    const Index s = static_cast<Index>(y.size());
    for (Index a = 0; a < s; ++a)
      for (Index b = 0; b < s; ++b)
        delta(y[static_cast<std::size_t>(a)], y[static_cast<std::size_t>(b)]) += weight * inv(a, b);
  }
  Matrix norm = l.mat();
  norm.diagonal().array() += 1.0;
  delta -= inverse_spd(norm);
  return 0.5 * (delta + delta.transpose());
}

Matrix marginal_kernel(const SpdMatrix& l) {
  Matrix norm = l.mat();
  norm.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(norm);
  if (llt.info() != Eigen::Success)
    throw NumericalError("marginal_kernel: factorization of L + I failed");
  Matrix k = llt.solve(l.mat());
  return 0.5 * (k + k.transpose());
}

double subset_prob(const KronKernel& k, const Subset& y) {
  for (std::size_t a = 0; a < y.size(); ++a) {
    if (y[a] < 0 || y[a] >= k.dim()) throw DimensionError("subset_prob: index out of range");
    if (a > 0 && y[a] <= y[a - 1]) throw DimensionError("subset_prob: subset must be strictly increasing");
  }
  const double norm = log_det_norm(k);
  if (y.empty()) return std::exp(-norm);
  try {
    return std::exp(logdet_with_jitter(kron_submatrix(k, y)) - norm);
  } catch (const NumericalError&) {
    return 0.0;
  }
}

}  // namespace krondpp
