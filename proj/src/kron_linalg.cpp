#include "krondpp/kron_linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace krondpp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

void require_block_shape(const Matrix& m, Index n1, Index n2, const char* op) {
  std::ostringstream msg;
  msg << op << ": expected a square matrix of size " << n1 << "*" << n2;
  require(n1 >= 1 && n2 >= 1 && m.rows() == n1 * n2 && m.cols() == n1 * n2, msg.str());
}

}  // namespace

Matrix kron_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix partial_trace_1(const Matrix& m, Index n1, Index n2) {
  require_block_shape(m, n1, n2, "partial_trace_1");
  Matrix out(n1, n1);
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n1; ++j)
      out(i, j) = m.block(i * n2, j * n2, n2, n2).trace();
  return out;
}

Matrix partial_trace_2(const Matrix& m, Index n1, Index n2) {
  require_block_shape(m, n1, n2, "partial_trace_2");
  Matrix out = Matrix::Zero(n2, n2);
  for (Index i = 0; i < n1; ++i) out += m.block(i * n2, i * n2, n2, n2);
  return out;
}

EigenSystem sym_eig(const Matrix& m) {
  require(m.rows() == m.cols(), "sym_eig: matrix must be square");
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale > 0.0) {
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8 * scale)
      throw DimensionError("sym_eig: input is not symmetric");
  }
  Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success)
    throw NumericalError("sym_eig: eigendecomposition failed to converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

KronEigenSystem kron_eig(const std::vector<SpdMatrix>& factors) {
  require(!factors.empty(), "kron_eig: at least one factor required");
  KronEigenSystem kes;
  kes.factors.reserve(factors.size());
  kes.dims.reserve(factors.size());
  for (const SpdMatrix& f : factors) {
    kes.factors.push_back(sym_eig(f.mat()));
    kes.dims.push_back(f.rows());
  }
  return kes;
}

Index KronEigenSystem::joint_size() const {
  Index n = 1;
  for (Index d : dims) n *= d;
  return n;
}

double KronEigenSystem::joint_value(Index joint) const {
  const std::vector<Index> parts = index_split(joint, dims);
  double v = 1.0;
  for (std::size_t k = 0; k < parts.size(); ++k) v *= factors[k].values(parts[k]);
  return v;
}

std::vector<Index> KronEigenSystem::sorted_order() const {
  const Index n = joint_size();
  Vector values(n);
  for (Index j = 0; j < n; ++j) values(j) = joint_value(j);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (values(a) != values(b)) return values(a) < values(b);
    return a < b;
  });
  return order;
}

Vector KronEigenSystem::joint_vector(Index joint) const {
  const std::vector<Index> parts = index_split(joint, dims);
  Vector v = factors[0].vectors.col(parts[0]);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const auto& col = factors[k].vectors.col(parts[k]);
    Vector next(v.size() * col.size());
    for (Index i = 0; i < v.size(); ++i)
      next.segment(i * col.size(), col.size()) = v(i) * col;
    v = std::move(next);
  }
  return v;
}

EigenSystem materialize_sorted(const KronEigenSystem& kes) {
  const Index n = kes.joint_size();
  const std::vector<Index> order = kes.sorted_order();
  EigenSystem sys;
  sys.values.resize(n);
  sys.vectors.resize(n, n);
  for (Index c = 0; c < n; ++c) {
    sys.values(c) = kes.joint_value(order[c]);
    sys.vectors.col(c) = kes.joint_vector(order[c]);
  }
  return sys;
}

Matrix rearrange(const Matrix& m, Index n1, Index n2) {
  require_block_shape(m, n1, n2, "rearrange");
  Matrix r(n1 * n1, n2 * n2);
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n1; ++j) {
      const auto block = m.block(i * n2, j * n2, n2, n2);
      for (Index q = 0; q < n2; ++q)
        for (Index p = 0; p < n2; ++p)
          r(i * n1 + j, q * n2 + p) = block(p, q);
    }
  return r;
}

SingularPair leading_singular_pair(const Matrix& r, double tol, int max_iter) {
  require(r.rows() >= 1 && r.cols() >= 1, "leading_singular_pair: empty matrix");
  Vector v = Vector::Ones(r.cols()) / std::sqrt(static_cast<double>(r.cols()));

  // An all-ones start can (rarely) lie in the null space; fall back to basis
  // vectors, and to an exact zero triple when the matrix itself is zero.
  if ((r * v).norm() == 0.0) {
    Index j = 0;
    for (; j < r.cols(); ++j)
      if (r.col(j).norm() > 0.0) break;
    if (j == r.cols()) {
      SingularPair zero;
      zero.u = Vector::Ones(r.rows()) / std::sqrt(static_cast<double>(r.rows()));
      zero.sigma = 0.0;
      zero.v = Vector::Ones(r.cols()) / std::sqrt(static_cast<double>(r.cols()));
      return zero;
    }
    v = Vector::Unit(r.cols(), j);
  }

  for (int it = 0; it < max_iter; ++it) {
    Vector w = r * v;
    const double sigma = w.norm();
    if (sigma == 0.0) throw NumericalError("leading_singular_pair: iterate collapsed to zero");
    Vector u = w / sigma;
    Vector z = r.transpose() * u;
    const double residual = (z - sigma * v).norm();
    Vector v_next = z / z.norm();
    if (residual <= tol * sigma) {
      SingularPair out{std::move(u), sigma, std::move(v_next)};
      for (Index i = 0; i < out.u.size(); ++i) {
        if (std::abs(out.u(i)) > 1e-14) {
          if (out.u(i) < 0.0) {
            out.u = -out.u;
            out.v = -out.v;
          }
          break;
        }
      }
      return out;
    }
    v = std::move(v_next);
  }
  throw NumericalError("leading_singular_pair: power iteration did not converge");
}

Index index_join(std::span<const Index> parts, std::span<const Index> dims) {
  require(parts.size() == dims.size(), "index_join: part/dimension count mismatch");
  require(!dims.empty(), "index_join: at least one dimension required");
  Index joint = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    require(dims[k] >= 1, "index_join: dimensions must be positive");
    require(parts[k] >= 0 && parts[k] < dims[k], "index_join: index out of range");
    joint = joint * dims[k] + parts[k];
  }
  return joint;
}

std::vector<Index> index_split(Index joint, std::span<const Index> dims) {
  require(!dims.empty(), "index_split: at least one dimension required");
  Index total = 1;
  for (Index d : dims) {
    require(d >= 1, "index_split: dimensions must be positive");
    total *= d;
  }
  require(joint >= 0 && joint < total, "index_split: joint index out of range");
  std::vector<Index> parts(dims.size());
  for (std::size_t k = dims.size(); k-- > 0;) {
    parts[k] = joint % dims[k];
    joint /= dims[k];
  }
  return parts;
}

double logdet_spd(const Matrix& m) {
  require(m.rows() == m.cols(), "logdet_spd: matrix must be square");
  if (m.rows() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError("logdet_spd: Cholesky factorization failed (matrix not positive definite)");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix inverse_spd(const Matrix& m) {
  require(m.rows() == m.cols(), "inverse_spd: matrix must be square");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalError("inverse_spd: Cholesky factorization failed (matrix not positive definite)");
  Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

double min_eigenvalue(const Matrix& m) {
  require(m.rows() == m.cols() && m.rows() >= 1, "min_eigenvalue: matrix must be square and non-empty");
  if (m.rows() <= 512) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (m + m.transpose()),
                                                 Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
      throw NumericalError("min_eigenvalue: eigendecomposition failed");
    return solver.eigenvalues()(0);
  }

  // Large matrices: estimate. Power iteration gives the dominant-magnitude
  // eigenvalue mu; a second power iteration on (|mu|*1.01*I - M) then peels
  // off the smallest eigenvalue of M.
  const Matrix sym = 0.5 * (m + m.transpose());
  const Index n = sym.rows();
  auto dominant = [&](const Matrix& mat) {
    Vector x = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    for (int it = 0; it < 80; ++it) {
      Vector y = mat * x;
      const double norm = y.norm();
      if (norm == 0.0) return 0.0;
      x = y / norm;
    }
    return x.dot(mat * x);
  };
  const double mu = dominant(sym);
  const double shift = std::abs(mu) * 1.01 + 1e-12;
  const Matrix shifted = shift * Matrix::Identity(n, n) - sym;
  const double nu = dominant(shifted);
  return shift - nu;
}

}  // namespace krondpp
