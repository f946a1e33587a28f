#include "krondpp/sampling.hpp"

#include "krondpp/kron_linalg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace krondpp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kEigenvalueClamp = 1e-14;
constexpr double kRenormTol = 1e-12;
// Cadence of the full re-orthonormalization pass. Between passes the basis
// is restored by an exact closed-form correction; the periodic pass stops
// round-off from accumulating over many elimination steps.
constexpr int kReorthPeriod = 64;

void orthonormalize_columns(Matrix& v, Index live) {
  for (Index c = 0; c < live; ++c) {
    for (Index p = 0; p < c; ++p) v.col(c) -= v.col(p).dot(v.col(c)) * v.col(p);
    const double norm = v.col(c).norm();
    if (norm < kRenormTol)
      throw NumericalError("sampler: eigenvector basis became rank deficient");
    v.col(c) /= norm;
  }
}

// Phase 2: starting from an orthonormal N x k basis, draw k items. After
// each pick the chosen coordinate is eliminated with the largest-magnitude
// pivot column, and the remaining columns are restored to an orthonormal
// basis of the reduced subspace. The restoration uses the closed form
// (I + c c^T)^{-1/2} = I - c c^T / (sqrt(1+s)(1+sqrt(1+s))), s = ||c||^2,
// valid because the eliminated columns differ from an orthonormal set by a
// rank-one update; a full orthonormalization pass runs every kReorthPeriod
// steps to absorb round-off.
Subset phase2(Matrix v, RngStream& rng) {
  const Index n = v.rows();
  Index live = v.cols();
  Subset out;
  out.reserve(static_cast<std::size_t>(live));
  int steps_since_reorth = 0;

  while (live > 0) {
    // Pick item i with probability (squared row norm) / live.
    Vector row_mass = Vector::Zero(n);
    for (Index c = 0; c < live; ++c) row_mass += v.col(c).cwiseAbs2();
    const double total = row_mass.sum();
    if (!(total > 0.0))
      throw NumericalError("sampler: eigenvector basis became rank deficient");
    double u = rng.uniform() * total;
    Index pick = n - 1;
    for (Index i = 0; i < n; ++i) {
      u -= row_mass(i);
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    out.push_back(pick);

    // Pivot: column with the largest coordinate at the picked row.
    Index pivot = 0;
    double pivot_mag = -1.0;
    for (Index c = 0; c < live; ++c) {
      const double mag = std::abs(v(pick, c));
      if (mag > pivot_mag) {
        pivot_mag = mag;
        pivot = c;
      }
    }
    if (pivot_mag < kRenormTol)
      throw NumericalError("sampler: no usable pivot for the picked item");

    // Eliminate row `pick` from every other column, drop the pivot column.
    const Vector p = v.col(pivot);
    Eigen::RowVectorXd coeff = v.row(pick).head(live) / v(pick, pivot);
    v.leftCols(live).noalias() -= p * coeff;
    if (pivot != live - 1) {
      v.col(pivot) = v.col(live - 1);
      coeff(pivot) = coeff(live - 1);
    }
    --live;
    v.row(pick).head(live).setZero();

    if (live == 0) break;

    // Restore orthonormality of the remaining columns.
    const Eigen::RowVectorXd c_rest = coeff.head(live);
    const double s = c_rest.squaredNorm();
    if (s > 0.0) {
      const double root = std::sqrt(1.0 + s);
      const double beta = 1.0 / (root * (1.0 + root));
      const Vector w = v.leftCols(live) * c_rest.transpose();
      v.leftCols(live).noalias() -= beta * w * c_rest;
    }
    if (++steps_since_reorth >= kReorthPeriod) {
      orthonormalize_columns(v, live);
      steps_since_reorth = 0;
    }
  }

  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<Index> select_elementary(const Vector& values, RngStream& rng) {
  std::vector<Index> selected;
  for (Index i = 0; i < values.size(); ++i) {
    double lambda = values(i);
    if (lambda < -kEigenvalueClamp)
      throw NumericalError("select_elementary: negative eigenvalue");
    if (lambda < kEigenvalueClamp) lambda = 0.0;
    const double p = lambda / (1.0 + lambda);
    const double u = rng.uniform();  // always consumed, keeps streams aligned
    if (u < p) selected.push_back(i);
  }
  return selected;
}

SampleReport sample_dense(const EigenSystem& eig, RngStream& rng) {
  if (eig.vectors.rows() != eig.vectors.cols() || eig.vectors.rows() != eig.values.size())
    throw DimensionError("sample_dense: inconsistent eigensystem");
  SampleReport report;
  auto start = Clock::now();
  report.elementary = select_elementary(eig.values, rng);
  report.phase1_seconds = seconds_since(start);

  start = Clock::now();
  const Index k = static_cast<Index>(report.elementary.size());
  Matrix v(eig.vectors.rows(), k);
  for (Index c = 0; c < k; ++c) v.col(c) = eig.vectors.col(report.elementary[static_cast<std::size_t>(c)]);
  report.subset = phase2(std::move(v), rng);
  report.phase2_seconds = seconds_since(start);
  return report;
}

SampleReport sample_kron(const KronKernel& kernel, RngStream& rng) {
  const KronEigenSystem kes = kron_eig(kernel.factors());
  const std::vector<Index> order = kes.sorted_order();
  const Index n = kes.joint_size();
  Vector values(n);
  for (Index i = 0; i < n; ++i) values(i) = kes.joint_value(order[static_cast<std::size_t>(i)]);

  SampleReport report;
  auto start = Clock::now();
  report.elementary = select_elementary(values, rng);
  report.phase1_seconds = seconds_since(start);

  start = Clock::now();
  const Index k = static_cast<Index>(report.elementary.size());
  Matrix v(n, k);
  for (Index c = 0; c < k; ++c)
    v.col(c) = kes.joint_vector(order[static_cast<std::size_t>(report.elementary[static_cast<std::size_t>(c)])]);
  report.subset = phase2(std::move(v), rng);
  report.phase2_seconds = seconds_since(start);
  return report;
}

std::vector<double> enumerate_distribution(const KronKernel& k) {
  const Index n = k.dim();
  if (n > 20) throw DimensionError("enumerate_distribution: ground set too large (max 20)");
  const double logdet_norm = log_det_norm(k);
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> probs(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    Subset y;
    for (Index i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) y.push_back(i);
    if (y.empty()) {
      probs[mask] = std::exp(-logdet_norm);
      continue;
    }
    try {
      probs[mask] = std::exp(logdet_with_jitter(kron_submatrix(k, y)) - logdet_norm);
    } catch (const NumericalError&) {
      probs[mask] = 0.0;
    }
  }
  return probs;
}

std::vector<double> enumerate_distribution_dense(const Matrix& l) {
  if (l.rows() != l.cols()) throw DimensionError("enumerate_distribution_dense: matrix must be square");
  const Index n = l.rows();
  if (n > 20) throw DimensionError("enumerate_distribution_dense: ground set too large (max 20)");
  Matrix norm = l;
  norm.diagonal().array() += 1.0;
  const double logdet_norm = logdet_spd(norm);
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> probs(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    Subset y;
    for (Index i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) y.push_back(i);
    if (y.empty()) {
      probs[mask] = std::exp(-logdet_norm);
      continue;
    }
    const Index s = static_cast<Index>(y.size());
    Matrix sub(s, s);
    for (Index a = 0; a < s; ++a)
      for (Index b = 0; b < s; ++b)
        sub(a, b) = l(y[static_cast<std::size_t>(a)], y[static_cast<std::size_t>(b)]);
    try {
      probs[mask] = std::exp(logdet_with_jitter(sub) - logdet_norm);
    } catch (const NumericalError&) {
      probs[mask] = 0.0;
    }
  }
  return probs;
}

double expected_sample_size(const Vector& values) {
  double total = 0.0;
  for (Index i = 0; i < values.size(); ++i) {
    const double lambda = values(i) < kEigenvalueClamp ? 0.0 : values(i);
    if (values(i) < -kEigenvalueClamp)
      throw NumericalError("expected_sample_size: negative eigenvalue");
    total += lambda / (1.0 + lambda);
  }
  return total;
}

}  // namespace krondpp
