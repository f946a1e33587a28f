#include "krondpp/types.hpp"

#include "krondpp/kron_linalg.hpp"

#include <Eigen/Cholesky>

#include <sstream>

namespace krondpp {

SpdMatrix SpdMatrix::checked(Matrix m, double floor) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw DimensionError("SpdMatrix: matrix must be square and non-empty");
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale > 0.0) {
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale) {
      std::ostringstream msg;
      msg << "SpdMatrix: matrix is not symmetric (relative asymmetry " << asym / scale << ")";
      throw DimensionError(msg.str());
    }
  }
  Matrix sym = 0.5 * (m + m.transpose());
  Matrix shifted = sym;
  if (floor != 0.0) shifted.diagonal().array() -= floor;
  Eigen::LLT<Matrix> llt(shifted);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "SpdMatrix: matrix is not positive definite with margin " << floor
        << " (smallest eigenvalue approximately " << min_eigenvalue(sym) << ")";
    throw NumericalError(msg.str());
  }
  return SpdMatrix(std::move(sym));
}

SpdMatrix SpdMatrix::trusted(Matrix m) {
  if (m.rows() != m.cols() || m.rows() < 1)
    throw DimensionError("SpdMatrix: matrix must be square and non-empty");
  Matrix sym = 0.5 * (m + m.transpose());
  return SpdMatrix(std::move(sym));
}

}  // namespace krondpp
