#include "ridgelab/numerics/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ridgelab/errors.hpp"

namespace ridgelab {

namespace {

void require_symmetric(const Matrix& m) {
  RIDGELAB_REQUIRE(m.rows() == m.cols(), "sym_eigendecompose: matrix is not square");
  RIDGELAB_REQUIRE(all_finite(m), "sym_eigendecompose: non-finite entry");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * scale) {
    throw ContractViolation("sym_eigendecompose: matrix is not symmetric (max |m - m^T| = " +
                            std::to_string(asym) + ")");
  }
}

// Eigen's tridiagonal QR gives up after 30 iterations per eigenvalue.
[[noreturn]] void throw_no_convergence(Eigen::Index n) {
  throw NumericalError("sym_eigendecompose: QR iteration did not converge within " +
                       std::to_string(30 * n) + " iterations (n = " + std::to_string(n) + ")");
}

}  // namespace

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractViolation(what + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + ")");
  }
}

SymmetricEigen sym_eigendecompose(const Matrix& m) {
  require_symmetric(m);
  const Eigen::MatrixXd col_major = m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(col_major, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw_no_convergence(m.rows());

  // Eigen returns ascending order; flip to descending.
  const Eigen::Index n = m.rows();
  SymmetricEigen out;
  out.eigenvalues.resize(static_cast<std::size_t>(n));
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues[static_cast<std::size_t>(k)] = solver.eigenvalues()(n - 1 - k);
    out.eigenvectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

std::vector<double> sym_eigenvalues(const Matrix& m) {
  require_symmetric(m);
  const Eigen::MatrixXd col_major = m;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(col_major, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw_no_convergence(m.rows());
  std::vector<double> values(solver.eigenvalues().data(),
                             solver.eigenvalues().data() + solver.eigenvalues().size());
  std::reverse(values.begin(), values.end());
  return values;
}

}  // namespace ridgelab
