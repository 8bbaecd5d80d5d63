#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace ridgelab {

// Dense 64-bit matrix, row-major storage.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct SymmetricEigen {
  std::vector<double> eigenvalues;  // descending
  Matrix eigenvectors;              // column k pairs with eigenvalues[k]
};

bool all_finite(const Matrix& m);

// Throws ContractViolation naming `what` when shapes differ.
void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what);

// Symmetric eigendecomposition. Input must be symmetric within 1e-10 (relative to
// its largest entry) with finite entries.
SymmetricEigen sym_eigendecompose(const Matrix& m);

// Eigenvalues only, descending. Same contract as sym_eigendecompose.
std::vector<double> sym_eigenvalues(const Matrix& m);

// Values below this are treated as exact zeros before taking logs.
inline constexpr double kEigenvalueFloor = 1e-12;

}  // namespace ridgelab
