#pragma once

#include <span>
#include <vector>

#include "ridgelab/numerics/matrix.hpp"

// Matrix-based Renyi entropy (order 1) and mutual information over batches of
// representation vectors. All quantities are in nats.
namespace ridgelab::info {

inline constexpr double kDefaultBandwidth = 1.0;
// Tolerance for treating small negative MI estimates as zero in reports.
inline constexpr double kNegativeMiTolerance = 1e-6;

// N row vectors, each either unit-norm (within 1e-9) or exactly zero.
class SampleMatrix {
 public:
  // Validates rows; throws ContractViolation on a non-unit, non-zero row.
  explicit SampleMatrix(Matrix rows);

  // Unit-normalizes every row; rows with norm < 1e-12 become zero vectors.
  static SampleMatrix normalized(const Matrix& raw);

  Eigen::Index n_samples() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }
  const Matrix& rows() const { return rows_; }

  // Row i of the result is row perm[i] of this matrix.
  SampleMatrix permuted(std::span<const int> perm) const;

 private:
  Matrix rows_;
};

// Symmetric PSD kernel matrix with unit trace.
class GramMatrix {
 public:
  // Validates symmetry (1e-10) and unit trace (1e-8).
  GramMatrix(Matrix entries, double bandwidth);

  Eigen::Index n() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  double bandwidth() const { return bandwidth_; }

  // Same relabeling applied to rows and columns.
  GramMatrix permuted(std::span<const int> perm) const;

 private:
  Matrix entries_;
  double bandwidth_;
};

// Gaussian kernel exp(-|u_i - u_j|^2 / (2 sigma^2)), divided by its trace (N).
GramMatrix gram(const SampleMatrix& u, double bandwidth = kDefaultBandwidth);

// -sum_k lambda_k log lambda_k over the eigenvalues, with values below 1e-12
// clamped to zero.
double entropy(const GramMatrix& g);

// Entropy of the trace-renormalized Hadamard product g_u o g_v.
double joint_entropy(const GramMatrix& g_u, const GramMatrix& g_v);

// H(u) + H(v) - H(u, v). Raw value; may be slightly negative.
double mutual_information(const SampleMatrix& u, const SampleMatrix& v,
                          double bandwidth = kDefaultBandwidth);
double mutual_information(const GramMatrix& g_u, const GramMatrix& g_v);

// Maps raw MI values in [-1e-6, 0) to 0 for reporting.
double reported_mi(double raw);

}  // namespace ridgelab::info
