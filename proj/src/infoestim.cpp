#include "ridgelab/infoestim.hpp"

#include <cmath>
#include <string>

#include "ridgelab/errors.hpp"

namespace ridgelab::info {

namespace {

void require_permutation(std::span<const int> perm, Eigen::Index n) {
  RIDGELAB_REQUIRE(static_cast<Eigen::Index>(perm.size()) == n, "permutation has wrong length");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int p : perm) {
    RIDGELAB_REQUIRE(p >= 0 && p < n && !seen[static_cast<std::size_t>(p)],
                     "not a permutation of 0..n-1");
    seen[static_cast<std::size_t>(p)] = true;
  }
}

double spectral_entropy(const Matrix& unit_trace) {
  double h = 0.0;
  for (double lambda : sym_eigenvalues(unit_trace)) {
    if (lambda < kEigenvalueFloor) continue;
    h -= lambda * std::log(lambda);
  }
  return h;
}

}  // namespace

SampleMatrix::SampleMatrix(Matrix rows) : rows_(std::move(rows)) {
  RIDGELAB_REQUIRE(all_finite(rows_), "SampleMatrix: non-finite entry");
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
    const double norm = rows_.row(i).norm();
    if (norm == 0.0) continue;
    if (std::abs(norm - 1.0) > 1e-9) {
      throw ContractViolation("SampleMatrix: row " + std::to_string(i) + " has norm " +
                              std::to_string(norm) + " (expected 1 or 0)");
    }
  }
}

SampleMatrix SampleMatrix::normalized(const Matrix& raw) {
  Matrix rows = raw;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double norm = rows.row(i).norm();
    if (norm < 1e-12) {
      rows.row(i).setZero();
    } else {
      rows.row(i) /= norm;
    }
  }
  return SampleMatrix(std::move(rows));
}

SampleMatrix SampleMatrix::permuted(std::span<const int> perm) const {
  require_permutation(perm, rows_.rows());
  Matrix out(rows_.rows(), rows_.cols());
  for (Eigen::Index i = 0; i < rows_.rows(); ++i) out.row(i) = rows_.row(perm[i]);
  return SampleMatrix(std::move(out));
}

GramMatrix::GramMatrix(Matrix entries, double bandwidth)
    : entries_(std::move(entries)), bandwidth_(bandwidth) {
  RIDGELAB_REQUIRE(entries_.rows() == entries_.cols() && entries_.rows() > 0,
                   "GramMatrix: must be square and non-empty");
  RIDGELAB_REQUIRE(all_finite(entries_), "GramMatrix: non-finite entry");
  const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
  RIDGELAB_REQUIRE(asym <= 1e-10, "GramMatrix: not symmetric");
  const double trace = entries_.trace();
  if (std::abs(trace - 1.0) > 1e-8) {
    throw ContractViolation("GramMatrix: trace " + std::to_string(trace) + " differs from 1");
  }
}

GramMatrix GramMatrix::permuted(std::span<const int> perm) const {
  require_permutation(perm, n());
  Matrix out(n(), n());
  for (Eigen::Index i = 0; i < n(); ++i) {
    for (Eigen::Index j = 0; j < n(); ++j) out(i, j) = entries_(perm[i], perm[j]);
  }
  return GramMatrix(std::move(out), bandwidth_);
}

GramMatrix gram(const SampleMatrix& u, double bandwidth) {
  const Eigen::Index n = u.n_samples();
  if (n == 0) throw ContractViolation("gram: empty sample matrix");
  RIDGELAB_REQUIRE(bandwidth > 0.0, "gram: bandwidth must be positive");
  const Matrix& x = u.rows();
  const double inv_two_s2 = 1.0 / (2.0 * bandwidth * bandwidth);
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-(x.row(i) - x.row(j)).squaredNorm() * inv_two_s2);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  k /= k.trace();
  return GramMatrix(std::move(k), bandwidth);
}

double entropy(const GramMatrix& g) { return spectral_entropy(g.entries()); }

double joint_entropy(const GramMatrix& g_u, const GramMatrix& g_v) {
  if (g_u.n() != g_v.n()) {
    throw ContractViolation("joint_entropy: sizes differ (" + std::to_string(g_u.n()) + " vs " +
                            std::to_string(g_v.n()) + ")");
  }
  Matrix joint = g_u.entries().cwiseProduct(g_v.entries());
  joint /= joint.trace();
  return spectral_entropy(joint);
}

double mutual_information(const GramMatrix& g_u, const GramMatrix& g_v) {
  return entropy(g_u) + entropy(g_v) - joint_entropy(g_u, g_v);
}

double mutual_information(const SampleMatrix& u, const SampleMatrix& v, double bandwidth) {
  if (u.n_samples() != v.n_samples()) {
    throw ContractViolation("mutual_information: sample counts differ");
  }
  return mutual_information(gram(u, bandwidth), gram(v, bandwidth));
}

double reported_mi(double raw) {
  if (raw < 0.0 && raw >= -kNegativeMiTolerance) return 0.0;
  return raw;
}

}  // namespace ridgelab::info
