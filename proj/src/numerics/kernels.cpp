#include "ridgelab/numerics/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ridgelab/errors.hpp"

namespace ridgelab::kernels {

Matrix row_softmax(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mx = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - mx).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix layer_normalize(const Matrix& x, const Matrix& gain, const Matrix& shift, double eps) {
  RIDGELAB_REQUIRE(gain.rows() == 1 && gain.cols() == x.cols(), "layer_normalize: gain shape");
  RIDGELAB_REQUIRE(shift.rows() == 1 && shift.cols() == x.cols(), "layer_normalize: shift shape");
  Matrix out(x.rows(), x.cols());
  const double inv_n = 1.0 / static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() * inv_n;
    const auto centered = x.row(r).array() - mean;
    const double var = centered.square().sum() * inv_n;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    out.row(r) = (centered * inv_std) * gain.row(0).array() + shift.row(0).array();
  }
  return out;
}

Matrix gelu_tanh(const Matrix& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  const auto u = c * (x.array() + 0.044715 * x.array().cube());
  // tanh through exp, which Eigen vectorizes for doubles; saturates cleanly at +-1
  return (1.0 - 2.0 / ((2.0 * u).exp() + 1.0)).matrix();
}

Matrix gelu(const Matrix& x) {
  return (0.5 * x.array() * (1.0 + gelu_tanh(x).array())).matrix();
}

Matrix gather_rows(const Matrix& table, std::span<const int> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw ContractViolation("gather_rows: id " + std::to_string(ids[i]) + " outside [0, " +
                              std::to_string(table.rows()) + ")");
    }
    out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  }
  return out;
}

}  // namespace ridgelab::kernels
