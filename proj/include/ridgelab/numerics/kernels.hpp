#pragma once

#include <span>

#include "ridgelab/numerics/matrix.hpp"

// Tape-free forward kernels. The differentiable ops in ops.hpp call these, so
// inference paths that skip the tape produce bit-identical values.
namespace ridgelab::kernels {

inline constexpr double kLayerNormEps = 1e-5;

Matrix row_softmax(const Matrix& x);

// Per-row standardization followed by `gain` and `shift` (both 1 x cols).
Matrix layer_normalize(const Matrix& x, const Matrix& gain, const Matrix& shift,
                       double eps = kLayerNormEps);

// tanh(sqrt(2/pi) (x + 0.044715 x^3)), the inner factor of gelu.
Matrix gelu_tanh(const Matrix& x);

// tanh approximation
Matrix gelu(const Matrix& x);

Matrix gather_rows(const Matrix& table, std::span<const int> ids);

}  // namespace ridgelab::kernels
