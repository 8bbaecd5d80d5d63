#include "ridgelab/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ridgelab/errors.hpp"

namespace ridgelab::ad {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Matrix>& params) {
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Matrix& p : params) vars.push_back(tape.constant_ref(p));
  const Var out = f(tape, vars);
  RIDGELAB_REQUIRE(out.value().rows() == 1 && out.value().cols() == 1,
                   "grad_check: function must return a 1x1 value");
  return out.value()(0, 0);
}

}  // namespace

double grad_check(const ScalarFn& f, std::vector<Matrix> params, double epsilon) {
  RIDGELAB_REQUIRE(epsilon > 0.0, "grad_check: epsilon must be positive");

  std::vector<Matrix> analytic;
  {
    Tape tape(true);
    std::vector<Var> vars;
    for (const Matrix& p : params) vars.push_back(tape.parameter_ref(p));
    const Var out = f(tape, vars);
    if (!std::isfinite(out.value()(0, 0))) throw NumericalError("grad_check: f is non-finite at params");
    tape.backward(out);
    for (const Var& v : vars) analytic.push_back(v.grad());
  }

  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& m = params[p];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double* entry = m.data() + i;
      const double saved = *entry;
      *entry = saved + epsilon;
      const double up = evaluate(f, params);
      *entry = saved - epsilon;
      const double down = evaluate(f, params);
      *entry = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericalError("grad_check: f is non-finite when perturbing parameter " +
                             std::to_string(p) + " entry " + std::to_string(i));
      }
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[p].data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

}  // namespace ridgelab::ad
