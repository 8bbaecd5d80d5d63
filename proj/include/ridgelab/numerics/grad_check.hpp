#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ridgelab/numerics/tape.hpp"

namespace ridgelab::ad {

// Builds a 1x1 scalar from parameter nodes registered on the given tape.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

// Compares tape gradients against central differences. Returns the max over
// all parameter entries of |analytic - numeric| / max(1, |numeric|).
// Throws NumericalError naming the parameter entry when f is non-finite.
double grad_check(const ScalarFn& f, std::vector<Matrix> params, double epsilon);

}  // namespace ridgelab::ad
