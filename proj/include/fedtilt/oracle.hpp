#pragma once

#include <functional>
#include <span>

#include "fedtilt/param_vector.hpp"

namespace fedtilt {

// Central-difference gradient, the reference every analytic gradient in the
// library is validated against.
ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& f,
                             const ParamVector& x, double step);

struct LinearRateFit {
    double rate = 1.0;    // per-iteration contraction factor, exp(slope)
    double r_squared = 1.0;
};

// Least-squares fit of log(gap_t) against t. A geometric sequence
// gap_t = gap_0 * r^t comes back with rate == r and r_squared == 1.
LinearRateFit fit_linear_rate(std::span<const double> gaps);

// Checks (1/2)||grad f(x)||^2 >= mu * (f(x) - f_star) at every supplied
// point, with a small slack absorbing float noise.
bool pl_gap_check(const std::function<double(const ParamVector&)>& f,
                  const std::function<ParamVector(const ParamVector&)>& grad_f,
                  double minimum_value, std::span<const ParamVector> points, double mu);

}  // namespace fedtilt
