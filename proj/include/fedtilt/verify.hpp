#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedtilt/model.hpp"
#include "fedtilt/param_vector.hpp"
#include "fedtilt/tilt.hpp"

namespace fedtilt {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct VerifyOptions {
    std::uint64_t seed = 20240917;
    // Test shim: perturbs one analytic gradient so the harness's failure
    // path can be exercised end to end.
    bool break_gradient = false;
};

// Local objective L(v) = two-level tilted loss of l2-regularized
// cross-entropy samples plus the proximal term toward the anchor. With
// l2_reg > 0 the base loss is strongly convex, so the convergence and PL
// checks apply literally.
struct RegularizedLocalObjective {
    ModelSpec model;
    std::vector<Example> shard;
    double tau = 1.0;
    double lambda = 1.0;
    double mu = 0.01;
    double l2_reg = 0.1;
    ParamVector anchor;

    TiltedValue evaluate(const ParamVector& v) const;
    double value(const ParamVector& v) const { return evaluate(v).value; }
    ParamVector gradient(const ParamVector& v) const { return evaluate(v).gradient; }
};

// Objective values along a plain gradient-descent trajectory, including the
// starting point (iters + 1 entries).
std::vector<double> gradient_descent_trace(const RegularizedLocalObjective& objective,
                                           ParamVector start, double step, int iters);

CheckResult check_tilt_gradients(const VerifyOptions& opts);
CheckResult check_model_gradients(const VerifyOptions& opts);
CheckResult check_tilt_bounds(const VerifyOptions& opts);
CheckResult check_tilt_zero_continuity(const VerifyOptions& opts);
CheckResult check_tilt_extreme_limits(const VerifyOptions& opts);
CheckResult check_reduction_fedavg(const VerifyOptions& opts);
CheckResult check_reduction_fedprox(const VerifyOptions& opts);
CheckResult check_reduction_ditto(const VerifyOptions& opts);
CheckResult check_linear_convergence(const VerifyOptions& opts);
CheckResult check_karimi_bound(const VerifyOptions& opts);
CheckResult check_pl_inequality(const VerifyOptions& opts);

std::vector<CheckResult> run_verification(const VerifyOptions& opts);

}  // namespace fedtilt
