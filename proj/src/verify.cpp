#include "fedtilt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

#include "fedtilt/baselines.hpp"
#include "fedtilt/data.hpp"
#include "fedtilt/oracle.hpp"
#include "fedtilt/rng.hpp"

namespace fedtilt {

namespace {

constexpr double kFdStep = 1e-6;

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

double scaled_error(const ParamVector& analytic, const ParamVector& reference) {
    double scale = 1.0;
    for (double r : reference) scale = std::max(scale, std::fabs(r));
    return linf_distance(analytic, reference) / scale;
}

std::vector<Example> random_examples(std::mt19937_64& rng, int count, int input_dim,
                                     int num_classes) {
    std::normal_distribution<double> feat(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, num_classes - 1);
    std::vector<Example> out(count);
    for (auto& ex : out) {
        ex.features.resize(input_dim);
        for (double& f : ex.features) f = feat(rng);
        ex.label = cls(rng);
    }
    return out;
}

ParamVector random_params(std::mt19937_64& rng, std::size_t n, double scale) {
    std::normal_distribution<double> d(0.0, scale);
    ParamVector out(n);
    for (double& p : out) p = d(rng);
    return out;
}

std::vector<LossSample> loss_samples(const ModelSpec& model, const ParamVector& params,
                                     std::span<const Example> shard) {
    std::vector<LossSample> out;
    out.reserve(shard.size());
    for (const Example& ex : shard) out.push_back(loss_and_grad(model, params, ex));
    return out;
}

// Small full-batch configuration under which the FedTilt path and a baseline
// are exactly comparable.
RunConfig reduction_config(std::uint64_t seed, int num_clients) {
    RunConfig cfg;
    cfg.num_clients = num_clients;
    cfg.participation_fraction = 1.0;
    cfg.batch_size = 1 << 20;
    cfg.global_rounds = 6;
    cfg.client_epochs = 2;
    cfg.lr_client = 0.05;
    cfg.lr_personal = 0.05;
    cfg.tilt = TiltConfig{0.0, 0.0, 0.0, 0.01, DistanceKind::SquaredEuclidean};
    cfg.seed = seed;
    cfg.analytic_q0_server = true;
    return cfg;
}

CheckResult reduction_check(const char* name, int proposition, std::uint64_t seed) {
    double worst = 0.0;
    // Two instances: the two-client toy data and a four-client non-IID
    // binary partition.
    {
        const auto dataset = gen_toy(1, seed);
        const ModelSpec model{ModelKind::LogisticBinary, 2, 2, {}};
        worst = std::max(worst,
                         check_reduction(proposition, dataset, model, reduction_config(seed, 2)));
    }
    {
        const auto pool = gen_blobs(2, 120, 2, 0.4, seed + 1);
        const auto dataset = partition_noniid(pool, 4, 2, seed + 1);
        const ModelSpec model{ModelKind::LogisticBinary, 2, 2, {}};
        worst = std::max(worst, check_reduction(proposition, dataset, model,
                                                reduction_config(seed + 1, 4)));
    }
    return {name, worst < 1e-10,
            "max parameter deviation " + fmt("%.3e", worst) + " (limit 1e-10)"};
}

RegularizedLocalObjective convergence_instance(std::uint64_t seed) {
    RegularizedLocalObjective obj;
    obj.model = ModelSpec{ModelKind::LogisticBinary, 2, 2, {}};
    const auto dataset = gen_toy(1, seed);
    obj.shard.assign(dataset.clients[0].train.begin(),
                     dataset.clients[0].train.begin() + 40);
    obj.tau = 1.0;
    obj.lambda = 1.0;
    obj.mu = 0.01;
    obj.l2_reg = 0.1;
    auto rng = make_rng({seed, 777});
    obj.anchor = random_params(rng, param_count(obj.model), 0.3);
    return obj;
}

}  // namespace

TiltedValue RegularizedLocalObjective::evaluate(const ParamVector& v) const {
    std::map<int, std::vector<const Example*>> by_class;
    for (const Example& ex : shard) by_class[ex.label].push_back(&ex);

    const double reg_value = 0.5 * l2_reg * dot(v, v);
    std::vector<ClassTerm> terms;
    for (const auto& [cls, members] : by_class) {
        std::vector<LossSample> samples;
        samples.reserve(members.size());
        for (const Example* ex : members) {
            LossSample s = loss_and_grad(model, v, *ex);
            s.value += reg_value;
            axpy(s.gradient, l2_reg, v);
            samples.push_back(std::move(s));
        }
        auto tilted = class_tilted_loss(samples, lambda);
        terms.push_back({members.size(), tilted.value, std::move(tilted.gradient)});
    }
    const auto tilt = client_tilted_loss(terms, tau);
    return local_objective(v, anchor, tilt, mu);
}

std::vector<double> gradient_descent_trace(const RegularizedLocalObjective& objective,
                                           ParamVector start, double step, int iters) {
    std::vector<double> values;
    values.reserve(iters + 1);
    ParamVector v = std::move(start);
    values.push_back(objective.value(v));
    for (int t = 0; t < iters; ++t) {
        axpy(v, -step, objective.gradient(v));
        values.push_back(objective.value(v));
    }
    return values;
}

CheckResult check_tilt_gradients(const VerifyOptions& opts) {
    constexpr int kInstances = 100;
    constexpr double kTol = 1e-5;
    double worst = 0.0;
    std::string worst_op = "none";

    auto note = [&](const char* op, double err) {
        if (err > worst) {
            worst = err;
            worst_op = op;
        }
    };

    for (int i = 0; i < kInstances; ++i) {
        auto rng = make_rng({opts.seed, 1, static_cast<std::uint64_t>(i)});
        std::uniform_real_distribution<double> tilt_draw(-4.0, 4.0);
        const double lambda = i % 10 == 0 ? 0.0 : tilt_draw(rng);
        const double tau = tilt_draw(rng);
        const double q = tilt_draw(rng) * 0.75;
        std::uniform_int_distribution<int> count(1, 5);

        // class tilt: logistic losses
        {
            const ModelSpec model{ModelKind::LogisticBinary, 3, 2, {}};
            const auto shard = random_examples(rng, count(rng), 3, 2);
            ParamVector params = random_params(rng, param_count(model), 1.0);
            auto analytic = class_tilted_loss(loss_samples(model, params, shard), lambda);
            if (opts.break_gradient && !analytic.gradient.empty())
                analytic.gradient[0] += 1e-3;
            const auto fd = finite_diff_grad(
                [&](const ParamVector& p) {
                    return class_tilted_loss(loss_samples(model, p, shard), lambda).value;
                },
                params, kFdStep);
            note("class_tilted_loss", scaled_error(analytic.gradient, fd));
        }

        // two-level tilt and local objective: multiclass shard
        {
            const ModelSpec model{ModelKind::SoftmaxLinear, 3, 4, {}};
            auto shard = random_examples(rng, count(rng) + 1, 3, 4);
            ParamVector params = random_params(rng, param_count(model), 1.0);
            const ParamVector anchor = random_params(rng, params.size(), 1.0);
            std::uniform_real_distribution<double> mu_draw(0.0, 0.5);
            const double mu = mu_draw(rng);

            auto two_level = [&](const ParamVector& p) {
                std::map<int, std::vector<const Example*>> by_class;
                for (const Example& ex : shard) by_class[ex.label].push_back(&ex);
                std::vector<ClassTerm> terms;
                for (const auto& [cls, members] : by_class) {
                    std::vector<LossSample> samples;
                    for (const Example* ex : members)
                        samples.push_back(loss_and_grad(model, p, *ex));
                    auto tilted = class_tilted_loss(samples, lambda);
                    terms.push_back({members.size(), tilted.value,
                                     std::move(tilted.gradient)});
                }
                return client_tilted_loss(terms, tau);
            };

            const auto analytic = two_level(params);
            const auto fd = finite_diff_grad(
                [&](const ParamVector& p) { return two_level(p).value; }, params, kFdStep);
            note("client_tilted_loss", scaled_error(analytic.gradient, fd));

            const auto local = local_objective(params, anchor, analytic, mu);
            const auto fd_local = finite_diff_grad(
                [&](const ParamVector& p) {
                    return local_objective(p, anchor, two_level(p), mu).value;
                },
                params, kFdStep);
            note("local_objective", scaled_error(local.gradient, fd_local));
        }

        // global tilt over client-model distances
        {
            std::vector<ParamVector> models(3);
            for (auto& m : models) m = random_params(rng, 4, 1.0);
            ParamVector w = random_params(rng, 4, 1.0);
            const auto analytic = global_tilted_loss(models, w, q);
            const auto fd = finite_diff_grad(
                [&](const ParamVector& p) {
                    return global_tilted_loss(models, p, q).value;
                },
                w, kFdStep);
            note("global_tilted_loss", scaled_error(analytic.gradient, fd));
        }
    }

    return {"tilt-gradient-finite-diff", worst < kTol,
            "worst rel err " + fmt("%.3e", worst) + " (" + worst_op + ", limit 1e-5, " +
                std::to_string(kInstances) + " instances per op)"};
}

CheckResult check_model_gradients(const VerifyOptions& opts) {
    constexpr int kInstances = 100;
    double worst_linear = 0.0, worst_mlp = 0.0;

    for (int i = 0; i < kInstances; ++i) {
        auto rng = make_rng({opts.seed, 2, static_cast<std::uint64_t>(i)});

        const ModelSpec logistic{ModelKind::LogisticBinary, 4, 2, {}};
        const ModelSpec softmax{ModelKind::SoftmaxLinear, 3, 4, {}};
        const ModelSpec mlp{ModelKind::Mlp, 4, 3, {5, 4}};
        for (const ModelSpec& model : {logistic, softmax, mlp}) {
            const auto shard = random_examples(rng, 1, model.input_dim, model.num_classes);
            const ParamVector params = random_params(rng, param_count(model), 0.8);
            const auto analytic = loss_and_grad(model, params, shard[0]);
            const auto fd = finite_diff_grad(
                [&](const ParamVector& p) {
                    return loss_and_grad(model, p, shard[0]).value;
                },
                params, kFdStep);
            const double err = scaled_error(analytic.gradient, fd);
            if (model.kind == ModelKind::Mlp)
                worst_mlp = std::max(worst_mlp, err);
            else
                worst_linear = std::max(worst_linear, err);
        }
    }

    const bool pass = worst_linear < 1e-5 && worst_mlp < 1e-4;
    return {"model-gradient-finite-diff", pass,
            "worst rel err linear " + fmt("%.3e", worst_linear) + " (limit 1e-5), mlp " +
                fmt("%.3e", worst_mlp) + " (limit 1e-4)"};
}

CheckResult check_tilt_bounds(const VerifyOptions& opts) {
    constexpr int kInstances = 1000;
    const double tilts[] = {-100.0, -1.0, 0.0, 1.0, 100.0};
    double worst_violation = 0.0;
    double worst_coeff_gap = 0.0;

    for (int i = 0; i < kInstances; ++i) {
        auto rng = make_rng({opts.seed, 3, static_cast<std::uint64_t>(i)});
        std::uniform_int_distribution<int> count(1, 12);
        std::uniform_real_distribution<double> loss_draw(-5.0, 5.0);
        std::uniform_real_distribution<double> weight_draw(0.1, 3.0);
        const int n = count(rng);
        std::vector<double> losses(n), weights(n);
        for (double& l : losses) l = loss_draw(rng);
        for (double& w : weights) w = weight_draw(rng);
        const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());

        for (double t : tilts) {
            const double v = tilted_aggregate(losses, weights, t);
            worst_violation = std::max({worst_violation, *lo - v, v - *hi});
            const auto coeffs = tilted_gradient_weights(losses, weights, t);
            double sum = 0.0;
            for (double c : coeffs) sum += c;
            worst_coeff_gap = std::max(worst_coeff_gap, std::fabs(sum - 1.0));
        }
    }

    const bool pass = worst_violation <= 0.0 && worst_coeff_gap < 1e-12;
    return {"tilt-bounds", pass,
            "worst bound violation " + fmt("%.3e", worst_violation) +
                ", worst coefficient-sum gap " + fmt("%.3e", worst_coeff_gap)};
}

CheckResult check_tilt_zero_continuity(const VerifyOptions& opts) {
    constexpr int kInstances = 200;
    double worst = 0.0;
    // Both below the zero-tilt switch (1e-10) and just above it (2e-9), so
    // the limit branch and the log-sum-exp branch are continuous across the
    // threshold.
    const double tilts[] = {1e-10, -1e-10, 2e-9, -2e-9};

    for (int i = 0; i < kInstances; ++i) {
        auto rng = make_rng({opts.seed, 4, static_cast<std::uint64_t>(i)});
        std::uniform_int_distribution<int> count(1, 12);
        std::uniform_real_distribution<double> loss_draw(-5.0, 5.0);
        std::uniform_real_distribution<double> weight_draw(0.1, 3.0);
        const int n = count(rng);
        std::vector<double> losses(n), weights(n);
        for (double& l : losses) l = loss_draw(rng);
        for (double& w : weights) w = weight_draw(rng);

        const double at_zero = tilted_aggregate(losses, weights, 0.0);
        for (double t : tilts)
            worst = std::max(worst, std::fabs(tilted_aggregate(losses, weights, t) - at_zero));
    }

    return {"tilt-zero-limit-continuity", worst < 1e-6,
            "worst |tilted(t~0) - tilted(0)| = " + fmt("%.3e", worst) + " (limit 1e-6)"};
}

CheckResult check_tilt_extreme_limits(const VerifyOptions& opts) {
    constexpr int kInstances = 300;
    double worst = 0.0;

    for (int i = 0; i < kInstances; ++i) {
        auto rng = make_rng({opts.seed, 5, static_cast<std::uint64_t>(i)});
        std::uniform_int_distribution<int> count(2, 12);
        std::uniform_real_distribution<double> loss_draw(-5.0, 5.0);
        std::uniform_real_distribution<double> weight_draw(0.1, 3.0);
        const int n = count(rng);
        std::vector<double> losses(n), weights(n);
        do {
            for (double& l : losses) l = loss_draw(rng);
        } while (*std::max_element(losses.begin(), losses.end()) -
                     *std::min_element(losses.begin(), losses.end()) <
                 0.1);
        for (double& w : weights) w = weight_draw(rng);
        const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());

        worst = std::max(worst, std::fabs(tilted_aggregate(losses, weights, 1e3) - *hi));
        worst = std::max(worst, std::fabs(tilted_aggregate(losses, weights, -1e3) - *lo));
    }

    return {"tilt-extreme-limits", worst < 1e-2,
            "worst |tilted(+-1e3) - max/min| = " + fmt("%.3e", worst) + " (limit 1e-2)"};
}

CheckResult check_reduction_fedavg(const VerifyOptions& opts) {
    return reduction_check("reduction-fedavg", 1, opts.seed);
}

CheckResult check_reduction_fedprox(const VerifyOptions& opts) {
    return reduction_check("reduction-fedprox", 2, opts.seed);
}

CheckResult check_reduction_ditto(const VerifyOptions& opts) {
    return reduction_check("reduction-ditto", 3, opts.seed);
}

CheckResult check_linear_convergence(const VerifyOptions& opts) {
    const auto objective = convergence_instance(opts.seed);
    const ParamVector start(param_count(objective.model), 0.0);
    constexpr double kStep = 0.05;
    constexpr int kIters = 200;

    const auto trace = gradient_descent_trace(objective, start, kStep, kIters);
    // Reference optimum from a much longer run at the same step size.
    const auto long_trace = gradient_descent_trace(objective, start, kStep, 20000);
    const double optimum = long_trace.back();

    std::vector<double> gaps;
    for (int t = 0; t <= kIters; ++t) {
        const double gap = trace[t] - optimum;
        if (gap <= 0.0)
            return {"convergence-linear-rate", false, "non-positive objective gap"};
        gaps.push_back(gap);
    }
    const auto fit = fit_linear_rate(gaps);
    const bool pass = fit.rate < 1.0 && fit.r_squared > 0.95;
    return {"convergence-linear-rate", pass,
            "fitted rate " + fmt("%.6f", fit.rate) + " (limit <1), R^2 " +
                fmt("%.4f", fit.r_squared) + " (limit >0.95)"};
}

CheckResult check_karimi_bound(const VerifyOptions& opts) {
    (void)opts;
    // Quadratic with known curvature bounds: f(x) = 1/2 sum d_i x_i^2 with
    // d_i in [mu, L]. Gradient descent at step 1/L contracts coordinate i by
    // (1 - d_i/L) per iteration, so the gap sequence is exact.
    const double mu = 0.5, L = 5.0;
    const std::vector<double> curv = {mu, 0.8, 1.3, 2.2, 3.6, L};
    ParamVector x(curv.size(), 1.0);

    std::vector<double> gaps;
    for (int t = 0; t <= 200; ++t) {
        double f = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) f += 0.5 * curv[i] * x[i] * x[i];
        gaps.push_back(f);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= (1.0 / L) * curv[i] * x[i];
    }

    const auto fit = fit_linear_rate(gaps);
    const double bound = 1.0 - mu / L + 0.02;
    return {"convergence-karimi-bound", fit.rate <= bound,
            "fitted rate " + fmt("%.4f", fit.rate) + " vs bound " + fmt("%.4f", bound)};
}

CheckResult check_pl_inequality(const VerifyOptions& opts) {
    const auto objective = convergence_instance(opts.seed);
    const ParamVector start(param_count(objective.model), 0.0);
    const double optimum = gradient_descent_trace(objective, start, 0.05, 20000).back();

    std::vector<ParamVector> points;
    auto rng = make_rng({opts.seed, 6});
    for (int i = 0; i < 100; ++i)
        points.push_back(random_params(rng, param_count(objective.model), 1.0));

    // Strong convexity constant of the instance: the l2 term plus the
    // proximal weight (the cross-entropy Hessian is positive semidefinite).
    const double pl_mu = objective.l2_reg + objective.mu;
    const bool ok = pl_gap_check([&](const ParamVector& v) { return objective.value(v); },
                                 [&](const ParamVector& v) { return objective.gradient(v); },
                                 optimum, points, pl_mu);
    return {"pl-inequality", ok,
            "PL inequality with constant " + fmt("%.3f", pl_mu) + " at 100 random points"};
}

std::vector<CheckResult> run_verification(const VerifyOptions& opts) {
    return {
        check_tilt_gradients(opts),    check_model_gradients(opts),
        check_tilt_bounds(opts),       check_tilt_zero_continuity(opts),
        check_tilt_extreme_limits(opts), check_reduction_fedavg(opts),
        check_reduction_fedprox(opts), check_reduction_ditto(opts),
        check_linear_convergence(opts), check_karimi_bound(opts),
        check_pl_inequality(opts),
    };
}

}  // namespace fedtilt
