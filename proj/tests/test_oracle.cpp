#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedtilt/oracle.hpp"

using namespace fedtilt;

TEST_CASE("finite differences on a quadratic recover the point") {
    const ParamVector x{0.3, -1.2, 2.0, 0.0};
    const auto grad = finite_diff_grad(
        [](const ParamVector& p) { return 0.5 * dot(p, p); }, x, 1e-5);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(grad[i] == doctest::Approx(x[i]).epsilon(1e-8).scale(1.0));
}

TEST_CASE("finite differences of a constant vanish") {
    const auto grad = finite_diff_grad([](const ParamVector&) { return 4.2; },
                                       ParamVector{1.0, 2.0}, 1e-6);
    CHECK(grad[0] == doctest::Approx(0.0));
    CHECK(grad[1] == doctest::Approx(0.0));
}

TEST_CASE("finite-difference error decays quadratically with the step") {
    // f with a known gradient and nonzero third derivative, so the
    // truncation term dominates at these step sizes.
    const auto f = [](const ParamVector& p) { return std::exp(p[0]) * std::sin(p[1]); };
    const ParamVector x{0.4, 0.9};
    const ParamVector exact{std::exp(0.4) * std::sin(0.9), std::exp(0.4) * std::cos(0.9)};

    auto err = [&](double h) {
        const auto g = finite_diff_grad(f, x, h);
        return linf_distance(g, exact);
    };
    const double e1 = err(1e-2);
    const double e2 = err(5e-3);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("finite differences reject bad input") {
    CHECK_THROWS_AS(finite_diff_grad([](const ParamVector&) { return 0.0; },
                                     ParamVector{1.0}, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_grad(
                        [](const ParamVector&) { return std::nan(""); },
                        ParamVector{1.0}, 1e-6),
                    std::runtime_error);
}

TEST_CASE("rate fitting recovers exact geometric sequences") {
    std::vector<double> halving;
    double g = 1.0;
    for (int i = 0; i < 20; ++i) {
        halving.push_back(g);
        g *= 0.5;
    }
    const auto fit = fit_linear_rate(halving);
    CHECK(fit.rate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> planted;
    g = 3.7;
    for (int i = 0; i < 50; ++i) {
        planted.push_back(g);
        g *= 0.93;
    }
    CHECK(fit_linear_rate(planted).rate == doctest::Approx(0.93).epsilon(1e-6));
}

TEST_CASE("rate fitting of constant gaps is rate one") {
    const std::vector<double> flat(15, 0.8);
    const auto fit = fit_linear_rate(flat);
    CHECK(fit.rate == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("rate fitting rejects bad input") {
    CHECK_THROWS_AS(fit_linear_rate(std::vector<double>{1.0, 0.5}), std::invalid_argument);
    std::vector<double> with_zero(12, 1.0);
    with_zero[5] = 0.0;
    CHECK_THROWS_AS(fit_linear_rate(with_zero), std::invalid_argument);
}

TEST_CASE("PL check: strongly convex quadratic holds with equality") {
    const double mu = 0.7;
    const auto f = [mu](const ParamVector& p) { return 0.5 * mu * dot(p, p); };
    const auto grad = [mu](const ParamVector& p) {
        ParamVector g = p;
        for (double& x : g) x *= mu;
        return g;
    };
    const std::vector<ParamVector> points{{1.0, 2.0}, {-0.3, 0.4}, {0.0, 0.0}, {5.0, -5.0}};
    CHECK(pl_gap_check(f, grad, 0.0, points, mu));
}

TEST_CASE("PL check: a plateau away from the minimum violates the inequality") {
    // f = ||x||^2 inside the unit ball, flat at 1 outside
    const auto f = [](const ParamVector& p) { return std::min(dot(p, p), 1.0); };
    const auto grad = [](const ParamVector& p) {
        ParamVector g(p.size(), 0.0);
        if (dot(p, p) < 1.0)
            for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2.0 * p[i];
        return g;
    };
    const std::vector<ParamVector> plateau{{2.0, 0.0}};
    CHECK_FALSE(pl_gap_check(f, grad, 0.0, plateau, 0.5));
    CHECK_THROWS_AS(pl_gap_check(f, grad, 0.0, plateau, 0.0), std::invalid_argument);
}
