#include "fedtilt/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace fedtilt {

ParamVector finite_diff_grad(const std::function<double(const ParamVector&)>& f,
                             const ParamVector& x, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
    ParamVector grad(x.size(), 0.0);
    ParamVector probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + step;
        const double fp = f(probe);
        probe[i] = x[i] - step;
        const double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("non-finite function value in finite differences");
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

LinearRateFit fit_linear_rate(std::span<const double> gaps) {
    if (gaps.size() < 10) throw std::invalid_argument("need at least 10 gap values");

    const std::size_t n = gaps.size();
    double mean_t = 0.0, mean_y = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        if (!(gaps[t] > 0.0)) throw std::invalid_argument("non-positive gap");
        mean_t += static_cast<double>(t);
        mean_y += std::log(gaps[t]);
    }
    mean_t /= static_cast<double>(n);
    mean_y /= static_cast<double>(n);

    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double dt = static_cast<double>(t) - mean_t;
        const double dy = std::log(gaps[t]) - mean_y;
        sxx += dt * dt;
        sxy += dt * dy;
        syy += dy * dy;
    }
    const double slope = sxy / sxx;

    double ss_res = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double fit = mean_y + slope * (static_cast<double>(t) - mean_t);
        const double r = std::log(gaps[t]) - fit;
        ss_res += r * r;
    }

    LinearRateFit out;
    out.rate = std::exp(slope);
    // A flat sequence has zero total variance; the constant fit is exact.
    out.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return out;
}

bool pl_gap_check(const std::function<double(const ParamVector&)>& f,
                  const std::function<ParamVector(const ParamVector&)>& grad_f,
                  double minimum_value, std::span<const ParamVector> points, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
    constexpr double kSlack = 1e-9;
    for (const ParamVector& x : points) {
        const ParamVector g = grad_f(x);
        const double lhs = 0.5 * dot(g, g);
        const double rhs = mu * (f(x) - minimum_value);
        if (lhs + kSlack < rhs) return false;
    }
    return true;
}

}  // namespace fedtilt
