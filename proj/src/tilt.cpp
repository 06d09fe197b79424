#include "fedtilt/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedtilt {

void TiltConfig::validate() const {
    if (!(mu >= 0.0)) throw std::invalid_argument("mu must be non-negative");
    if (!std::isfinite(q) || !std::isfinite(tau) || !std::isfinite(lambda))
        throw std::invalid_argument("tilt values must be finite");
}

namespace {

void check_tilt_inputs(std::span<const double> losses, std::span<const double> weights) {
    if (losses.empty()) throw std::invalid_argument("empty loss set");
    if (weights.size() != losses.size() ||
        std::any_of(weights.begin(), weights.end(), [](double w) { return !(w > 0.0); }))
        throw std::invalid_argument("invalid weight");
}

double weight_sum(std::span<const double> weights) {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

}  // namespace

double tilted_aggregate(std::span<const double> losses, std::span<const double> weights,
                        double t) {
    check_tilt_inputs(losses, weights);
    const double wsum = weight_sum(weights);

    if (std::fabs(t) < kZeroTiltEps) {
        double mean = 0.0;
        for (std::size_t i = 0; i < losses.size(); ++i) mean += weights[i] / wsum * losses[i];
        return mean;
    }

    // Max-shifted log-sum-exp on s_i = t * l_i. The toy experiments run
    // |lambda| = 100, which overflows the naive exponentials.
    double shift = -std::numeric_limits<double>::infinity();
    for (double l : losses) shift = std::max(shift, t * l);
    double acc = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i)
        acc += weights[i] / wsum * std::exp(t * losses[i] - shift);
    const double value = (shift + std::log(acc)) / t;

    const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
    return std::clamp(value, *lo, *hi);
}

std::vector<double> tilted_gradient_weights(std::span<const double> losses,
                                            std::span<const double> weights, double t) {
    check_tilt_inputs(losses, weights);
    const double wsum = weight_sum(weights);

    std::vector<double> coeffs(losses.size());
    if (std::fabs(t) < kZeroTiltEps) {
        for (std::size_t i = 0; i < losses.size(); ++i) coeffs[i] = weights[i] / wsum;
        return coeffs;
    }

    double shift = -std::numeric_limits<double>::infinity();
    for (double l : losses) shift = std::max(shift, t * l);
    double acc = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        coeffs[i] = weights[i] / wsum * std::exp(t * losses[i] - shift);
        acc += coeffs[i];
    }
    for (double& c : coeffs) c /= acc;
    return coeffs;
}

TiltedValue class_tilted_loss(std::span<const LossSample> class_losses, double lambda) {
    if (class_losses.empty()) throw std::invalid_argument("empty class shard");
    const std::size_t dim = class_losses.front().gradient.size();
    std::vector<double> values(class_losses.size());
    for (std::size_t i = 0; i < class_losses.size(); ++i) {
        if (class_losses[i].gradient.size() != dim)
            throw std::invalid_argument("parameter length mismatch");
        values[i] = class_losses[i].value;
    }
    const std::vector<double> uniform(class_losses.size(), 1.0);

    TiltedValue out;
    out.value = tilted_aggregate(values, uniform, lambda);
    out.gradient.assign(dim, 0.0);
    const auto coeffs = tilted_gradient_weights(values, uniform, lambda);
    for (std::size_t i = 0; i < class_losses.size(); ++i)
        axpy(out.gradient, coeffs[i], class_losses[i].gradient);
    return out;
}

TiltedValue client_tilted_loss(std::span<const ClassTerm> per_class, double tau) {
    if (per_class.empty()) throw std::invalid_argument("empty class set");
    const std::size_t dim = per_class.front().gradient.size();
    std::vector<double> values(per_class.size());
    std::vector<double> weights(per_class.size());
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        if (per_class[k].size == 0) throw std::invalid_argument("invalid weight");
        if (per_class[k].gradient.size() != dim)
            throw std::invalid_argument("parameter length mismatch");
        values[k] = per_class[k].value;
        weights[k] = static_cast<double>(per_class[k].size);
    }

    TiltedValue out;
    out.value = tilted_aggregate(values, weights, tau);
    out.gradient.assign(dim, 0.0);
    const auto coeffs = tilted_gradient_weights(values, weights, tau);
    for (std::size_t k = 0; k < per_class.size(); ++k)
        axpy(out.gradient, coeffs[k], per_class[k].gradient);
    return out;
}

TiltedValue local_objective(const ParamVector& v, const ParamVector& w,
                            const TiltedValue& client_tilt, double mu) {
    check_same_length(v, w);
    check_same_length(v, client_tilt.gradient);

    TiltedValue out;
    out.value = client_tilt.value + 0.5 * mu * squared_distance(v, w);
    out.gradient = client_tilt.gradient;
    for (std::size_t i = 0; i < v.size(); ++i) out.gradient[i] += mu * (v[i] - w[i]);
    return out;
}

TiltedValue global_tilted_loss(std::span<const ParamVector> client_models,
                               const ParamVector& w, double q) {
    if (client_models.empty()) throw std::invalid_argument("empty client model set");
    std::vector<double> distances(client_models.size());
    for (std::size_t n = 0; n < client_models.size(); ++n) {
        check_same_length(client_models[n], w);
        distances[n] = squared_distance(client_models[n], w);
    }
    const std::vector<double> uniform(client_models.size(), 1.0);

    TiltedValue out;
    out.value = tilted_aggregate(distances, uniform, q);
    out.gradient.assign(w.size(), 0.0);
    const auto coeffs = tilted_gradient_weights(distances, uniform, q);
    for (std::size_t n = 0; n < client_models.size(); ++n)
        for (std::size_t i = 0; i < w.size(); ++i)
            out.gradient[i] += coeffs[n] * 2.0 * (w[i] - client_models[n][i]);
    return out;
}

}  // namespace fedtilt
