#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedtilt/param_vector.hpp"

namespace fedtilt {

// Tilt magnitudes below this are treated as exactly zero and evaluated with
// the analytic t -> 0 limit (the plain weighted average).
inline constexpr double kZeroTiltEps = 1e-9;

enum class DistanceKind { SquaredEuclidean };

// The four hyperparameters selecting FedTilt behaviour. q tilts the server
// aggregation over client-model distances, tau tilts across classes within a
// client, lambda tilts across examples within a class, and mu weighs the
// proximal pull of personalized models toward the global model.
struct TiltConfig {
    double q = 0.0;
    double tau = 0.0;
    double lambda = 0.0;
    double mu = 0.0;
    DistanceKind dist = DistanceKind::SquaredEuclidean;

    void validate() const;
};

// Per-example loss value and its gradient w.r.t. the model parameters.
struct LossSample {
    double value = 0.0;
    ParamVector gradient;
};

// Value/gradient pair produced by the tilted-loss operations.
struct TiltedValue {
    double value = 0.0;
    ParamVector gradient;
};

// One class's contribution to the outer (client-level) tilt: the class shard
// size, the class tilted loss, and its gradient.
struct ClassTerm {
    std::size_t size = 0;
    double value = 0.0;
    ParamVector gradient;
};

// Weighted t-tilted aggregate of the losses:
//   (1/t) * log( sum_i wbar_i * exp(t * l_i) ),  wbar_i = w_i / sum w.
// Evaluated with a max-shifted log-sum-exp; |t| < kZeroTiltEps falls back to
// the weighted average. The result is clamped to [min l, max l], which the
// exact value always satisfies.
double tilted_aggregate(std::span<const double> losses, std::span<const double> weights,
                        double t);

// Softmax-style coefficients c_i = wbar_i e^{t l_i} / sum_j wbar_j e^{t l_j}.
// They sum to one and give the chain-rule weights for any gradient flowing
// through tilted_aggregate: d/dx = sum_i c_i * d l_i/dx.
std::vector<double> tilted_gradient_weights(std::span<const double> losses,
                                            std::span<const double> weights, double t);

// Lambda-tilted loss of one class shard (uniform weights over its examples)
// together with the exact parameter gradient.
TiltedValue class_tilted_loss(std::span<const LossSample> class_losses, double lambda);

// Tau-tilted aggregate over per-class tilted losses, weighted by class shard
// sizes. This is the two-level client loss; the gradient chains through the
// outer tilt coefficients.
TiltedValue client_tilted_loss(std::span<const ClassTerm> per_class, double tau);

// Local objective: client tilted loss plus the proximal term
// (mu/2) * ||v - w||^2 anchoring the personalized model to the global one.
TiltedValue local_objective(const ParamVector& v, const ParamVector& w,
                            const TiltedValue& client_tilt, double mu);

// q-tilted server loss over squared Euclidean distances ||w_n - w||^2, with
// the gradient taken w.r.t. the global model w. At q = 0 the unique
// stationary point in w is the client-model mean.
TiltedValue global_tilted_loss(std::span<const ParamVector> client_models,
                               const ParamVector& w, double q);

}  // namespace fedtilt
