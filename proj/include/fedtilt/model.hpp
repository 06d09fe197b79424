#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedtilt/param_vector.hpp"
#include "fedtilt/tilt.hpp"

namespace fedtilt {

enum class ModelKind { LogisticBinary, SoftmaxLinear, Mlp };

// One labelled example: a feature vector and a class index.
struct Example {
    std::vector<double> features;
    int label = 0;

    bool operator==(const Example&) const = default;
};

struct ModelSpec {
    ModelKind kind = ModelKind::LogisticBinary;
    int input_dim = 2;
    int num_classes = 2;
    // Hidden layer widths, MLP only. ReLU between linear layers.
    std::vector<int> hidden_dims;

    void validate() const;
};

std::size_t param_count(const ModelSpec& spec);

// Deterministic initial parameters. Linear models start at zero so runs on a
// fixed dataset are exactly reproducible; MLP weights are uniform in
// +-1/sqrt(fan_in) with zero biases.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

// Negative log-likelihood of the example's label plus the exact gradient
// w.r.t. the parameters.
LossSample loss_and_grad(const ModelSpec& spec, const ParamVector& params,
                         const Example& example);

// Argmax class under the model's scores; ties break toward the smallest
// class index.
int predict(const ModelSpec& spec, const ParamVector& params,
            std::span<const double> features);

}  // namespace fedtilt
