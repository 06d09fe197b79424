#include "fedtilt/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "fedtilt/rng.hpp"

namespace fedtilt {

namespace {

// log(1 + e^s) without overflow for large |s|.
double softplus(double s) {
    if (s > 0.0) return s + std::log1p(std::exp(-s));
    return std::log1p(std::exp(s));
}

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

std::vector<int> layer_dims(const ModelSpec& spec) {
    std::vector<int> dims;
    dims.push_back(spec.input_dim);
    for (int h : spec.hidden_dims) dims.push_back(h);
    dims.push_back(spec.num_classes);
    return dims;
}

void check_example(const ModelSpec& spec, std::span<const double> features, int label) {
    if (static_cast<int>(features.size()) != spec.input_dim)
        throw std::invalid_argument("feature dimension mismatch");
    if (label < 0 || label >= spec.num_classes)
        throw std::invalid_argument("label out of range");
}

void check_params(const ModelSpec& spec, const ParamVector& params) {
    if (params.size() != param_count(spec))
        throw std::invalid_argument("parameter length mismatch");
}

// Class scores for the linear heads and the MLP. For LogisticBinary the
// scores are {0, x.w + b} so the same argmax/softmax code paths apply.
std::vector<double> class_scores(const ModelSpec& spec, const ParamVector& params,
                                 std::span<const double> features) {
    switch (spec.kind) {
        case ModelKind::LogisticBinary: {
            const double s = dot({params.data(), static_cast<std::size_t>(spec.input_dim)},
                                 features) +
                             params.back();
            return {0.0, s};
        }
        case ModelKind::SoftmaxLinear: {
            const int d = spec.input_dim, k = spec.num_classes;
            std::vector<double> scores(k);
            for (int c = 0; c < k; ++c)
                scores[c] = dot({params.data() + static_cast<std::size_t>(c) * d,
                                 static_cast<std::size_t>(d)},
                                features) +
                            params[static_cast<std::size_t>(k) * d + c];
            return scores;
        }
        case ModelKind::Mlp: {
            const auto dims = layer_dims(spec);
            std::vector<double> act(features.begin(), features.end());
            std::size_t off = 0;
            for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
                const int in = dims[l], out = dims[l + 1];
                std::vector<double> next(out);
                for (int o = 0; o < out; ++o)
                    next[o] = dot({params.data() + off + static_cast<std::size_t>(o) * in,
                                   static_cast<std::size_t>(in)},
                                  act) +
                              params[off + static_cast<std::size_t>(out) * in + o];
                off += static_cast<std::size_t>(out) * in + out;
                if (l + 2 < dims.size())
                    for (double& v : next) v = std::max(v, 0.0);
                act = std::move(next);
            }
            return act;
        }
    }
    throw std::logic_error("unknown model kind");
}

}  // namespace

void ModelSpec::validate() const {
    if (input_dim <= 0) throw std::invalid_argument("input_dim must be positive");
    if (num_classes < 2) throw std::invalid_argument("num_classes must be at least 2");
    if (kind == ModelKind::LogisticBinary && num_classes != 2)
        throw std::invalid_argument("LogisticBinary requires num_classes == 2");
    for (int h : hidden_dims)
        if (h <= 0) throw std::invalid_argument("hidden dims must be positive");
}

std::size_t param_count(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::LogisticBinary:
            return static_cast<std::size_t>(spec.input_dim) + 1;
        case ModelKind::SoftmaxLinear:
            return static_cast<std::size_t>(spec.num_classes) * (spec.input_dim + 1);
        case ModelKind::Mlp: {
            const auto dims = layer_dims(spec);
            std::size_t n = 0;
            for (std::size_t l = 0; l + 1 < dims.size(); ++l)
                n += static_cast<std::size_t>(dims[l]) * dims[l + 1] + dims[l + 1];
            return n;
        }
    }
    throw std::logic_error("unknown model kind");
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParamVector params(param_count(spec), 0.0);
    if (spec.kind != ModelKind::Mlp) return params;

    auto rng = make_rng({seed, static_cast<std::uint64_t>(RngStream::ModelInit)});
    const auto dims = layer_dims(spec);
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-scale, scale);
        for (std::size_t i = 0; i < static_cast<std::size_t>(out) * in; ++i)
            params[off + i] = u(rng);
        off += static_cast<std::size_t>(out) * in + out;  // biases stay zero
    }
    return params;
}

LossSample loss_and_grad(const ModelSpec& spec, const ParamVector& params,
                         const Example& example) {
    check_params(spec, params);
    check_example(spec, example.features, example.label);

    LossSample out;
    out.gradient.assign(params.size(), 0.0);
    const auto& x = example.features;
    const int y = example.label;

    switch (spec.kind) {
        case ModelKind::LogisticBinary: {
            const int d = spec.input_dim;
            const double s =
                dot({params.data(), static_cast<std::size_t>(d)}, x) + params.back();
            out.value = softplus(s) - (y == 1 ? s : 0.0);
            const double ds = sigmoid(s) - (y == 1 ? 1.0 : 0.0);
            for (int i = 0; i < d; ++i) out.gradient[i] = ds * x[i];
            out.gradient.back() = ds;
            return out;
        }
        case ModelKind::SoftmaxLinear: {
            const int d = spec.input_dim, k = spec.num_classes;
            auto scores = class_scores(spec, params, x);
            const double shift = *std::max_element(scores.begin(), scores.end());
            double z = 0.0;
            for (double s : scores) z += std::exp(s - shift);
            out.value = shift + std::log(z) - scores[y];
            for (int c = 0; c < k; ++c) {
                const double dc = std::exp(scores[c] - shift) / z - (c == y ? 1.0 : 0.0);
                for (int i = 0; i < d; ++i)
                    out.gradient[static_cast<std::size_t>(c) * d + i] = dc * x[i];
                out.gradient[static_cast<std::size_t>(k) * d + c] = dc;
            }
            return out;
        }
        case ModelKind::Mlp: {
            const auto dims = layer_dims(spec);
            const std::size_t layers = dims.size() - 1;

            // Forward pass, keeping each layer's post-activation input.
            std::vector<std::vector<double>> inputs(layers);
            std::vector<double> act(x.begin(), x.end());
            std::vector<std::size_t> offsets(layers);
            std::size_t off = 0;
            for (std::size_t l = 0; l < layers; ++l) {
                inputs[l] = act;
                offsets[l] = off;
                const int in = dims[l], outn = dims[l + 1];
                std::vector<double> next(outn);
                for (int o = 0; o < outn; ++o)
                    next[o] = dot({params.data() + off + static_cast<std::size_t>(o) * in,
                                   static_cast<std::size_t>(in)},
                                  act) +
                              params[off + static_cast<std::size_t>(outn) * in + o];
                off += static_cast<std::size_t>(outn) * in + outn;
                if (l + 1 < layers)
                    for (double& v : next) v = std::max(v, 0.0);
                act = std::move(next);
            }

            const double shift = *std::max_element(act.begin(), act.end());
            double z = 0.0;
            for (double s : act) z += std::exp(s - shift);
            out.value = shift + std::log(z) - act[y];

            // Backward pass from d(loss)/d(scores) = softmax - onehot.
            std::vector<double> delta(act.size());
            for (std::size_t c = 0; c < act.size(); ++c)
                delta[c] = std::exp(act[c] - shift) / z -
                           (static_cast<int>(c) == y ? 1.0 : 0.0);

            for (std::size_t l = layers; l-- > 0;) {
                const int in = dims[l], outn = dims[l + 1];
                const std::size_t base = offsets[l];
                for (int o = 0; o < outn; ++o) {
                    for (int i = 0; i < in; ++i)
                        out.gradient[base + static_cast<std::size_t>(o) * in + i] =
                            delta[o] * inputs[l][i];
                    out.gradient[base + static_cast<std::size_t>(outn) * in + o] = delta[o];
                }
                if (l == 0) break;
                std::vector<double> prev(in, 0.0);
                for (int i = 0; i < in; ++i) {
                    for (int o = 0; o < outn; ++o)
                        prev[i] += delta[o] *
                                   params[base + static_cast<std::size_t>(o) * in + i];
                    // ReLU mask: the stored input of this layer is the
                    // activated output of the previous one.
                    if (inputs[l][i] <= 0.0) prev[i] = 0.0;
                }
                delta = std::move(prev);
            }
            return out;
        }
    }
    throw std::logic_error("unknown model kind");
}

int predict(const ModelSpec& spec, const ParamVector& params,
            std::span<const double> features) {
    check_params(spec, params);
    if (static_cast<int>(features.size()) != spec.input_dim)
        throw std::invalid_argument("feature dimension mismatch");
    const auto scores = class_scores(spec, params, features);
    int best = 0;
    for (int c = 1; c < static_cast<int>(scores.size()); ++c)
        if (scores[c] > scores[best]) best = c;
    return best;
}

}  // namespace fedtilt
