#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fedtilt/model.hpp"

namespace fedtilt {

// One Gaussian blob: where it sits, how spread out it is, which class it
// labels, and how many train/test points to draw.
struct GaussianGroupSpec {
    std::array<double, 2> center{0.0, 0.0};
    double std_dev = 1.0;
    int label = 0;
    int count_train = 0;
    int count_test = 0;
};

// Additive Gaussian noise on every feature of a fraction of the samples,
// optionally restricted to one class.
struct GaussianNoiseSpec {
    double mean = 0.0;
    double std = 0.15;
    double sample_fraction = 0.1;
    std::optional<int> target_class;
};

// Replaces a fraction of the coordinates of a fraction of the samples with
// uniform values in [0,1).
struct PixelCorruptionSpec {
    double pixel_fraction = 0.3;
    double sample_fraction = 0.3;
};

struct OutlierSpec {
    std::variant<GaussianNoiseSpec, PixelCorruptionSpec> kind = GaussianNoiseSpec{};
    // Persistent outliers are re-drawn every global round; otherwise the
    // round-0 corruption is reused, modelling a one-time injection.
    bool persistent = true;

    void validate() const;
};

struct ClientShards {
    std::vector<Example> train;
    std::vector<Example> test;
};

struct FederatedDataset {
    std::vector<ClientShards> clients;
    int num_classes = 0;
    int input_dim = 0;
};

// The three two-client logistic toy experiments, Gaussian groups per the
// published setup table. Experiment 1 draws 100 train / 20 test per class;
// experiments 2 and 3 draw 150/50 train and 30/10 test for the two classes.
FederatedDataset gen_toy(int experiment, std::uint64_t seed);

// Synthetic multiclass pool: class k centered on the k-th unit coordinate,
// isotropic Gaussian spread. Used for the scaled-down non-IID runs.
std::vector<Example> gen_blobs(int num_classes, int per_class, int input_dim,
                               double spread, std::uint64_t seed);

// Splits a pooled dataset across clients so each holds exactly
// classes_per_client distinct classes (round-robin over a seeded class
// permutation), with a stratified 80/20 train/test split inside each client.
FederatedDataset partition_noniid(const std::vector<Example>& pool, int num_clients,
                                  int classes_per_client, std::uint64_t seed);

// IDX ubyte image + label files (the MNIST container format). Pixels are
// scaled to [0,1] and images flattened row-major.
std::vector<Example> load_idx(const std::string& images_path,
                              const std::string& labels_path);

// Corrupted copy of the shard. The affected subset is drawn from a generator
// keyed by (seed, round), so persistent injection corrupts a fresh subset
// each round while the clean shard is never touched.
std::vector<Example> inject_outliers(const std::vector<Example>& shard,
                                     const OutlierSpec& spec, int round,
                                     std::uint64_t seed);

}  // namespace fedtilt
