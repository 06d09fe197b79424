#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedtilt/baselines.hpp"
#include "fedtilt/data.hpp"
#include "fedtilt/model.hpp"
#include "fedtilt/protocol.hpp"

namespace fedtilt {

// Raised for anything wrong with a configuration: unreadable file, bad
// syntax, unknown key, invalid value. The CLI maps it to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using ConfigMap = std::map<std::string, std::string>;

// Flat key = value text, a TOML-compatible subset: one assignment per line,
// optional quotes around string values, # comments.
ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

// Applies a repeatable KEY=VALUE command-line override.
void apply_override(ConfigMap& map, const std::string& assignment);

enum class DatasetKind { Toy1, Toy2, Toy3, Blobs, Idx };
enum class MethodKind { FedTilt, FedAvg, FedProx, Ditto };

// Fully resolved experiment description: dataset, model, method, run
// parameters, and optional outlier injection.
struct ExperimentConfig {
    DatasetKind dataset = DatasetKind::Toy1;
    MethodKind method = MethodKind::FedTilt;
    ModelKind model = ModelKind::LogisticBinary;
    std::vector<int> hidden_dims{128, 64};

    // blobs / idx partitioning
    int num_clients = 2;
    int classes_per_client = 2;
    int blob_classes = 10;
    int blob_per_class = 100;
    int blob_dim = 10;
    double blob_spread = 0.35;
    std::string idx_images;
    std::string idx_labels;
    int idx_limit = 0;  // 0 = use the whole file

    RunConfig run;

    std::string outlier = "none";  // none | gaussian | pixel
    GaussianNoiseSpec gaussian;
    PixelCorruptionSpec pixel;
    bool outlier_persistent = true;

    static ExperimentConfig from_map(const ConfigMap& map);

    // Canonical key/value form of the resolved config; identical configs
    // hash alike.
    ConfigMap canonical_map() const;
    std::string canonical_text() const;
    std::string config_hash() const;

    FederatedDataset build_dataset() const;
    ModelSpec model_spec(const FederatedDataset& dataset) const;
    std::optional<OutlierSpec> outlier_spec() const;
    std::optional<BaselineKind> baseline_kind() const;
};

}  // namespace fedtilt
