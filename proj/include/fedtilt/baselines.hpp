#pragma once

#include <optional>

#include "fedtilt/protocol.hpp"

namespace fedtilt {

enum class BaselineMethod { FedAvg, FedProx, Ditto };

struct BaselineKind {
    BaselineMethod method = BaselineMethod::FedAvg;
    double mu = 0.0;  // proximal weight for FedProx and Ditto
};

// Reference implementations trained on the plain average loss, deliberately
// not routed through the tilted-loss code so they can act as oracles for the
// special-case reductions. They consume the same selection and batch-order
// streams as the FedTilt loop.
RunResult run_baseline(const BaselineKind& kind, const FederatedDataset& dataset,
                       const ModelSpec& model, const RunConfig& cfg,
                       const std::optional<OutlierSpec>& outliers = std::nullopt);

// Runs FedTilt under the special-case settings of the given proposition
// (1: FedAvg, 2: FedProx, 3: Ditto) next to the matching baseline with
// identical seeds, and returns the largest per-round parameter deviation in
// the infinity norm. Requires an exactly comparable configuration: full
// batch, full participation, the analytic q = 0 server, and zero tilts.
double check_reduction(int proposition, const FederatedDataset& dataset,
                       const ModelSpec& model, const RunConfig& cfg);

}  // namespace fedtilt
