#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fedtilt/data.hpp"
#include "fedtilt/metrics.hpp"
#include "fedtilt/model.hpp"
#include "fedtilt/tilt.hpp"

namespace fedtilt {

// How the personalized model relates to the intermediate model inside a
// round. Personalized is the standard FedTilt client; the other two modes
// realize the structural limits used by the reduction checks (mu -> infinity
// ties v to the intermediate model; ProximalIntermediate trains a single
// proximal model per round and reports it as both).
enum class ClientCoupling { Personalized, TiedToIntermediate, ProximalIntermediate };

struct RunConfig {
    int num_clients = 2;
    double participation_fraction = 1.0;  // rho
    int batch_size = 10;                  // B
    int global_rounds = 10;               // T
    int client_epochs = 1;                // E
    int server_epochs = 50;               // E2
    double lr_client = 0.01;              // eta1, intermediate model step
    double lr_personal = 0.01;            // eta2, personalized model step
    double lr_server = 0.1;               // eta3, server step
    TiltConfig tilt;
    std::uint64_t seed = 0;
    // Replaces the server gradient loop with the exact q = 0 fixed point
    // (the client-model mean). Used by the equivalence checks.
    bool analytic_q0_server = false;
    ClientCoupling coupling = ClientCoupling::Personalized;
    // Keeps per-round parameter snapshots in the result (small runs only).
    bool record_trajectory = false;

    int selected_per_round() const;
    void validate() const;
};

struct ClientState {
    int id = 0;
    std::vector<Example> clean_train;
    std::vector<Example> test;
    ParamVector v;  // personalized model
    std::optional<int> last_selected_round;
};

struct GlobalState {
    ParamVector w;
    int round = 0;
};

struct ClientUpdateResult {
    ParamVector w_n;  // intermediate model, feeds server aggregation
    ParamVector v_n;  // personalized model
};

struct RunResult {
    std::vector<RoundRecord> rounds;
    ParamVector final_w;
    std::vector<ParamVector> final_v;
    // Populated when record_trajectory is set: w after every round, and the
    // full personalized-model state after every round.
    std::vector<ParamVector> w_history;
    std::vector<std::vector<ParamVector>> v_history;
};

// Two-level tilted loss of one batch at the given parameters: examples are
// grouped by class, each class gets the lambda tilt, and classes present in
// the batch combine under the tau tilt weighted by batch class counts.
TiltedValue batch_two_level_tilt(const ModelSpec& model, const ParamVector& params,
                                 std::span<const Example> batch, double tau,
                                 double lambda);

// One client's round: E epochs of seeded mini-batches, stepping the
// intermediate model on the two-level tilted loss and the personalized model
// on the local objective with the proximal anchor frozen at w_prev. Pure in
// its inputs; the caller stores the returned v.
ClientUpdateResult client_update(const ClientState& client, const ParamVector& w_prev,
                                 const ModelSpec& model, const RunConfig& cfg,
                                 const std::optional<OutlierSpec>& outliers, int round);

// E2 gradient steps on the q-tilted global loss (or the analytic q = 0 mean
// when configured).
ParamVector server_update(const ParamVector& w_prev,
                          const std::vector<ParamVector>& client_models,
                          const RunConfig& cfg);

// The full round loop: sample clients, run client updates (concurrently when
// FEDTILT_THREADS allows), aggregate, record metrics.
RunResult run(const FederatedDataset& dataset, const ModelSpec& model,
              const RunConfig& cfg, const std::optional<OutlierSpec>& outliers);

}  // namespace fedtilt
