#include "fedtilt/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "fedtilt/rng.hpp"
#include "fedtilt/schedule.hpp"

namespace fedtilt {

namespace {

int max_worker_threads() {
    if (const char* env = std::getenv("FEDTILT_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Tasks must be mutually independent; each owns
// its seeded randomness, so scheduling never changes results.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int workers = std::min<int>(max_worker_threads(), static_cast<int>(n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            try {
                for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(n);  // stop handing out work
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

int RunConfig::selected_per_round() const {
    return std::max(static_cast<int>(participation_fraction * num_clients), 1);
}

void RunConfig::validate() const {
    if (num_clients <= 0) throw std::invalid_argument("num_clients must be positive");
    if (!(participation_fraction > 0.0 && participation_fraction <= 1.0))
        throw std::invalid_argument("participation_fraction must lie in (0,1]");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    if (global_rounds < 0) throw std::invalid_argument("global_rounds must be non-negative");
    if (client_epochs <= 0 || server_epochs <= 0)
        throw std::invalid_argument("epoch counts must be positive");
    if (!(lr_client >= 0.0 && lr_personal >= 0.0 && lr_server >= 0.0))
        throw std::invalid_argument("learning rates must be non-negative");
    tilt.validate();
}

TiltedValue batch_two_level_tilt(const ModelSpec& model, const ParamVector& params,
                                 std::span<const Example> batch, double tau,
                                 double lambda) {
    if (batch.empty()) throw std::invalid_argument("empty batch");

    std::map<int, std::vector<const Example*>> by_class;
    for (const Example& ex : batch) by_class[ex.label].push_back(&ex);

    std::vector<ClassTerm> terms;
    terms.reserve(by_class.size());
    for (const auto& [cls, members] : by_class) {
        std::vector<LossSample> samples;
        samples.reserve(members.size());
        for (const Example* ex : members) samples.push_back(loss_and_grad(model, params, *ex));
        auto tilted = class_tilted_loss(samples, lambda);
        terms.push_back({members.size(), tilted.value, std::move(tilted.gradient)});
    }
    return client_tilted_loss(terms, tau);
}

ClientUpdateResult client_update(const ClientState& client, const ParamVector& w_prev,
                                 const ModelSpec& model, const RunConfig& cfg,
                                 const std::optional<OutlierSpec>& outliers, int round) {
    check_same_length(w_prev, client.v);
    if (client.clean_train.empty()) throw std::invalid_argument("empty training shard");

    // One-time outliers keep their round-0 corruption; persistent ones are
    // re-drawn for this round.
    std::vector<Example> corrupted;
    const std::vector<Example>* shard = &client.clean_train;
    if (outliers) {
        corrupted = inject_outliers(client.clean_train, *outliers,
                                    outliers->persistent ? round : 0,
                                    mix_seed({cfg.seed, static_cast<std::uint64_t>(
                                                            RngStream::OutlierInjection),
                                              static_cast<std::uint64_t>(client.id)}));
        shard = &corrupted;
    }

    const double tau = cfg.tilt.tau, lambda = cfg.tilt.lambda, mu = cfg.tilt.mu;
    ParamVector w_n = w_prev;
    ParamVector v_n = client.v;
    if (cfg.coupling == ClientCoupling::ProximalIntermediate) v_n = w_prev;

    std::vector<Example> batch;
    for (int epoch = 0; epoch < cfg.client_epochs; ++epoch) {
        const auto order = epoch_order(shard->size(), cfg.seed, round, client.id, epoch);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back((*shard)[order[i]]);

            switch (cfg.coupling) {
                case ClientCoupling::Personalized: {
                    auto tilt_w = batch_two_level_tilt(model, w_n, batch, tau, lambda);
                    auto tilt_v = batch_two_level_tilt(model, v_n, batch, tau, lambda);
                    auto local = local_objective(v_n, w_prev, tilt_v, mu);
                    axpy(w_n, -cfg.lr_client, tilt_w.gradient);
                    axpy(v_n, -cfg.lr_personal, local.gradient);
                    break;
                }
                case ClientCoupling::TiedToIntermediate: {
                    auto tilt_w = batch_two_level_tilt(model, w_n, batch, tau, lambda);
                    axpy(w_n, -cfg.lr_client, tilt_w.gradient);
                    break;
                }
                case ClientCoupling::ProximalIntermediate: {
                    auto tilt_v = batch_two_level_tilt(model, v_n, batch, tau, lambda);
                    auto local = local_objective(v_n, w_prev, tilt_v, mu);
                    axpy(v_n, -cfg.lr_client, local.gradient);
                    break;
                }
            }
        }
    }

    ClientUpdateResult out;
    switch (cfg.coupling) {
        case ClientCoupling::Personalized:
            out.w_n = std::move(w_n);
            out.v_n = std::move(v_n);
            break;
        case ClientCoupling::TiedToIntermediate:
            out.v_n = w_n;
            out.w_n = std::move(w_n);
            break;
        case ClientCoupling::ProximalIntermediate:
            out.w_n = v_n;
            out.v_n = std::move(v_n);
            break;
    }
    require_finite(out.w_n, "intermediate client model");
    require_finite(out.v_n, "personalized client model");
    return out;
}

ParamVector server_update(const ParamVector& w_prev,
                          const std::vector<ParamVector>& client_models,
                          const RunConfig& cfg) {
    if (client_models.empty()) throw std::invalid_argument("empty client model set");

    if (cfg.analytic_q0_server && std::fabs(cfg.tilt.q) < kZeroTiltEps) {
        ParamVector mean(w_prev.size(), 0.0);
        for (const auto& m : client_models) {
            check_same_length(m, w_prev);
            axpy(mean, 1.0, m);
        }
        for (double& x : mean) x /= static_cast<double>(client_models.size());
        return mean;
    }

    ParamVector w = w_prev;
    for (int e = 0; e < cfg.server_epochs; ++e) {
        const auto loss = global_tilted_loss(client_models, w, cfg.tilt.q);
        axpy(w, -cfg.lr_server, loss.gradient);
    }
    require_finite(w, "global model");
    return w;
}

RunResult run(const FederatedDataset& dataset, const ModelSpec& model,
              const RunConfig& cfg, const std::optional<OutlierSpec>& outliers) {
    cfg.validate();
    model.validate();
    if (static_cast<int>(dataset.clients.size()) != cfg.num_clients)
        throw std::invalid_argument("dataset client count does not match num_clients");
    if (outliers) outliers->validate();

    GlobalState state{init_params(model, cfg.seed), 0};
    std::vector<ClientState> clients;
    clients.reserve(dataset.clients.size());
    for (std::size_t n = 0; n < dataset.clients.size(); ++n)
        clients.push_back({static_cast<int>(n), dataset.clients[n].train,
                           dataset.clients[n].test, state.w, std::nullopt});

    RunResult result;
    const int m = cfg.selected_per_round();
    for (state.round = 1; state.round <= cfg.global_rounds; ++state.round) {
        const int round = state.round;
        const auto selected = sample_clients(cfg.num_clients, m, cfg.seed, round);

        std::vector<ClientUpdateResult> updates(selected.size());
        const ParamVector& w_prev = state.w;
        parallel_for(selected.size(), [&](std::size_t i) {
            updates[i] =
                client_update(clients[selected[i]], w_prev, model, cfg, outliers, round);
        });

        std::vector<ParamVector> intermediates;
        intermediates.reserve(updates.size());
        for (auto& u : updates) intermediates.push_back(std::move(u.w_n));
        state.w = server_update(state.w, intermediates, cfg);
        require_finite(state.w, "global model");

        for (std::size_t i = 0; i < selected.size(); ++i) {
            clients[selected[i]].v = std::move(updates[i].v_n);
            clients[selected[i]].last_selected_round = round;
        }

        std::vector<ParamVector> personalized;
        personalized.reserve(clients.size());
        for (const auto& c : clients) personalized.push_back(c.v);

        RoundRecord record;
        record.fairness = fairness_report(personalized, model, dataset, state.w, round);
        record.global_loss = global_tilted_loss(intermediates, state.w, cfg.tilt.q).value;
        double local_sum = 0.0;
        for (int id : selected) {
            const auto tilt = batch_two_level_tilt(model, clients[id].v,
                                                   clients[id].clean_train, cfg.tilt.tau,
                                                   cfg.tilt.lambda);
            local_sum += local_objective(clients[id].v, state.w, tilt, cfg.tilt.mu).value;
        }
        record.mean_local_loss = local_sum / static_cast<double>(selected.size());
        result.rounds.push_back(std::move(record));

        if (cfg.record_trajectory) {
            result.w_history.push_back(state.w);
            result.v_history.push_back(personalized);
        }
    }

    result.final_w = std::move(state.w);
    result.final_v.reserve(clients.size());
    for (auto& c : clients) result.final_v.push_back(std::move(c.v));
    return result;
}

}  // namespace fedtilt
