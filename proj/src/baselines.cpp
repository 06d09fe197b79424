#include "fedtilt/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedtilt/rng.hpp"
#include "fedtilt/schedule.hpp"

namespace fedtilt {

namespace {

// Average per-example loss and gradient over a batch. This is the classic
// ERM path the baselines train on.
LossSample mean_loss(const ModelSpec& model, const ParamVector& params,
                     std::span<const Example> batch) {
    LossSample acc;
    acc.gradient.assign(params.size(), 0.0);
    for (const Example& ex : batch) {
        const auto s = loss_and_grad(model, params, ex);
        acc.value += s.value;
        axpy(acc.gradient, 1.0, s.gradient);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    acc.value *= inv;
    for (double& g : acc.gradient) g *= inv;
    return acc;
}

struct BaselineClientResult {
    ParamVector w_n;
    ParamVector v_n;  // Ditto only; otherwise equals w_n
};

BaselineClientResult baseline_client_update(const BaselineKind& kind,
                                            const std::vector<Example>& train,
                                            const ParamVector& v_prev,
                                            const ParamVector& w_prev,
                                            const ModelSpec& model, const RunConfig& cfg,
                                            int client_id, int round) {
    ParamVector w_n = w_prev;
    ParamVector v_n = v_prev;

    std::vector<Example> batch;
    for (int epoch = 0; epoch < cfg.client_epochs; ++epoch) {
        const auto order = epoch_order(train.size(), cfg.seed, round, client_id, epoch);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(train[order[i]]);

            const auto grad_w = mean_loss(model, w_n, batch);
            switch (kind.method) {
                case BaselineMethod::FedAvg:
                    axpy(w_n, -cfg.lr_client, grad_w.gradient);
                    break;
                case BaselineMethod::FedProx: {
                    ParamVector g = grad_w.gradient;
                    for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] += kind.mu * (w_n[i] - w_prev[i]);
                    axpy(w_n, -cfg.lr_client, g);
                    break;
                }
                case BaselineMethod::Ditto: {
                    axpy(w_n, -cfg.lr_client, grad_w.gradient);
                    auto g = mean_loss(model, v_n, batch).gradient;
                    for (std::size_t i = 0; i < g.size(); ++i)
                        g[i] += kind.mu * (v_n[i] - w_prev[i]);
                    axpy(v_n, -cfg.lr_personal, g);
                    break;
                }
            }
        }
    }

    BaselineClientResult out;
    if (kind.method == BaselineMethod::Ditto) {
        out.w_n = std::move(w_n);
        out.v_n = std::move(v_n);
    } else {
        out.v_n = w_n;
        out.w_n = std::move(w_n);
    }
    require_finite(out.w_n, "baseline client model");
    require_finite(out.v_n, "baseline personalized model");
    return out;
}

}  // namespace

RunResult run_baseline(const BaselineKind& kind, const FederatedDataset& dataset,
                       const ModelSpec& model, const RunConfig& cfg,
                       const std::optional<OutlierSpec>& outliers) {
    cfg.validate();
    model.validate();
    if (!(kind.mu >= 0.0)) throw std::invalid_argument("mu must be non-negative");
    if (static_cast<int>(dataset.clients.size()) != cfg.num_clients)
        throw std::invalid_argument("dataset client count does not match num_clients");
    if (outliers) outliers->validate();

    ParamVector w = init_params(model, cfg.seed);
    // Personalized state is only trained by Ditto; the others evaluate the
    // global model on every client.
    std::vector<ParamVector> v(dataset.clients.size(), w);

    RunResult result;
    const int m = cfg.selected_per_round();
    for (int round = 1; round <= cfg.global_rounds; ++round) {
        const auto selected = sample_clients(cfg.num_clients, m, cfg.seed, round);

        std::vector<ParamVector> intermediates(selected.size());
        std::vector<ParamVector> personalized_updates(selected.size());
        for (std::size_t i = 0; i < selected.size(); ++i) {
            const int id = selected[i];
            const std::vector<Example>* train = &dataset.clients[id].train;
            std::vector<Example> corrupted;
            if (outliers) {
                corrupted = inject_outliers(
                    dataset.clients[id].train, *outliers,
                    outliers->persistent ? round : 0,
                    mix_seed({cfg.seed,
                              static_cast<std::uint64_t>(RngStream::OutlierInjection),
                              static_cast<std::uint64_t>(id)}));
                train = &corrupted;
            }
            auto res =
                baseline_client_update(kind, *train, v[id], w, model, cfg, id, round);
            intermediates[i] = std::move(res.w_n);
            personalized_updates[i] = std::move(res.v_n);
        }

        // Average aggregation over the participants.
        ParamVector next(w.size(), 0.0);
        for (const auto& wn : intermediates) axpy(next, 1.0, wn);
        for (double& x : next) x /= static_cast<double>(intermediates.size());
        w = std::move(next);
        require_finite(w, "global model");

        if (kind.method == BaselineMethod::Ditto)
            for (std::size_t i = 0; i < selected.size(); ++i)
                v[selected[i]] = std::move(personalized_updates[i]);

        // FedAvg and FedProx carry no personalized models; every client is
        // evaluated with the global model.
        if (kind.method != BaselineMethod::Ditto) v.assign(v.size(), w);
        const std::vector<ParamVector>& report_models = v;

        RoundRecord record;
        record.fairness = fairness_report(report_models, model, dataset, w, round);
        double dist_sum = 0.0;
        for (const auto& wn : intermediates) dist_sum += squared_distance(wn, w);
        record.global_loss = dist_sum / static_cast<double>(intermediates.size());
        double local_sum = 0.0;
        for (std::size_t i = 0; i < selected.size(); ++i) {
            const int id = selected[i];
            const auto& eval_model =
                kind.method == BaselineMethod::FedAvg ? w : report_models[id];
            double value = mean_loss(model, eval_model, dataset.clients[id].train).value;
            if (kind.method != BaselineMethod::FedAvg)
                value += 0.5 * kind.mu * squared_distance(eval_model, w);
            local_sum += value;
        }
        record.mean_local_loss = local_sum / static_cast<double>(selected.size());
        result.rounds.push_back(std::move(record));

        if (cfg.record_trajectory) {
            result.w_history.push_back(w);
            result.v_history.push_back(report_models);
        }
    }

    result.final_w = std::move(w);
    result.final_v = std::move(v);
    return result;
}

double check_reduction(int proposition, const FederatedDataset& dataset,
                       const ModelSpec& model, const RunConfig& cfg) {
    if (proposition < 1 || proposition > 3)
        throw std::invalid_argument("proposition must be 1, 2, or 3");

    // Both paths must consume randomness identically and aggregate exactly,
    // otherwise bit-level agreement is not defined.
    std::string problems;
    if (cfg.participation_fraction != 1.0) problems += " participation_fraction!=1";
    std::size_t largest_shard = 0;
    for (const auto& c : dataset.clients)
        largest_shard = std::max(largest_shard, c.train.size());
    if (static_cast<std::size_t>(cfg.batch_size) < largest_shard)
        problems += " batch_size<largest shard (mini-batching)";
    if (!cfg.analytic_q0_server) problems += " analytic_q0_server=false";
    if (std::fabs(cfg.tilt.q) >= kZeroTiltEps) problems += " q!=0";
    if (std::fabs(cfg.tilt.tau) >= kZeroTiltEps) problems += " tau!=0";
    if (std::fabs(cfg.tilt.lambda) >= kZeroTiltEps) problems += " lambda!=0";
    if (!problems.empty())
        throw std::invalid_argument("configuration not exactly comparable:" + problems);

    RunConfig tilted = cfg;
    tilted.record_trajectory = true;
    BaselineKind kind;
    switch (proposition) {
        case 1:
            // mu = +infinity realized structurally: the personalized model is
            // the intermediate model.
            tilted.coupling = ClientCoupling::TiedToIntermediate;
            kind = {BaselineMethod::FedAvg, 0.0};
            break;
        case 2:
            tilted.coupling = ClientCoupling::ProximalIntermediate;
            kind = {BaselineMethod::FedProx, cfg.tilt.mu};
            break;
        default:
            tilted.coupling = ClientCoupling::Personalized;
            kind = {BaselineMethod::Ditto, cfg.tilt.mu};
            break;
    }

    const RunResult ours = run(dataset, model, tilted, std::nullopt);
    const RunResult reference = run_baseline(kind, dataset, model, tilted);

    double deviation = 0.0;
    for (std::size_t r = 0; r < ours.w_history.size(); ++r) {
        deviation = std::max(deviation,
                             linf_distance(ours.w_history[r], reference.w_history[r]));
        if (proposition == 3)
            for (std::size_t n = 0; n < ours.v_history[r].size(); ++n)
                deviation = std::max(deviation, linf_distance(ours.v_history[r][n],
                                                              reference.v_history[r][n]));
    }
    return deviation;
}

}  // namespace fedtilt
