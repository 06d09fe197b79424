#include "fedtilt/runner.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace fedtilt {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string record_row(const RoundRecord& r) {
    const auto& f = r.fairness;
    return std::to_string(f.round) + "," + fmt(f.mean_test_acc_personalized) + "," +
           fmt(f.mean_test_acc_global) + "," + fmt(f.client_fairness_sigma) + "," +
           fmt(f.data_fairness_mu_sigma) + "," + fmt(f.data_fairness_sigma_sigma) + "," +
           fmt(r.global_loss) + "," + fmt(r.mean_local_loss);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write " + path);
    file << text;
    if (!file) throw std::runtime_error("failed writing " + path);
}

}  // namespace

const char* kRoundsCsvHeader =
    "round,mean_acc_personalized,mean_acc_global,client_sigma,mu_sigma,sigma_sigma,"
    "global_loss,mean_local_loss";

RunOutcome run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const FederatedDataset dataset = cfg.build_dataset();
    const ModelSpec model = cfg.model_spec(dataset);
    const auto outliers = cfg.outlier_spec();

    RunOutcome outcome;
    if (const auto baseline = cfg.baseline_kind())
        outcome.rounds = run_baseline(*baseline, dataset, model, cfg.run, outliers).rounds;
    else
        outcome.rounds = run(dataset, model, cfg.run, outliers).rounds;

    outcome.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return outcome;
}

std::string rounds_csv_text(const std::vector<RoundRecord>& rounds) {
    std::string text = std::string(kRoundsCsvHeader) + "\n";
    for (const auto& r : rounds) text += record_row(r) + "\n";
    return text;
}

void write_rounds_csv(const std::string& path, const std::vector<RoundRecord>& rounds) {
    write_text(path, rounds_csv_text(rounds));
}

void write_summary_json(const std::string& path, const ExperimentConfig& cfg,
                        const RunOutcome& outcome) {
    nlohmann::json summary;
    summary["seed"] = cfg.run.seed;
    summary["config_hash"] = cfg.config_hash();
    summary["wall_time_seconds"] = outcome.wall_seconds;
    summary["rounds"] = outcome.rounds.size();

    nlohmann::json echo;
    for (const auto& [k, v] : cfg.canonical_map()) echo[k] = v;
    summary["config"] = echo;

    if (!outcome.rounds.empty()) {
        const auto& last = outcome.rounds.back();
        summary["final"] = {
            {"round", last.fairness.round},
            {"mean_acc_personalized", last.fairness.mean_test_acc_personalized},
            {"mean_acc_global", last.fairness.mean_test_acc_global},
            {"client_sigma", last.fairness.client_fairness_sigma},
            {"mu_sigma", last.fairness.data_fairness_mu_sigma},
            {"sigma_sigma", last.fairness.data_fairness_sigma_sigma},
            {"global_loss", last.global_loss},
            {"mean_local_loss", last.mean_local_loss},
            {"per_client_acc", last.fairness.per_client_acc},
        };
    }
    write_text(path, summary.dump(2) + "\n");
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& base,
                                 const std::vector<double>& lambda_grid,
                                 const std::vector<double>& tau_grid) {
    if (lambda_grid.empty() || tau_grid.empty())
        throw ConfigError("sweep grids must be nonempty");
    if (base.run.global_rounds < 1)
        throw ConfigError("sweep needs at least one global round");

    std::vector<SweepCell> cells;
    for (double lambda : lambda_grid) {
        for (double tau : tau_grid) {
            ExperimentConfig cfg = base;
            cfg.run.tilt.lambda = lambda;
            cfg.run.tilt.tau = tau;
            const auto outcome = run_experiment(cfg);
            cells.push_back({lambda, tau, outcome.rounds.back()});
        }
    }
    return cells;
}

std::string sweep_csv_text(const std::vector<SweepCell>& cells) {
    std::string text = std::string("lambda,tau,") + kRoundsCsvHeader + "\n";
    for (const auto& c : cells)
        text += fmt(c.lambda) + "," + fmt(c.tau) + "," + record_row(c.final_record) + "\n";
    return text;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells) {
    write_text(path, sweep_csv_text(cells));
}

}  // namespace fedtilt
