// Experiment runner: single runs, (lambda, tau) sweeps, the toy experiments,
// and the verification suite.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedtilt/config.hpp"
#include "fedtilt/runner.hpp"
#include "fedtilt/verify.hpp"

namespace {

using namespace fedtilt;

std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError(flag + ": bad number '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError(flag + ": empty grid");
    return out;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

ExperimentConfig resolve_config(const CommonArgs& args, ConfigMap map) {
    if (!args.config_path.empty()) {
        ConfigMap file_map = parse_config_file(args.config_path);
        for (auto& [k, v] : file_map) map[k] = std::move(v);
    }
    for (const auto& assignment : args.overrides) apply_override(map, assignment);
    if (args.seed_given) map["seed"] = std::to_string(args.seed);
    return ExperimentConfig::from_map(map);
}

void emit_run(const ExperimentConfig& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const auto outcome = run_experiment(cfg);
    write_rounds_csv(out_dir + "/rounds.csv", outcome.rounds);
    write_summary_json(out_dir + "/summary.json", cfg, outcome);
    if (!outcome.rounds.empty()) {
        const auto& f = outcome.rounds.back().fairness;
        std::printf("rounds=%zu acc_personalized=%.2f acc_global=%.2f sigma=%.2f "
                    "mu_sigma=%.2f sigma_sigma=%.2f\n",
                    outcome.rounds.size(), f.mean_test_acc_personalized,
                    f.mean_test_acc_global, f.client_fairness_sigma,
                    f.data_fairness_mu_sigma, f.data_fairness_sigma_sigma);
    }
    std::printf("wrote %s/rounds.csv and %s/summary.json\n", out_dir.c_str(),
                out_dir.c_str());
}

int run_verify(std::uint64_t seed, bool break_gradient) {
    VerifyOptions opts;
    if (seed != 0) opts.seed = seed;
    opts.break_gradient = break_gradient;

    const auto results = run_verification(opts);
    std::size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.name.size());
    bool all_pass = true;
    std::string first_failure;
    for (const auto& r : results) {
        std::printf("%-*s  %s  %s\n", static_cast<int>(width), r.name.c_str(),
                    r.pass ? "PASS" : "FAIL", r.detail.c_str());
        if (!r.pass && all_pass) {
            all_pass = false;
            first_failure = r.name;
        }
    }
    if (!all_pass) {
        std::fprintf(stderr, "verification failed: %s\n", first_failure.c_str());
        return 3;
    }
    std::printf("all %zu checks passed\n", results.size());
    return 0;
}

ConfigMap toy_preset(int experiment) {
    ConfigMap map;
    map["dataset"] = "toy" + std::to_string(experiment);
    map["rounds"] = "100";
    map["client_epochs"] = "5";
    map["batch_size"] = "10";
    map["participation"] = "1.0";
    map["lr_client"] = "0.1";
    map["lr_personal"] = "0.1";
    map["mu"] = "0.01";
    map["q"] = "0";
    switch (experiment) {
        case 1:
            map["tau"] = "1";
            map["lambda"] = "1";
            break;
        case 2:
            map["tau"] = "100";
            map["lambda"] = "10";
            break;
        default:
            map["tau"] = "10";
            map["lambda"] = "-100";
            map["outlier"] = "gaussian";
            map["outlier_mean"] = "0";
            map["outlier_std"] = "0.15";
            map["outlier_sample_fraction"] = "0.1";
            map["outlier_target_class"] = "0";
            map["outlier_persistent"] = "true";
            break;
    }
    return map;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FedTilt: fairness-preserving, outlier-robust federated learning"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* opt = cmd->add_option("--config", args.config_path, "config file (key = value)");
        if (config_required) opt->required();
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--set", args.overrides, "config override KEY=VALUE (repeatable)");
        cmd->add_option("--seed", args.seed, "run seed")
            ->each([&](const std::string&) { args.seed_given = true; });
    };

    auto* cmd_run = app.add_subcommand("run", "run one experiment from a config file");
    add_common(cmd_run, true);
    std::string baseline;
    cmd_run->add_option("--baseline", baseline, "override method: fedavg|fedprox|ditto")
        ->check(CLI::IsMember({"fedavg", "fedprox", "ditto"}));

    auto* cmd_sweep = app.add_subcommand("sweep", "run a (lambda, tau) grid sweep");
    add_common(cmd_sweep, true);
    std::string lambda_grid_text, tau_grid_text;
    cmd_sweep->add_option("--lambda-grid", lambda_grid_text, "comma list of lambda values");
    cmd_sweep->add_option("--tau-grid", tau_grid_text, "comma list of tau values");

    auto* cmd_toy = app.add_subcommand("toy", "run a toy experiment with its preset tilts");
    int toy_experiment = 1;
    cmd_toy->add_option("experiment", toy_experiment, "toy experiment id")
        ->required()
        ->check(CLI::Range(1, 3));
    add_common(cmd_toy, false);

    auto* cmd_verify = app.add_subcommand("verify", "run the verification suite");
    std::uint64_t verify_seed = 0;
    bool break_gradient = false;
    cmd_verify->add_option("--seed", verify_seed, "verification seed");
    cmd_verify->add_flag("--inject-gradient-fault", break_gradient)->group("");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_verify->parsed()) return run_verify(verify_seed, break_gradient);

        if (cmd_run->parsed()) {
            if (!baseline.empty()) args.overrides.push_back("method=" + baseline);
            emit_run(resolve_config(args, {}), args.out_dir);
            return 0;
        }

        if (cmd_sweep->parsed()) {
            const ExperimentConfig base = resolve_config(args, {});
            const auto lambdas = lambda_grid_text.empty()
                                     ? std::vector<double>{base.run.tilt.lambda}
                                     : parse_grid(lambda_grid_text, "--lambda-grid");
            const auto taus = tau_grid_text.empty()
                                  ? std::vector<double>{base.run.tilt.tau}
                                  : parse_grid(tau_grid_text, "--tau-grid");
            const auto cells = run_sweep(base, lambdas, taus);
            std::filesystem::create_directories(args.out_dir);
            write_sweep_csv(args.out_dir + "/sweep.csv", cells);
            std::printf("wrote %s/sweep.csv (%zu cells)\n", args.out_dir.c_str(),
                        cells.size());
            return 0;
        }

        // toy
        const ExperimentConfig cfg = resolve_config(args, toy_preset(toy_experiment));
        emit_run(cfg, args.out_dir);
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
