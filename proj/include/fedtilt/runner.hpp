#pragma once

#include <string>
#include <vector>

#include "fedtilt/config.hpp"
#include "fedtilt/metrics.hpp"

namespace fedtilt {

struct RunOutcome {
    std::vector<RoundRecord> rounds;
    double wall_seconds = 0.0;
};

// Builds the dataset and model from the config and executes the configured
// method (FedTilt or a baseline).
RunOutcome run_experiment(const ExperimentConfig& cfg);

// rounds.csv: one row per global round, stable column set.
extern const char* kRoundsCsvHeader;
std::string rounds_csv_text(const std::vector<RoundRecord>& rounds);
void write_rounds_csv(const std::string& path, const std::vector<RoundRecord>& rounds);

// summary.json: final metrics, config echo, seed, config hash, wall time.
void write_summary_json(const std::string& path, const ExperimentConfig& cfg,
                        const RunOutcome& outcome);

struct SweepCell {
    double lambda = 0.0;
    double tau = 0.0;
    RoundRecord final_record;
};

// Cross product of the two grids; every cell runs the base config with only
// (lambda, tau) replaced, sharing the base seed so cells differ in the tilts
// alone.
std::vector<SweepCell> run_sweep(const ExperimentConfig& base,
                                 const std::vector<double>& lambda_grid,
                                 const std::vector<double>& tau_grid);

std::string sweep_csv_text(const std::vector<SweepCell>& cells);
void write_sweep_csv(const std::string& path, const std::vector<SweepCell>& cells);

}  // namespace fedtilt
