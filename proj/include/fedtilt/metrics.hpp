#pragma once

#include <span>
#include <vector>

#include "fedtilt/data.hpp"
#include "fedtilt/model.hpp"
#include "fedtilt/param_vector.hpp"

namespace fedtilt {

// Accuracy and the two fairness measures for one round. Accuracies are in
// percent; sigma is the population standard deviation of per-client
// accuracies (client fairness), and (mu_sigma, sigma_sigma) summarize the
// per-client standard deviations of class accuracies (client data fairness).
struct FairnessReport {
    int round = 0;
    double mean_test_acc_personalized = 0.0;
    double mean_test_acc_global = 0.0;
    double client_fairness_sigma = 0.0;
    double data_fairness_mu_sigma = 0.0;
    double data_fairness_sigma_sigma = 0.0;
    std::vector<double> per_client_acc;
};

struct RoundRecord {
    FairnessReport fairness;
    double global_loss = 0.0;
    double mean_local_loss = 0.0;
};

double population_std(std::span<const double> values);

// 100 * correct / |shard|.
double client_accuracy(const ModelSpec& spec, const ParamVector& params,
                       std::span<const Example> test_shard);

// Per-client accuracies come from the personalized models on each client's
// local test shard; the global accuracy evaluates w on the union of test
// shards. A client whose test shard holds a single class contributes a zero
// class-accuracy spread (with a warning on stderr).
FairnessReport fairness_report(const std::vector<ParamVector>& client_models,
                               const ModelSpec& spec, const FederatedDataset& dataset,
                               const ParamVector& global_model, int round);

}  // namespace fedtilt
