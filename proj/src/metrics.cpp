#include "fedtilt/metrics.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <stdexcept>

namespace fedtilt {

double population_std(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(values.size()));
}

double client_accuracy(const ModelSpec& spec, const ParamVector& params,
                       std::span<const Example> test_shard) {
    if (test_shard.empty()) throw std::invalid_argument("empty test shard");
    std::size_t correct = 0;
    for (const Example& ex : test_shard)
        if (predict(spec, params, ex.features) == ex.label) ++correct;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(test_shard.size());
}

FairnessReport fairness_report(const std::vector<ParamVector>& client_models,
                               const ModelSpec& spec, const FederatedDataset& dataset,
                               const ParamVector& global_model, int round) {
    if (client_models.size() != dataset.clients.size())
        throw std::invalid_argument("client model count does not match dataset");

    FairnessReport report;
    report.round = round;

    std::vector<double> class_spreads;
    std::size_t union_correct = 0, union_total = 0;
    for (std::size_t n = 0; n < dataset.clients.size(); ++n) {
        const auto& test = dataset.clients[n].test;
        report.per_client_acc.push_back(client_accuracy(spec, client_models[n], test));

        // Per-class recall on the classes present in this client's shard.
        std::map<int, std::pair<std::size_t, std::size_t>> by_class;  // correct, total
        for (const Example& ex : test) {
            auto& [correct, total] = by_class[ex.label];
            ++total;
            if (predict(spec, client_models[n], ex.features) == ex.label) ++correct;
        }
        std::vector<double> class_acc;
        for (const auto& [cls, counts] : by_class)
            class_acc.push_back(100.0 * static_cast<double>(counts.first) /
                                static_cast<double>(counts.second));
        if (class_acc.size() < 2)
            std::cerr << "warning: client " << n
                      << " test shard has a single class; class-accuracy spread set to 0\n";
        class_spreads.push_back(population_std(class_acc));

        for (const Example& ex : test) {
            ++union_total;
            if (predict(spec, global_model, ex.features) == ex.label) ++union_correct;
        }
    }

    double mean_acc = 0.0;
    for (double a : report.per_client_acc) mean_acc += a;
    report.mean_test_acc_personalized =
        mean_acc / static_cast<double>(report.per_client_acc.size());
    report.mean_test_acc_global =
        100.0 * static_cast<double>(union_correct) / static_cast<double>(union_total);
    report.client_fairness_sigma = population_std(report.per_client_acc);

    double mean_spread = 0.0;
    for (double s : class_spreads) mean_spread += s;
    report.data_fairness_mu_sigma = mean_spread / static_cast<double>(class_spreads.size());
    report.data_fairness_sigma_sigma = population_std(class_spreads);
    return report;
}

}  // namespace fedtilt
