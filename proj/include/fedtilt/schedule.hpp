#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "fedtilt/rng.hpp"

namespace fedtilt {

// Uniform sample of m distinct client ids, returned sorted. The FedTilt loop
// and every baseline draw from this same stream so their selections agree
// round for round.
inline std::vector<int> sample_clients(int num_clients, int m, std::uint64_t seed,
                                       int round) {
    std::vector<int> ids(num_clients);
    std::iota(ids.begin(), ids.end(), 0);
    auto rng = make_rng({seed, static_cast<std::uint64_t>(RngStream::ClientSelection),
                         static_cast<std::uint64_t>(round)});
    for (int i = 0; i < m && i < num_clients; ++i) {
        std::uniform_int_distribution<int> pick(i, num_clients - 1);
        std::swap(ids[i], ids[pick(rng)]);
    }
    ids.resize(std::min(m, num_clients));
    std::sort(ids.begin(), ids.end());
    return ids;
}

// Seeded visit order of one client's shard for one epoch.
inline std::vector<std::size_t> epoch_order(std::size_t shard_size, std::uint64_t seed,
                                            int round, int client_id, int epoch) {
    std::vector<std::size_t> order(shard_size);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng({seed, static_cast<std::uint64_t>(RngStream::BatchShuffle),
                         static_cast<std::uint64_t>(round),
                         static_cast<std::uint64_t>(client_id),
                         static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

}  // namespace fedtilt
