#include "fedtilt/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "fedtilt/rng.hpp"

namespace fedtilt {

namespace {

void check_fraction(double f, const char* what) {
    if (!(f >= 0.0 && f <= 1.0))
        throw std::invalid_argument(std::string(what) + " must lie in [0,1]");
}

std::vector<Example> draw_group(const GaussianGroupSpec& g, int count,
                                std::mt19937_64& rng) {
    std::normal_distribution<double> nx(g.center[0], g.std_dev);
    std::normal_distribution<double> ny(g.center[1], g.std_dev);
    std::vector<Example> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back({{nx(rng), ny(rng)}, g.label});
    return out;
}

// Setup table of the toy experiments: per (experiment, client, group) the
// Gaussian center and standard deviation. Group g carries class label g.
const std::array<std::array<GaussianGroupSpec, 4>, 3> kToyGroups = {{
    // experiment 1: balanced classes, 100 train / 20 test each
    {{{{0.5, 2.0}, 0.5, 0, 100, 20},
      {{2.5, 1.0}, 0.5, 1, 100, 20},
      {{1.0, 2.2}, 0.5, 0, 100, 20},
      {{2.2, 0.8}, 0.5, 1, 100, 20}}},
    // experiment 2: 3:1 class imbalance, 150/50 train and 30/10 test
    {{{{0.5, 2.0}, 0.35, 0, 150, 30},
      {{2.0, 1.0}, 0.25, 1, 50, 10},
      {{0.5, 2.0}, 0.35, 0, 150, 30},
      {{2.5, 1.8}, 0.25, 1, 50, 10}}},
    // experiment 3: class 0 has high variance to induce outliers
    {{{{1.0, 2.0}, 1.0, 0, 150, 30},
      {{2.5, 1.0}, 0.3, 1, 50, 10},
      {{1.0, 2.0}, 1.0, 0, 150, 30},
      {{2.5, 1.0}, 0.3, 1, 50, 10}}},
}};

std::uint32_t read_be_u32(std::ifstream& file, const std::string& path) {
    unsigned char b[4];
    if (!file.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("truncated IDX file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

void OutlierSpec::validate() const {
    if (const auto* g = std::get_if<GaussianNoiseSpec>(&kind)) {
        check_fraction(g->sample_fraction, "sample_fraction");
        if (!(g->std > 0.0)) throw std::invalid_argument("noise std must be positive");
    } else {
        const auto& p = std::get<PixelCorruptionSpec>(kind);
        check_fraction(p.sample_fraction, "sample_fraction");
        check_fraction(p.pixel_fraction, "pixel_fraction");
    }
}

FederatedDataset gen_toy(int experiment, std::uint64_t seed) {
    if (experiment < 1 || experiment > 3)
        throw std::invalid_argument("experiment must be 1, 2, or 3");

    FederatedDataset ds;
    ds.num_classes = 2;
    ds.input_dim = 2;
    const auto& groups = kToyGroups[experiment - 1];
    for (int client = 0; client < 2; ++client) {
        ClientShards shards;
        for (int g = 0; g < 2; ++g) {
            const auto& spec = groups[client * 2 + g];
            // Separate streams per (client, group) keep the draw independent
            // of shard ordering.
            auto rng = make_rng({seed, static_cast<std::uint64_t>(RngStream::DataGeneration),
                                 static_cast<std::uint64_t>(experiment),
                                 static_cast<std::uint64_t>(client),
                                 static_cast<std::uint64_t>(g)});
            auto train = draw_group(spec, spec.count_train, rng);
            auto test = draw_group(spec, spec.count_test, rng);
            shards.train.insert(shards.train.end(), train.begin(), train.end());
            shards.test.insert(shards.test.end(), test.begin(), test.end());
        }
        ds.clients.push_back(std::move(shards));
    }
    return ds;
}

std::vector<Example> gen_blobs(int num_classes, int per_class, int input_dim,
                               double spread, std::uint64_t seed) {
    if (num_classes < 2 || per_class <= 0 || input_dim <= 0 || !(spread > 0.0))
        throw std::invalid_argument("invalid blob parameters");
    if (num_classes > input_dim)
        throw std::invalid_argument("need input_dim >= num_classes for unit centers");

    auto rng = make_rng({seed, static_cast<std::uint64_t>(RngStream::DataGeneration)});
    std::normal_distribution<double> noise(0.0, spread);
    std::vector<Example> pool;
    pool.reserve(static_cast<std::size_t>(num_classes) * per_class);
    for (int c = 0; c < num_classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Example ex;
            ex.features.assign(input_dim, 0.0);
            ex.features[c] = 1.0;
            for (double& f : ex.features) f += noise(rng);
            ex.label = c;
            pool.push_back(std::move(ex));
        }
    }
    return pool;
}

FederatedDataset partition_noniid(const std::vector<Example>& pool, int num_clients,
                                  int classes_per_client, std::uint64_t seed) {
    if (pool.empty()) throw std::invalid_argument("empty pool");
    if (num_clients <= 0 || classes_per_client <= 0)
        throw std::invalid_argument("invalid partition parameters");

    int num_classes = 0;
    for (const auto& ex : pool) num_classes = std::max(num_classes, ex.label + 1);
    if (classes_per_client > num_classes)
        throw std::invalid_argument("classes_per_client exceeds number of classes");
    const std::size_t dim = pool.front().features.size();
    for (const auto& ex : pool)
        if (ex.features.size() != dim)
            throw std::invalid_argument("inconsistent feature dimensions in pool");

    // Round-robin class assignment over a seeded permutation.
    std::vector<int> perm(num_classes);
    std::iota(perm.begin(), perm.end(), 0);
    {
        auto rng = make_rng({seed, static_cast<std::uint64_t>(RngStream::DataGeneration), 1});
        std::shuffle(perm.begin(), perm.end(), rng);
    }
    std::vector<std::vector<int>> client_classes(num_clients);
    std::vector<std::vector<int>> holders(num_classes);
    for (int i = 0; i < num_clients; ++i) {
        for (int j = 0; j < classes_per_client; ++j) {
            const int cls = perm[(static_cast<std::size_t>(i) * classes_per_client + j) %
                                 num_classes];
            client_classes[i].push_back(cls);
            holders[cls].push_back(i);
        }
    }

    // Deal each class's examples round-robin to its holders.
    std::vector<std::vector<std::vector<const Example*>>> per_client_class(
        num_clients, std::vector<std::vector<const Example*>>(num_classes));
    for (int cls = 0; cls < num_classes; ++cls) {
        std::vector<const Example*> members;
        for (const auto& ex : pool)
            if (ex.label == cls) members.push_back(&ex);
        if (holders[cls].empty()) continue;
        if (members.size() < 2 * holders[cls].size())
            throw std::invalid_argument("insufficient data for class " +
                                        std::to_string(cls) + ": " +
                                        std::to_string(members.size()) + " examples for " +
                                        std::to_string(holders[cls].size()) + " clients");
        auto rng = make_rng({seed, static_cast<std::uint64_t>(RngStream::DataGeneration), 2,
                             static_cast<std::uint64_t>(cls)});
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t j = 0; j < members.size(); ++j)
            per_client_class[holders[cls][j % holders[cls].size()]][cls].push_back(
                members[j]);
    }

    // Stratified 80/20 split inside each client so every held class shows up
    // in both shards.
    FederatedDataset ds;
    ds.num_classes = num_classes;
    ds.input_dim = static_cast<int>(dim);
    ds.clients.resize(num_clients);
    for (int i = 0; i < num_clients; ++i) {
        for (int cls : client_classes[i]) {
            auto& members = per_client_class[i][cls];
            const std::size_t n = members.size();
            std::size_t n_test = n / 5;
            if (n_test == 0 && n >= 2) n_test = 1;
            const std::size_t n_train = n - n_test;
            for (std::size_t j = 0; j < n; ++j)
                (j < n_train ? ds.clients[i].train : ds.clients[i].test)
                    .push_back(*members[j]);
            members.clear();
        }
    }
    return ds;
}

std::vector<Example> load_idx(const std::string& images_path,
                              const std::string& labels_path) {
    std::ifstream images(images_path, std::ios::binary);
    if (!images) throw std::runtime_error("cannot open " + images_path);
    std::ifstream labels(labels_path, std::ios::binary);
    if (!labels) throw std::runtime_error("cannot open " + labels_path);

    if (read_be_u32(images, images_path) != 0x00000803u)
        throw std::runtime_error("bad magic in image file: " + images_path);
    const std::uint32_t n_images = read_be_u32(images, images_path);
    const std::uint32_t rows = read_be_u32(images, images_path);
    const std::uint32_t cols = read_be_u32(images, images_path);

    if (read_be_u32(labels, labels_path) != 0x00000801u)
        throw std::runtime_error("bad magic in label file: " + labels_path);
    const std::uint32_t n_labels = read_be_u32(labels, labels_path);
    if (n_images != n_labels) throw std::runtime_error("label/image count mismatch");

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<Example> out(n_images);
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!images.read(reinterpret_cast<char*>(buf.data()), pixels))
            throw std::runtime_error("truncated IDX file: " + images_path);
        out[i].features.resize(pixels);
        for (std::size_t p = 0; p < pixels; ++p) out[i].features[p] = buf[p] / 255.0;
        unsigned char lbl;
        if (!labels.read(reinterpret_cast<char*>(&lbl), 1))
            throw std::runtime_error("truncated IDX file: " + labels_path);
        out[i].label = lbl;
    }
    return out;
}

std::vector<Example> inject_outliers(const std::vector<Example>& shard,
                                     const OutlierSpec& spec, int round,
                                     std::uint64_t seed) {
    spec.validate();
    std::vector<Example> out = shard;
    auto rng = make_rng({seed, static_cast<std::uint64_t>(RngStream::OutlierInjection),
                         static_cast<std::uint64_t>(round)});

    if (const auto* g = std::get_if<GaussianNoiseSpec>(&spec.kind)) {
        std::vector<std::size_t> eligible;
        for (std::size_t i = 0; i < out.size(); ++i)
            if (!g->target_class || out[i].label == *g->target_class) eligible.push_back(i);
        const std::size_t k =
            static_cast<std::size_t>(g->sample_fraction * eligible.size());
        std::shuffle(eligible.begin(), eligible.end(), rng);
        eligible.resize(k);
        std::sort(eligible.begin(), eligible.end());
        std::normal_distribution<double> noise(g->mean, g->std);
        for (std::size_t i : eligible)
            for (double& f : out[i].features) f += noise(rng);
        return out;
    }

    const auto& p = std::get<PixelCorruptionSpec>(spec.kind);
    std::vector<std::size_t> indices(out.size());
    std::iota(indices.begin(), indices.end(), 0);
    const std::size_t k = static_cast<std::size_t>(p.sample_fraction * out.size());
    std::shuffle(indices.begin(), indices.end(), rng);
    indices.resize(k);
    std::sort(indices.begin(), indices.end());
    std::uniform_real_distribution<double> value(0.0, 1.0);
    for (std::size_t i : indices) {
        auto& features = out[i].features;
        std::vector<std::size_t> coords(features.size());
        std::iota(coords.begin(), coords.end(), 0);
        const std::size_t n_pix =
            static_cast<std::size_t>(p.pixel_fraction * features.size());
        std::shuffle(coords.begin(), coords.end(), rng);
        for (std::size_t c = 0; c < n_pix; ++c) features[coords[c]] = value(rng);
    }
    return out;
}

}  // namespace fedtilt
