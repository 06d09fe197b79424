#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "fedtilt/data.hpp"

using namespace fedtilt;

namespace {

double feature_mean(const std::vector<Example>& shard, int label, int coord) {
    double sum = 0.0;
    int n = 0;
    for (const auto& ex : shard)
        if (ex.label == label) {
            sum += ex.features[coord];
            ++n;
        }
    return sum / n;
}

double feature_std(const std::vector<Example>& shard, int label) {
    // pooled over both coordinates
    std::vector<double> centered;
    for (int coord = 0; coord < 2; ++coord) {
        const double mean = feature_mean(shard, label, coord);
        for (const auto& ex : shard)
            if (ex.label == label) centered.push_back(ex.features[coord] - mean);
    }
    double var = 0.0;
    for (double c : centered) var += c * c;
    return std::sqrt(var / centered.size());
}

int count_label(const std::vector<Example>& shard, int label) {
    return static_cast<int>(
        std::count_if(shard.begin(), shard.end(),
                      [&](const Example& ex) { return ex.label == label; }));
}

// order-independent fingerprint of a set of examples
std::multiset<std::pair<std::vector<double>, int>> fingerprint(
    const std::vector<Example>& examples) {
    std::multiset<std::pair<std::vector<double>, int>> out;
    for (const auto& ex : examples) out.insert({ex.features, ex.label});
    return out;
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream file(path, std::ios::binary);
    file.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::vector<unsigned char> be32(std::uint32_t v) {
    return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
}

void append(std::vector<unsigned char>& dst, const std::vector<unsigned char>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

TEST_CASE("toy experiment generators follow the published setup") {
    const auto exp1 = gen_toy(1, 3);
    REQUIRE(exp1.clients.size() == 2);
    CHECK(exp1.num_classes == 2);
    CHECK(exp1.input_dim == 2);
    CHECK(exp1.clients[0].train.size() == 200);
    CHECK(exp1.clients[0].test.size() == 40);
    CHECK(count_label(exp1.clients[0].train, 0) == 100);
    CHECK(count_label(exp1.clients[0].test, 1) == 20);
    // client 1 class 0 centered at (0.5, 2.0) with sigma 0.5
    CHECK(feature_mean(exp1.clients[0].train, 0, 0) == doctest::Approx(0.5).epsilon(0.4));
    CHECK(feature_mean(exp1.clients[0].train, 0, 1) == doctest::Approx(2.0).epsilon(0.15));
    CHECK(feature_std(exp1.clients[0].train, 0) == doctest::Approx(0.5).epsilon(0.25));

    const auto exp2 = gen_toy(2, 3);
    CHECK(count_label(exp2.clients[0].train, 0) == 150);
    CHECK(count_label(exp2.clients[0].train, 1) == 50);
    CHECK(count_label(exp2.clients[0].test, 0) == 30);
    CHECK(count_label(exp2.clients[0].test, 1) == 10);
    CHECK(count_label(exp2.clients[1].train, 0) == 150);

    // experiment 3: class 0 has high variance (sigma = 1.0) to induce outliers
    const auto exp3 = gen_toy(3, 3);
    CHECK(feature_std(exp3.clients[0].train, 0) == doctest::Approx(1.0).epsilon(0.2));
    CHECK(feature_std(exp3.clients[0].train, 1) == doctest::Approx(0.3).epsilon(0.25));

    CHECK(gen_toy(1, 5).clients[0].train[0].features ==
          gen_toy(1, 5).clients[0].train[0].features);
    CHECK_THROWS_AS(gen_toy(0, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_toy(4, 1), std::invalid_argument);
}

TEST_CASE("non-IID partition spreads classes evenly and loses nothing") {
    const auto pool = gen_blobs(10, 50, 10, 0.3, 11);
    const auto ds = partition_noniid(pool, 100, 2, 11);
    REQUIRE(ds.clients.size() == 100);
    CHECK(ds.num_classes == 10);

    // every class lands in exactly 20 of the 100 clients
    std::vector<int> holders(10, 0);
    for (const auto& client : ds.clients) {
        std::set<int> classes;
        for (const auto& ex : client.train) classes.insert(ex.label);
        for (const auto& ex : client.test) classes.insert(ex.label);
        CHECK(classes.size() == 2);
        for (int cls : classes) ++holders[cls];
        CHECK_FALSE(client.train.empty());
        CHECK_FALSE(client.test.empty());
    }
    for (int h : holders) CHECK(h == 20);

    // union of client shards is exactly the pool
    std::vector<Example> everything;
    for (const auto& client : ds.clients) {
        everything.insert(everything.end(), client.train.begin(), client.train.end());
        everything.insert(everything.end(), client.test.begin(), client.test.end());
    }
    CHECK(everything.size() == pool.size());
    CHECK(fingerprint(everything) == fingerprint(pool));

    // determinism
    const auto again = partition_noniid(pool, 100, 2, 11);
    CHECK(again.clients[17].train[0].features == ds.clients[17].train[0].features);
    const auto other_seed = partition_noniid(pool, 100, 2, 12);
    bool identical = true;
    for (std::size_t n = 0; n < ds.clients.size() && identical; ++n)
        identical = fingerprint(ds.clients[n].train) == fingerprint(other_seed.clients[n].train);
    CHECK_FALSE(identical);
}

TEST_CASE("partition with all classes per client is IID by class") {
    const auto pool = gen_blobs(4, 40, 4, 0.3, 13);
    const auto ds = partition_noniid(pool, 5, 4, 13);
    for (const auto& client : ds.clients) {
        std::set<int> classes;
        for (const auto& ex : client.train) classes.insert(ex.label);
        CHECK(classes.size() == 4);
    }
}

TEST_CASE("partition names the starved class") {
    // class 2 has a single example: impossible to give 3 clients two each
    std::vector<Example> pool;
    for (int cls = 0; cls < 3; ++cls)
        for (int i = 0; i < (cls == 2 ? 1 : 30); ++i)
            pool.push_back({{double(cls), double(i)}, cls});
    CHECK_THROWS_WITH_AS(partition_noniid(pool, 3, 3, 1),
                         doctest::Contains("insufficient data for class 2"),
                         std::invalid_argument);
    CHECK_THROWS_AS(partition_noniid(pool, 3, 5, 1), std::invalid_argument);
}

TEST_CASE("IDX loader scales pixels and validates the headers") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "fedtilt_idx_test";
    fs::create_directories(dir);
    const std::string images = (dir / "images.idx").string();
    const std::string labels = (dir / "labels.idx").string();

    // one 2x2 image with pixels {0, 255, 128, 64}
    std::vector<unsigned char> image_bytes;
    append(image_bytes, be32(0x00000803));
    append(image_bytes, be32(1));
    append(image_bytes, be32(2));
    append(image_bytes, be32(2));
    append(image_bytes, {0, 255, 128, 64});
    write_bytes(images, image_bytes);

    std::vector<unsigned char> label_bytes;
    append(label_bytes, be32(0x00000801));
    append(label_bytes, be32(1));
    append(label_bytes, {7});
    write_bytes(labels, label_bytes);

    const auto examples = load_idx(images, labels);
    REQUIRE(examples.size() == 1);
    CHECK(examples[0].label == 7);
    REQUIRE(examples[0].features.size() == 4);
    CHECK(examples[0].features[0] == 0.0);
    CHECK(examples[0].features[1] == 1.0);
    CHECK(examples[0].features[2] == doctest::Approx(128.0 / 255.0));
    CHECK(examples[0].features[3] == doctest::Approx(64.0 / 255.0));

    SUBCASE("bad magic") {
        std::vector<unsigned char> bad = image_bytes;
        bad[3] = 0x99;
        write_bytes(images, bad);
        CHECK_THROWS_WITH_AS(load_idx(images, labels), doctest::Contains("bad magic"),
                             std::runtime_error);
    }
    SUBCASE("truncated image data") {
        std::vector<unsigned char> truncated(image_bytes.begin(), image_bytes.end() - 2);
        write_bytes(images, truncated);
        CHECK_THROWS_WITH_AS(load_idx(images, labels), doctest::Contains("truncated"),
                             std::runtime_error);
    }
    SUBCASE("count mismatch") {
        std::vector<unsigned char> two_labels;
        append(two_labels, be32(0x00000801));
        append(two_labels, be32(2));
        append(two_labels, {7, 3});
        write_bytes(labels, two_labels);
        CHECK_THROWS_WITH_AS(load_idx(images, labels),
                             doctest::Contains("label/image count mismatch"),
                             std::runtime_error);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_WITH_AS(load_idx((dir / "nope.idx").string(), labels),
                             doctest::Contains("nope.idx"), std::runtime_error);
    }
}

TEST_CASE("MNIST train file loads in full when available") {
    const char* dir = std::getenv("MNIST_DIR");
    if (!dir) return;  // optional: only runs when the official files are present
    const auto examples = load_idx(std::string(dir) + "/train-images-idx3-ubyte",
                                   std::string(dir) + "/train-labels-idx1-ubyte");
    CHECK(examples.size() == 60000);
    CHECK(examples[0].features.size() == 784);
}

TEST_CASE("outlier injection: exact counts, clean-shard immutability, fresh subsets") {
    // 100 samples of 784 features, all 0.5
    std::vector<Example> shard(100);
    for (std::size_t i = 0; i < shard.size(); ++i) {
        shard[i].features.assign(784, 0.5);
        shard[i].label = static_cast<int>(i % 2);
    }
    const auto clean_copy = shard;

    OutlierSpec pixel;
    pixel.kind = PixelCorruptionSpec{0.3, 0.3};
    const auto corrupted = inject_outliers(shard, pixel, 1, 99);
    CHECK(shard == clean_copy);  // input untouched
    REQUIRE(corrupted.size() == shard.size());

    int altered_samples = 0;
    for (std::size_t i = 0; i < corrupted.size(); ++i) {
        int altered_pixels = 0;
        for (std::size_t p = 0; p < 784; ++p)
            if (corrupted[i].features[p] != 0.5) ++altered_pixels;
        if (altered_pixels > 0) {
            ++altered_samples;
            CHECK(altered_pixels == 235);  // floor(0.3 * 784)
        }
        CHECK(corrupted[i].label == shard[i].label);
    }
    CHECK(altered_samples == 30);  // floor(0.3 * 100)

    SUBCASE("zero fraction is the identity") {
        OutlierSpec none;
        none.kind = PixelCorruptionSpec{0.3, 0.0};
        CHECK(inject_outliers(shard, none, 1, 99) == shard);
        OutlierSpec no_noise;
        no_noise.kind = GaussianNoiseSpec{0.0, 0.15, 0.0, std::nullopt};
        CHECK(inject_outliers(shard, no_noise, 1, 99) == shard);
    }

    SUBCASE("gaussian noise respects the target class") {
        OutlierSpec gauss;
        gauss.kind = GaussianNoiseSpec{0.0, 0.15, 0.5, 1};
        const auto noisy = inject_outliers(shard, gauss, 2, 99);
        int touched = 0;
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            const bool changed = noisy[i].features != shard[i].features;
            if (changed) {
                CHECK(noisy[i].label == 1);
                ++touched;
            }
        }
        CHECK(touched == 25);  // floor(0.5 * 50 eligible)
    }

    SUBCASE("persistent rounds corrupt different subsets") {
        std::set<std::vector<std::size_t>> subsets;
        for (int round = 1; round <= 10; ++round) {
            const auto hit = inject_outliers(shard, pixel, round, 99);
            std::vector<std::size_t> indices;
            for (std::size_t i = 0; i < hit.size(); ++i)
                if (hit[i].features != shard[i].features) indices.push_back(i);
            subsets.insert(indices);
        }
        CHECK(subsets.size() == 10);

        // same round, same seed: identical corruption
        CHECK(inject_outliers(shard, pixel, 4, 99) == inject_outliers(shard, pixel, 4, 99));
    }
}

TEST_CASE("outlier spec validation") {
    OutlierSpec bad;
    bad.kind = PixelCorruptionSpec{1.5, 0.3};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.kind = GaussianNoiseSpec{0.0, -1.0, 0.1, std::nullopt};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("blob pool shape") {
    const auto pool = gen_blobs(3, 10, 5, 0.2, 2);
    CHECK(pool.size() == 30);
    CHECK(pool[0].features.size() == 5);
    CHECK_THROWS_AS(gen_blobs(6, 10, 5, 0.2, 2), std::invalid_argument);
}
