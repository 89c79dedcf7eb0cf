#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "pfrp/gmb.hpp"
#include "pfrp/pcl.hpp"
#include "test_util.hpp"

using namespace pfrp;

namespace {

double cosdist(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return 1.0 - dot;
}

double assignment_cost(const std::vector<std::vector<double>>& pts,
                       const std::vector<std::size_t>& medoids) {
    double total = 0.0;
    for (const auto& p : pts) {
        double best = cosdist(p, pts[medoids[0]]);
        for (std::size_t c = 1; c < medoids.size(); ++c)
            best = std::min(best, cosdist(p, pts[medoids[c]]));
        total += best;
    }
    return total;
}

// Exhaustive optimum over all medoid subsets of size K.
double exhaustive_optimum(const std::vector<std::vector<double>>& pts, std::size_t K) {
    std::vector<std::size_t> medoids(K);
    double best = 1e300;
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t from, std::size_t depth) {
        if (depth == K) {
            best = std::min(best, assignment_cost(pts, medoids));
            return;
        }
        for (std::size_t i = from; i < pts.size(); ++i) {
            medoids[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

std::vector<std::vector<double>> random_points(Rng& rng, std::size_t n, std::size_t d) {
    std::vector<std::vector<double>> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(testutil::random_unit(rng, d));
    return pts;
}

std::vector<WindowSample> toy_samples(Rng& rng, std::size_t n, int L, int H) {
    std::vector<WindowSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        WindowSample w;
        w.start_index = i;
        w.x = testutil::random_vector(rng, L);
        w.y = testutil::random_vector(rng, H);
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

TEST_CASE("K equal to N makes every point its own medoid with zero cost") {
    Rng rng(201);
    auto pts = random_points(rng, 9, 4);
    KmedoidsResult r = kmedoids(pts, 9, 3);
    CHECK(r.total_cost == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<bool> seen(9, false);
    for (std::size_t m : r.medoid_indices) seen[m] = true;
    for (bool s : seen) CHECK(s);
    for (std::size_t i = 0; i < pts.size(); ++i)
        CHECK(r.medoid_indices[r.assignment[i]] == i);
}

TEST_CASE("two well-separated clusters are recovered") {
    Rng rng(203);
    std::vector<std::vector<double>> pts;
    // cluster A near +e1, cluster B near -e1: inter-cluster cosine < 0
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < 10; ++i) {
            std::vector<double> v = testutil::random_unit(rng, 5);
            v[0] = (c == 0 ? 4.0 : -4.0) + 0.2 * v[0];
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            for (double& x : v) x /= norm;
            pts.push_back(v);
        }
    }
    for (int i = 0; i < 10; ++i)
        for (int j = 10; j < 20; ++j) REQUIRE(cosdist(pts[i], pts[j]) > 1.0);

    KmedoidsResult r = kmedoids(pts, 2, 17);
    const bool m0_in_a = r.medoid_indices[0] < 10;
    const bool m1_in_a = r.medoid_indices[1] < 10;
    CHECK(m0_in_a != m1_in_a);  // one medoid per cluster
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const bool point_in_a = i < 10;
        const bool medoid_in_a = r.medoid_indices[r.assignment[i]] < 10;
        CHECK(point_in_a == medoid_in_a);
    }
}

TEST_CASE("N=4 K=2 equals the exhaustive optimum") {
    Rng rng(205);
    for (int trial = 0; trial < 25; ++trial) {
        auto pts = random_points(rng, 4, 3);
        KmedoidsResult r = kmedoids(pts, 2, 1000 + trial);
        CHECK(r.total_cost == doctest::Approx(exhaustive_optimum(pts, 2)).epsilon(1e-9));
    }
}

TEST_CASE("cost is non-increasing across iterations") {
    Rng rng(207);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 20 + rng.below(60);
        const std::size_t K = 2 + rng.below(6);
        auto pts = random_points(rng, n, 6);
        KmedoidsResult r = kmedoids(pts, K, 3000 + trial);
        REQUIRE(!r.iteration_costs.empty());
        for (std::size_t i = 1; i < r.iteration_costs.size(); ++i)
            CHECK(r.iteration_costs[i] <= r.iteration_costs[i - 1] + 1e-9);
        CHECK(r.total_cost == doctest::Approx(r.iteration_costs.back()));

        // medoids are distinct input exemplars, every point goes to its nearest
        std::vector<bool> used(n, false);
        for (std::size_t m : r.medoid_indices) {
            CHECK(m < n);
            CHECK(!used[m]);
            used[m] = true;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double assigned = cosdist(pts[i], pts[r.medoid_indices[r.assignment[i]]]);
            for (std::size_t c = 0; c < r.medoid_indices.size(); ++c)
                CHECK(assigned <= cosdist(pts[i], pts[r.medoid_indices[c]]) + 1e-12);
        }
    }
}

TEST_CASE("tiny instances stay within 5% of the exhaustive optimum") {
    Rng rng(209);
    int ok = 0;
    const int trials = 60;
    for (int trial = 0; trial < trials; ++trial) {
        const std::size_t n = 6 + rng.below(7);   // 6..12
        const std::size_t K = 1 + rng.below(3);   // 1..3
        auto pts = random_points(rng, n, 4);
        KmedoidsResult r = kmedoids(pts, K, 5000 + trial);
        const double opt = exhaustive_optimum(pts, K);
        if (r.total_cost <= opt * 1.05 + 1e-9) ++ok;
    }
    CHECK(ok >= trials * 95 / 100);
}

TEST_CASE("kmedoids rejects bad K") {
    Rng rng(211);
    auto pts = random_points(rng, 5, 3);
    CHECK_THROWS_AS(kmedoids(pts, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(kmedoids(pts, 6, 1), std::invalid_argument);
}

TEST_CASE("build_bank with K equal to the sample count keeps every pair") {
    Rng rng(213);
    auto samples = toy_samples(rng, 12, 8, 6);
    MlpModel enc = init_mlp({8, 10, 4}, OutputActivation::identity, 31);
    MemoryBank bank = build_bank(enc, samples, 12, 7);
    CHECK(bank.size() == 12);
    CHECK(bank.L == 8);
    CHECK(bank.H_bank == 6);
    CHECK(bank.feature_dim == 4);
    CHECK(bank.encoder_hash == model_hash(enc));
    for (std::size_t i = 0; i < 12; ++i) CHECK(bank.horizons[i] == samples[i].y);
}

TEST_CASE("bank horizons are exact exemplars of training sample horizons") {
    Rng rng(215);
    auto samples = toy_samples(rng, 40, 8, 6);
    MlpModel enc = init_mlp({8, 10, 4}, OutputActivation::identity, 33);
    MemoryBank bank = build_bank(enc, samples, 7, 9);
    for (const auto& y : bank.horizons) {
        bool found = false;
        for (const auto& s : samples) found = found || s.y == y;
        CHECK(found);
    }
    for (const auto& f : bank.features) {
        double sq = 0.0;
        for (double v : f) sq += v * v;
        CHECK(std::abs(std::sqrt(sq) - 1.0) < 1e-9);
    }
}

TEST_CASE("build_bank validates K against the sample count") {
    Rng rng(217);
    auto samples = toy_samples(rng, 5, 8, 6);
    MlpModel enc = init_mlp({8, 4}, OutputActivation::identity, 1);
    CHECK_THROWS_AS(build_bank(enc, samples, 6, 1), DataError);
}

TEST_CASE("slice_horizon returns the prefix") {
    std::vector<double> y(720);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i);
    CHECK(slice_horizon(y, 720) == y);
    std::vector<double> s = slice_horizon(y, 96);
    CHECK(s.size() == 96);
    CHECK(s[0] == 0.0);
    CHECK(s[95] == 95.0);
    CHECK_THROWS_AS(slice_horizon(y, 721), std::invalid_argument);
}

TEST_CASE("bank save/load round trip is bit exact") {
    Rng rng(219);
    auto samples = toy_samples(rng, 30, 8, 6);
    MlpModel enc = init_mlp({8, 10, 4}, OutputActivation::identity, 35);
    MemoryBank bank = build_bank(enc, samples, 9, 11, true, "toy");
    save_bank(bank, "gmb_test.bin");
    MemoryBank loaded = load_bank("gmb_test.bin");
    CHECK(loaded.L == bank.L);
    CHECK(loaded.H_bank == bank.H_bank);
    CHECK(loaded.feature_dim == bank.feature_dim);
    CHECK(loaded.seed == bank.seed);
    CHECK(loaded.dataset == "toy");
    CHECK(loaded.encoder_hash == bank.encoder_hash);
    CHECK(loaded.features == bank.features);
    CHECK(loaded.horizons == bank.horizons);
    CHECK(loaded.raw_windows == bank.raw_windows);
    std::remove("gmb_test.bin");
}

TEST_CASE("identical seeds give byte-identical bank files") {
    Rng rng(221);
    auto samples = toy_samples(rng, 30, 8, 6);
    MlpModel enc = init_mlp({8, 10, 4}, OutputActivation::identity, 35);
    save_bank(build_bank(enc, samples, 9, 11, false, "toy"), "gmb_a.bin");
    save_bank(build_bank(enc, samples, 9, 11, false, "toy"), "gmb_b.bin");
    std::ifstream a("gmb_a.bin", std::ios::binary), b("gmb_b.bin", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    CHECK(!sa.empty());
    std::remove("gmb_a.bin");
    std::remove("gmb_b.bin");
}

TEST_CASE("corrupted and truncated bank files fail the checksum") {
    Rng rng(223);
    auto samples = toy_samples(rng, 10, 8, 6);
    MlpModel enc = init_mlp({8, 4}, OutputActivation::identity, 1);
    save_bank(build_bank(enc, samples, 4, 3), "gmb_corrupt.bin");

    std::ifstream in("gmb_corrupt.bin", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    std::string flipped = bytes;
    flipped[bytes.size() / 2] = static_cast<char>(flipped[bytes.size() / 2] ^ 0x5A);
    std::ofstream(std::string("gmb_corrupt.bin"), std::ios::binary) << flipped;
    CHECK_THROWS_AS(load_bank("gmb_corrupt.bin"), DataError);

    std::ofstream(std::string("gmb_corrupt.bin"), std::ios::binary)
        << bytes.substr(0, bytes.size() - 10);
    CHECK_THROWS_AS(load_bank("gmb_corrupt.bin"), DataError);

    std::ofstream(std::string("gmb_corrupt.bin"), std::ios::binary) << "not a bank";
    CHECK_THROWS_AS(load_bank("gmb_corrupt.bin"), DataError);
    std::remove("gmb_corrupt.bin");
}

TEST_CASE("crc32 matches known vectors") {
    const unsigned char check[] = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
    CHECK(crc32(check, 9) == 0xCBF43926u);  // standard CRC-32 check value
    CHECK(crc32(nullptr, 0) == 0x00000000u);
}
