#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfrp/nn.hpp"
#include "pfrp/series.hpp"

namespace pfrp {

// Compacted store of (feature, horizon) exemplar pairs. Features are unit
// vectors; horizon entries keep the full bank horizon and are prefix-sliced
// at serve time.
struct MemoryBank {
    int L = 0;
    int H_bank = 0;
    int feature_dim = 0;
    std::vector<std::vector<double>> features;     // K x d, unit norm
    std::vector<std::vector<double>> horizons;     // K x H_bank
    std::vector<std::vector<double>> raw_windows;  // K x L, optional
    std::string encoder_hash;
    std::string dataset;
    std::uint64_t seed = 0;

    std::size_t size() const { return features.size(); }
    bool has_raw() const { return !raw_windows.empty(); }
};

struct KmedoidsResult {
    std::vector<std::size_t> medoid_indices;  // into the input point set
    std::vector<std::size_t> assignment;      // per point: position in medoid_indices
    double total_cost = 0.0;
    std::vector<double> iteration_costs;  // after each assign+update round
};

// Alternating k-medoids under cosine distance (1 - dot on unit vectors) with
// k-means++-style seeded initialization. Medoids are actual input points;
// total cost is non-increasing across iterations.
KmedoidsResult kmedoids(const std::vector<std::vector<double>>& points, std::size_t K,
                        std::uint64_t seed, int max_iter = 100);

// Encodes every training sample, clusters the features, and keeps the K
// medoid (feature, horizon) pairs, sorted by original sample index.
MemoryBank build_bank(const MlpModel& encoder, const std::vector<WindowSample>& samples,
                      std::size_t K, std::uint64_t seed, bool store_raw = false,
                      const std::string& dataset = "");

// Prefix of length H from a stored horizon sequence.
std::vector<double> slice_horizon(const std::vector<double>& y, int H);

// Binary bank file: magic "GMB1", little-endian header, float64 payload,
// trailing CRC32. Round trips are bit-exact.
void save_bank(const MemoryBank& bank, const std::string& path);
MemoryBank load_bank(const std::string& path);

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t crc = 0);

}  // namespace pfrp
