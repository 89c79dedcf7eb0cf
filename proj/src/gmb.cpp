#include "pfrp/gmb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "pfrp/errors.hpp"
#include "pfrp/pcl.hpp"
#include "pfrp/rng.hpp"

namespace pfrp {

namespace {

double cosine_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return 1.0 - dot;
}

std::vector<std::size_t> kmeanspp_init(const std::vector<std::vector<double>>& points,
                                       std::size_t K, Rng& rng) {
    const std::size_t N = points.size();
    std::vector<std::size_t> medoids;
    std::vector<bool> chosen(N, false);

    const std::size_t first = rng.below(N);
    medoids.push_back(first);
    chosen[first] = true;

    std::vector<double> d2(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double d = cosine_dist(points[i], points[first]);
        d2[i] = d * d;
    }
    while (medoids.size() < K) {
        double total = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            if (!chosen[i]) total += d2[i];
        std::size_t pick = N;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                if (chosen[i] || d2[i] <= 0.0) continue;
                acc += d2[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
            if (pick == N) {  // numeric tail: take the last eligible
                for (std::size_t i = N; i-- > 0;)
                    if (!chosen[i] && d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
            }
        }
        if (pick == N) {  // all remaining points duplicate a medoid
            for (std::size_t i = 0; i < N; ++i)
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
        }
        medoids.push_back(pick);
        chosen[pick] = true;
        for (std::size_t i = 0; i < N; ++i) {
            const double d = cosine_dist(points[i], points[pick]);
            d2[i] = std::min(d2[i], d * d);
        }
    }
    return medoids;
}

}  // namespace

namespace {

// One alternating descent from a k-means++ seeding.
KmedoidsResult kmedoids_single(const std::vector<std::vector<double>>& points, std::size_t K,
                               std::uint64_t seed, int max_iter) {
    const std::size_t N = points.size();
    const std::size_t dim = points[0].size();

    Rng rng(seed);
    KmedoidsResult result;
    result.medoid_indices = kmeanspp_init(points, K, rng);
    result.assignment.assign(N, 0);

    std::vector<std::size_t> medoid_of_point(N, K);  // position in medoid list, K = none
    auto assign_all = [&]() {
        std::fill(medoid_of_point.begin(), medoid_of_point.end(), K);
        for (std::size_t c = 0; c < K; ++c) medoid_of_point[result.medoid_indices[c]] = c;
        double cost = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            if (medoid_of_point[i] != K) {  // medoids belong to their own cluster
                result.assignment[i] = medoid_of_point[i];
                continue;
            }
            std::size_t best = 0;
            double best_d = cosine_dist(points[i], points[result.medoid_indices[0]]);
            for (std::size_t c = 1; c < K; ++c) {
                const double d = cosine_dist(points[i], points[result.medoid_indices[c]]);
                if (d < best_d) {  // ties keep the lowest medoid index
                    best_d = d;
                    best = c;
                }
            }
            result.assignment[i] = best;
            cost += best_d;
        }
        return cost;
    };

    double cost = assign_all();
    result.iteration_costs.push_back(cost);

    std::vector<std::vector<std::size_t>> members(K);
    std::vector<double> sum_vec(dim);
    for (int iter = 0; iter < max_iter; ++iter) {
        for (auto& m : members) m.clear();
        for (std::size_t i = 0; i < N; ++i) members[result.assignment[i]].push_back(i);

        // Within each cluster the cosine cost of a candidate medoid m is
        // |c| - dot(sum of members, m), so the argmin is a single pass.
        bool changed = false;
        for (std::size_t c = 0; c < K; ++c) {
            if (members[c].empty()) continue;
            std::fill(sum_vec.begin(), sum_vec.end(), 0.0);
            for (std::size_t i : members[c])
                for (std::size_t t = 0; t < dim; ++t) sum_vec[t] += points[i][t];
            std::size_t best = members[c][0];
            double best_dot = -std::numeric_limits<double>::infinity();
            for (std::size_t i : members[c]) {
                double dot = 0.0;
                for (std::size_t t = 0; t < dim; ++t) dot += sum_vec[t] * points[i][t];
                if (dot > best_dot) {  // ties keep the lowest point index
                    best_dot = dot;
                    best = i;
                }
            }
            if (best != result.medoid_indices[c]) {
                result.medoid_indices[c] = best;
                changed = true;
            }
        }
        if (!changed) break;
        cost = assign_all();
        result.iteration_costs.push_back(cost);
    }

    result.total_cost = cost;
    return result;
}

}  // namespace

KmedoidsResult kmedoids(const std::vector<std::vector<double>>& points, std::size_t K,
                        std::uint64_t seed, int max_iter) {
    const std::size_t N = points.size();
    if (K < 1) throw std::invalid_argument("kmedoids: K must be at least 1");
    if (K > N) throw std::invalid_argument("kmedoids: K exceeds point count");
    const std::size_t dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim) throw std::invalid_argument("kmedoids: inconsistent dimensions");

    // The alternating descent lands in local optima on small unstructured
    // instances; extra seeded starts are cheap there and the best run wins.
    // At scale a single descent keeps clustering linear in N*K.
    const std::size_t work = N * K;
    const int starts = work <= 20000 ? 8 : 1;

    std::uint64_t sm = seed;
    KmedoidsResult best = kmedoids_single(points, K, splitmix64_next(sm), max_iter);
    for (int s = 1; s < starts; ++s) {
        KmedoidsResult cand = kmedoids_single(points, K, splitmix64_next(sm), max_iter);
        if (cand.total_cost < best.total_cost) best = std::move(cand);
    }
    return best;
}

MemoryBank build_bank(const MlpModel& encoder, const std::vector<WindowSample>& samples,
                      std::size_t K, std::uint64_t seed, bool store_raw,
                      const std::string& dataset) {
    if (samples.empty()) throw DataError("build_bank: no samples");
    if (K < 1 || K > samples.size())
        throw DataError("build_bank: K=" + std::to_string(K) + " outside [1, " +
                        std::to_string(samples.size()) + "]");
    const auto L = samples[0].x.size();
    const auto H = samples[0].y.size();
    if (L != static_cast<std::size_t>(encoder.input_dim()))
        throw DataError("build_bank: encoder input dim != lookback length");

    // encode everything in chunks
    std::vector<std::vector<double>> feats(samples.size());
    const std::size_t chunk = 1024;
    for (std::size_t from = 0; from < samples.size(); from += chunk) {
        const std::size_t count = std::min(chunk, samples.size() - from);
        Matrix x(count, L);
        for (std::size_t r = 0; r < count; ++r)
            std::copy(samples[from + r].x.begin(), samples[from + r].x.end(), x.row(r));
        Matrix f = encode(encoder, x);
        for (std::size_t r = 0; r < count; ++r)
            feats[from + r].assign(f.row(r), f.row(r) + f.cols);
    }

    KmedoidsResult km = kmedoids(feats, K, seed);
    std::vector<std::size_t> keep = km.medoid_indices;
    std::sort(keep.begin(), keep.end());

    MemoryBank bank;
    bank.L = static_cast<int>(L);
    bank.H_bank = static_cast<int>(H);
    bank.feature_dim = encoder.output_dim();
    bank.encoder_hash = model_hash(encoder);
    bank.dataset = dataset;
    bank.seed = seed;
    for (std::size_t i : keep) {
        bank.features.push_back(feats[i]);
        bank.horizons.push_back(samples[i].y);
        if (store_raw) bank.raw_windows.push_back(samples[i].x);
    }
    return bank;
}

std::vector<double> slice_horizon(const std::vector<double>& y, int H) {
    if (H < 1 || static_cast<std::size_t>(H) > y.size())
        throw std::invalid_argument("slice_horizon: H=" + std::to_string(H) +
                                    " exceeds stored horizon " + std::to_string(y.size()));
    return std::vector<double>(y.begin(), y.begin() + H);
}

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t crc) {
    static std::uint32_t table[256];
    static bool ready = false;
    if (!ready) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int b = 0; b < 8; ++b) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        ready = true;
    }
    crc ^= 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace {

template <class T>
void append_raw(std::vector<unsigned char>& buf, const T& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
}

void append_string(std::vector<unsigned char>& buf, const std::string& s) {
    append_raw(buf, static_cast<std::uint32_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
}

template <class T>
T read_raw(const std::vector<unsigned char>& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw DataError("bank file truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

std::string read_string(const std::vector<unsigned char>& buf, std::size_t& pos) {
    const auto len = read_raw<std::uint32_t>(buf, pos);
    if (pos + len > buf.size()) throw DataError("bank file truncated");
    std::string s(buf.begin() + pos, buf.begin() + pos + len);
    pos += len;
    return s;
}

void append_doubles(std::vector<unsigned char>& buf, const std::vector<double>& v) {
    const auto* p = reinterpret_cast<const unsigned char*>(v.data());
    buf.insert(buf.end(), p, p + v.size() * sizeof(double));
}

std::vector<double> read_doubles(const std::vector<unsigned char>& buf, std::size_t& pos,
                                 std::size_t count) {
    if (pos + count * sizeof(double) > buf.size()) throw DataError("bank file truncated");
    std::vector<double> v(count);
    std::memcpy(v.data(), buf.data() + pos, count * sizeof(double));
    pos += count * sizeof(double);
    return v;
}

}  // namespace

void save_bank(const MemoryBank& bank, const std::string& path) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), {'G', 'M', 'B', '1'});
    append_raw(buf, static_cast<std::int32_t>(bank.L));
    append_raw(buf, static_cast<std::int32_t>(bank.H_bank));
    append_raw(buf, static_cast<std::int32_t>(bank.feature_dim));
    append_raw(buf, static_cast<std::int32_t>(bank.size()));
    append_raw(buf, static_cast<std::uint32_t>(bank.has_raw() ? 1 : 0));
    append_raw(buf, bank.seed);
    append_string(buf, bank.encoder_hash);
    append_string(buf, bank.dataset);
    for (std::size_t i = 0; i < bank.size(); ++i) {
        append_doubles(buf, bank.features[i]);
        append_doubles(buf, bank.horizons[i]);
    }
    if (bank.has_raw())
        for (const auto& w : bank.raw_windows) append_doubles(buf, w);
    append_raw(buf, crc32(buf.data(), buf.size()));

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot move bank into place: " + path);
}

MemoryBank load_bank(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open bank: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), "GMB1", 4) != 0)
        throw DataError("not a GMB1 bank file: " + path);

    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    if (crc32(buf.data(), buf.size() - 4) != stored_crc)
        throw DataError("bank checksum mismatch (corrupt or truncated): " + path);

    std::size_t pos = 4;
    MemoryBank bank;
    bank.L = read_raw<std::int32_t>(buf, pos);
    bank.H_bank = read_raw<std::int32_t>(buf, pos);
    bank.feature_dim = read_raw<std::int32_t>(buf, pos);
    const auto K = read_raw<std::int32_t>(buf, pos);
    const auto flags = read_raw<std::uint32_t>(buf, pos);
    bank.seed = read_raw<std::uint64_t>(buf, pos);
    bank.encoder_hash = read_string(buf, pos);
    bank.dataset = read_string(buf, pos);
    if (bank.L < 1 || bank.H_bank < 1 || bank.feature_dim < 1 || K < 1)
        throw DataError("bank header is invalid: " + path);
    for (std::int32_t i = 0; i < K; ++i) {
        bank.features.push_back(read_doubles(buf, pos, bank.feature_dim));
        bank.horizons.push_back(read_doubles(buf, pos, bank.H_bank));
    }
    if (flags & 1)
        for (std::int32_t i = 0; i < K; ++i)
            bank.raw_windows.push_back(read_doubles(buf, pos, bank.L));
    if (pos != buf.size() - 4) throw DataError("bank file has trailing bytes: " + path);
    return bank;
}

}  // namespace pfrp
