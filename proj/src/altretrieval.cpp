#include "pfrp/altretrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pfrp/errors.hpp"
#include "pfrp/pcl.hpp"
#include "pfrp/pfrp.hpp"

namespace pfrp {

double dtw_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw_distance: empty input");
    const std::size_t n = a.size(), m = b.size();
    // one rolling row of the DP table
    std::vector<double> prev(m), curr(m);
    prev[0] = std::abs(a[0] - b[0]);
    for (std::size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + std::abs(a[0] - b[j]);
    for (std::size_t i = 1; i < n; ++i) {
        curr[0] = prev[0] + std::abs(a[i] - b[0]);
        for (std::size_t j = 1; j < m; ++j) {
            const double best = std::min(prev[j], std::min(curr[j - 1], prev[j - 1]));
            curr[j] = best + std::abs(a[i] - b[j]);
        }
        std::swap(prev, curr);
    }
    return prev[m - 1];
}

double pcc(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("pcc: need equal lengths >= 2");
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va / n <= 1e-12 || vb / n <= 1e-12)
        throw DataError("pcc: zero-variance input");
    return cov / std::sqrt(va * vb);
}

Retrieval retrieve_topk_by(RetrievalCriterion criterion, const MemoryBank& bank,
                           const MlpModel& encoder, const std::vector<double>& x, int k, int H) {
    if (criterion == RetrievalCriterion::feature_cosine)
        return retrieve_topk(bank, encode(encoder, x), k, H);

    if (!bank.has_raw())
        throw DataError("retrieve_topk_by: bank has no raw windows; rebuild with --store-raw-x");
    if (k < 1 || static_cast<std::size_t>(k) > bank.size())
        throw std::invalid_argument("retrieve_topk_by: k outside [1, K]");
    if (x.size() != static_cast<std::size_t>(bank.L))
        throw std::invalid_argument("retrieve_topk_by: query length != bank L");

    std::vector<double> scores(bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const std::vector<double>& w = bank.raw_windows[i];
        switch (criterion) {
            case RetrievalCriterion::window_mse: scores[i] = mse(x, w); break;
            case RetrievalCriterion::window_dtw: scores[i] = dtw_distance(x, w); break;
            case RetrievalCriterion::window_pcc: scores[i] = pcc(x, w); break;
            default: break;
        }
    }

    // descending weight = "more similar first": distances enter negated
    const bool distance_like = criterion == RetrievalCriterion::window_mse ||
                               criterion == RetrievalCriterion::window_dtw;
    std::vector<std::size_t> idx(bank.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto better = [&](std::size_t p, std::size_t q) {
        const double a = distance_like ? -scores[p] : scores[p];
        const double b = distance_like ? -scores[q] : scores[q];
        if (a != b) return a > b;
        return p < q;
    };
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);

    Retrieval r;
    for (int i = 0; i < k; ++i) {
        const std::size_t j = idx[i];
        r.indices.push_back(j);
        r.scores.push_back(scores[j]);
        r.weights.push_back(distance_like ? -scores[j] : scores[j]);
        r.values.push_back(slice_horizon(bank.horizons[j], H));
    }
    return r;
}

}  // namespace pfrp
