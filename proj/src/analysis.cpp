#include "pfrp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "pfrp/errors.hpp"

namespace pfrp {

std::vector<int> default_lags(const std::string& freq_label) {
    if (freq_label == "10min") return {144, 1008};
    if (freq_label == "15min") return {96, 672};
    return {24, 168};  // hourly
}

double acf(const std::vector<double>& values, int lag) {
    const auto T = static_cast<long>(values.size());
    if (lag < 1 || lag >= T)
        throw std::invalid_argument("acf: lag " + std::to_string(lag) + " outside [1, T)");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(T);
    double denom = 0.0;
    for (double v : values) denom += (v - mean) * (v - mean);
    if (denom / static_cast<double>(T) <= 1e-12)
        throw DataError("acf: constant series");
    double num = 0.0;
    for (long t = 0; t + lag < T; ++t)
        num += (values[t] - mean) * (values[t + lag] - mean);
    return num / denom;
}

double normalized_entropy(const std::vector<double>& values, int bins) {
    if (values.empty()) throw std::invalid_argument("normalized_entropy: empty series");
    if (bins < 2) throw std::invalid_argument("normalized_entropy: need at least 2 bins");
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) return 0.0;  // all mass in one bin

    std::vector<std::size_t> counts(bins, 0);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (double v : values) {
        auto b = static_cast<long>((v - lo) / width);
        if (b < 0) b = 0;
        if (b >= bins) b = bins - 1;  // v == hi lands in the last bin
        ++counts[b];
    }
    double h = 0.0;
    const auto n = static_cast<double>(values.size());
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h / std::log(static_cast<double>(bins));
}

PeriodicityScore periodicity_score(const std::vector<double>& values,
                                   const PeriodicityConfig& config) {
    if (config.lags.empty()) throw std::invalid_argument("periodicity_score: empty lag set");
    PeriodicityScore s;
    for (int lag : config.lags) s.lag_acfs.push_back(acf(values, lag));
    for (double a : s.lag_acfs) s.mean_acf += a;
    s.mean_acf /= static_cast<double>(s.lag_acfs.size());
    s.acf_score = std::max(0.0, s.mean_acf);  // keep the product in [0,1]
    s.entropy_norm = normalized_entropy(values, config.bins);
    s.inv_entropy = 1.0 - s.entropy_norm;
    s.score = s.acf_score * s.inv_entropy;
    return s;
}

WeightReport weight_report(const std::vector<PfrpPrediction>& predictions) {
    if (predictions.empty()) throw std::invalid_argument("weight_report: no predictions");
    WeightReport r;
    r.w1.reserve(predictions.size());
    for (const auto& p : predictions) r.w1.push_back(p.w1);

    std::vector<double> sorted = r.w1;
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
                                     : sorted[i];
    };
    for (double w : r.w1) r.mean_w1 += w;
    r.mean_w1 /= static_cast<double>(r.w1.size());
    r.min_w1 = sorted.front();
    r.max_w1 = sorted.back();
    r.q25 = quantile(0.25);
    r.median = quantile(0.5);
    r.q75 = quantile(0.75);
    return r;
}

void write_weight_report_csv(const WeightReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "sample,w1\n";
    char buf[40];
    for (std::size_t i = 0; i < report.w1.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", report.w1[i]);
        out << i << "," << buf << "\n";
    }
}

}  // namespace pfrp
