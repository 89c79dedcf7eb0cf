#pragma once

#include <string>
#include <vector>

#include "pfrp/pfrp.hpp"

namespace pfrp {

struct PeriodicityConfig {
    std::vector<int> lags = {24, 168};  // daily/weekly at hourly sampling
    int bins = 20;
};

// Known periodic lags per sampling frequency: day and week in samples.
std::vector<int> default_lags(const std::string& freq_label);

// ACF(l) = sum_{t<=T-l} (x_t - mean)(x_{t+l} - mean) / sum_t (x_t - mean)^2.
// The denominator runs over all T terms, so the value lies in [-1,1].
double acf(const std::vector<double>& values, int lag);

// Shannon entropy over equal-width bins spanning [min,max], normalized by
// log(bins). A constant series has all mass in one bin and entropy 0.
double normalized_entropy(const std::vector<double>& values, int bins);

struct PeriodicityScore {
    double score = 0.0;          // acf_score * inv_entropy, in [0,1]
    double mean_acf = 0.0;       // before clamping
    double acf_score = 0.0;      // mean ACF over the lag set, clamped at 0
    double entropy_norm = 0.0;
    double inv_entropy = 0.0;
    std::vector<double> lag_acfs;
};

PeriodicityScore periodicity_score(const std::vector<double>& values,
                                   const PeriodicityConfig& config);

struct WeightReport {
    double mean_w1 = 0.0;
    double min_w1 = 0.0, max_w1 = 0.0;
    double q25 = 0.0, median = 0.0, q75 = 0.0;
    std::vector<double> w1;  // per prediction, input order
};

WeightReport weight_report(const std::vector<PfrpPrediction>& predictions);
void write_weight_report_csv(const WeightReport& report, const std::string& path);

}  // namespace pfrp
