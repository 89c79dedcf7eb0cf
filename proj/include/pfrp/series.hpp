#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pfrp/errors.hpp"

namespace pfrp {

// Raw univariate series in file order.
struct TimeSeries {
    std::vector<double> values;
    std::string freq_label;  // e.g. "1h", "15min"; informational
    std::string name;

    std::size_t size() const { return values.size(); }
};

struct SplitSpec {
    double train_ratio = 0.7;
    double val_ratio = 0.1;
    double test_ratio = 0.2;
};

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
    std::size_t size() const { return end - begin; }
};

struct SplitRanges {
    IndexRange train, val, test;
};

// One (lookback, horizon) pair. x and y are contiguous in the parent series;
// y starts at start_index + x.size().
struct WindowSample {
    std::vector<double> x;
    std::vector<double> y;
    std::size_t start_index = 0;
};

// Global z-score with train-split population statistics.
struct Standardizer {
    double mean = 0.0;
    double std = 1.0;

    double apply(double v) const { return (v - mean) / std; }
    double invert(double v) const { return v * std + mean; }
    std::vector<double> apply(const std::vector<double>& v) const;
    std::vector<double> invert(const std::vector<double>& v) const;
};

// Loads one numeric column from a CSV file. Default column is the last
// numeric one; a header row is auto-detected when the selected column of the
// first row does not parse as a finite number. `column` accepts a header name
// or a 0-based index.
TimeSeries load_csv(const std::string& path, const std::optional<std::string>& column = {});

// Contiguous, disjoint, ordered ranges covering [0,T). Boundaries are
// floor(T*train) and floor(T*(train+val)). When min_split_len > 0 each range
// must hold at least that many points (pass L+H to guarantee windowability).
SplitRanges chronological_split(std::size_t total_len, const SplitSpec& spec,
                                std::size_t min_split_len = 0);
SplitRanges chronological_split(const TimeSeries& ts, const SplitSpec& spec,
                                std::size_t min_split_len = 0);

std::vector<WindowSample> make_windows(const std::vector<double>& values, IndexRange range,
                                       int L, int H, int stride = 1);
std::vector<WindowSample> make_windows(const TimeSeries& ts, IndexRange range, int L, int H,
                                       int stride = 1);

Standardizer fit_standardizer(const std::vector<double>& values, IndexRange train_range);
Standardizer fit_standardizer(const std::vector<double>& train_values);

double mse(const std::vector<double>& a, const std::vector<double>& b);
double mae(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace pfrp
