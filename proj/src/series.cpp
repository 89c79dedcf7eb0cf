#include "pfrp/series.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pfrp {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim whitespace and stray CR
        std::size_t a = field.find_first_not_of(" \t\r");
        std::size_t b = field.find_last_not_of(" \t\r");
        fields.push_back(a == std::string::npos ? "" : field.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

// Strict finite-double parse; "NaN"/"inf" and partial matches are rejected.
bool parse_finite(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + s.size()) return false;
    if (!std::isfinite(v)) return false;
    out = v;
    return true;
}

}  // namespace

std::vector<double> Standardizer::apply(const std::vector<double>& v) const {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = apply(v[i]);
    return out;
}

std::vector<double> Standardizer::invert(const std::vector<double>& v) const {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = invert(v[i]);
    return out;
}

TimeSeries load_csv(const std::string& path, const std::optional<std::string>& column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        rows.push_back(split_fields(line));
    }
    if (rows.empty()) throw DataError("empty file: " + path);

    std::size_t col = 0;
    std::size_t first_data_row = 0;
    double tmp = 0.0;

    if (column && !column->empty()) {
        // try header-name match first, then 0-based index
        bool named = false;
        for (std::size_t c = 0; c < rows[0].size(); ++c) {
            if (rows[0][c] == *column) {
                col = c;
                first_data_row = 1;
                named = true;
                break;
            }
        }
        if (!named) {
            char* end = nullptr;
            long idx = std::strtol(column->c_str(), &end, 10);
            if (end != column->c_str() + column->size() || idx < 0)
                throw DataError("column selector '" + *column + "' not found in " + path);
            col = static_cast<std::size_t>(idx);
            if (col >= rows[0].size())
                throw DataError("column index " + *column + " out of range in " + path);
            first_data_row = parse_finite(rows[0][col], tmp) ? 0 : 1;
        }
    } else {
        // default: last numeric column of the first data row
        const std::vector<std::string>& probe = rows.size() > 1 ? rows[1] : rows[0];
        bool found = false;
        for (std::size_t c = probe.size(); c-- > 0;) {
            if (parse_finite(probe[c], tmp)) {
                col = c;
                found = true;
                break;
            }
        }
        if (!found) throw DataError("no numeric column in " + path);
        first_data_row = (col < rows[0].size() && parse_finite(rows[0][col], tmp)) ? 0 : 1;
    }

    TimeSeries ts;
    ts.name = path;
    for (std::size_t r = first_data_row; r < rows.size(); ++r) {
        if (col >= rows[r].size())
            throw DataError(path + ": row " + std::to_string(r + 1) + " has no column " +
                            std::to_string(col));
        double v = 0.0;
        if (!parse_finite(rows[r][col], v))
            throw DataError(path + ": non-finite value '" + rows[r][col] + "' at row " +
                            std::to_string(r + 1));
        ts.values.push_back(v);
    }
    if (ts.values.size() < 2)
        throw DataError(path + ": series needs at least 2 points, got " +
                        std::to_string(ts.values.size()));
    return ts;
}

SplitRanges chronological_split(std::size_t total_len, const SplitSpec& spec,
                                std::size_t min_split_len) {
    auto in_open_unit = [](double r) { return r > 0.0 && r < 1.0; };
    if (!in_open_unit(spec.train_ratio) || !in_open_unit(spec.val_ratio) ||
        !in_open_unit(spec.test_ratio))
        throw ConfigError("split ratios must each lie in (0,1)");
    const double sum = spec.train_ratio + spec.val_ratio + spec.test_ratio;
    if (std::abs(sum - 1.0) > 1e-12)
        throw ConfigError("split ratios must sum to 1");

    const auto t = static_cast<double>(total_len);
    const auto b1 = static_cast<std::size_t>(std::floor(t * spec.train_ratio));
    const auto b2 = static_cast<std::size_t>(std::floor(t * (spec.train_ratio + spec.val_ratio)));

    SplitRanges r;
    r.train = {0, b1};
    r.val = {b1, b2};
    r.test = {b2, total_len};
    if (min_split_len > 0 &&
        (r.train.size() < min_split_len || r.val.size() < min_split_len ||
         r.test.size() < min_split_len))
        throw DataError("split too small for any window (need at least " +
                        std::to_string(min_split_len) + " points per split)");
    return r;
}

SplitRanges chronological_split(const TimeSeries& ts, const SplitSpec& spec,
                                std::size_t min_split_len) {
    return chronological_split(ts.size(), spec, min_split_len);
}

std::vector<WindowSample> make_windows(const std::vector<double>& values, IndexRange range,
                                       int L, int H, int stride) {
    if (L < 1 || H < 1 || stride < 1)
        throw std::invalid_argument("make_windows: L, H and stride must be positive");
    if (range.end > values.size())
        throw std::invalid_argument("make_windows: range exceeds series length");
    const std::size_t need = static_cast<std::size_t>(L) + static_cast<std::size_t>(H);
    if (range.size() < need)
        throw DataError("range too short for windows: have " + std::to_string(range.size()) +
                        " points, need " + std::to_string(need));

    const std::size_t count = (range.size() - need) / static_cast<std::size_t>(stride) + 1;
    std::vector<WindowSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        WindowSample w;
        w.start_index = range.begin + i * static_cast<std::size_t>(stride);
        w.x.assign(values.begin() + w.start_index, values.begin() + w.start_index + L);
        w.y.assign(values.begin() + w.start_index + L, values.begin() + w.start_index + L + H);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<WindowSample> make_windows(const TimeSeries& ts, IndexRange range, int L, int H,
                                       int stride) {
    return make_windows(ts.values, range, L, H, stride);
}

Standardizer fit_standardizer(const std::vector<double>& values, IndexRange train_range) {
    if (train_range.end > values.size() || train_range.size() == 0)
        throw std::invalid_argument("fit_standardizer: bad train range");
    std::vector<double> train(values.begin() + train_range.begin, values.begin() + train_range.end);
    return fit_standardizer(train);
}

Standardizer fit_standardizer(const std::vector<double>& train_values) {
    if (train_values.empty()) throw std::invalid_argument("fit_standardizer: empty input");
    double mean = 0.0;
    for (double v : train_values) mean += v;
    mean /= static_cast<double>(train_values.size());
    double var = 0.0;
    for (double v : train_values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(train_values.size());
    const double sd = std::sqrt(var);
    if (sd <= 1e-12) throw DataError("constant train split: cannot standardize");
    return Standardizer{mean, sd};
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("mse: length mismatch or empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double mae(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("mae: length mismatch or empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc / static_cast<double>(a.size());
}

}  // namespace pfrp
