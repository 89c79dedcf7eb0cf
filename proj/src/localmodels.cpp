#include "pfrp/localmodels.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "pfrp/errors.hpp"
#include "pfrp/rng.hpp"

namespace pfrp {

long LocalPredictor::parameter_count() const {
    if (kind == Kind::linear) return head.parameter_count();
    return trend_head.parameter_count() + seasonal_head.parameter_count();
}

LocalPredictor init_local(LocalPredictor::Kind kind, int L, int H, int kernel,
                          std::uint64_t seed) {
    if (kernel < 1 || kernel % 2 == 0 || kernel > L)
        throw ConfigError("local model: kernel must be odd and <= L");
    LocalPredictor m;
    m.kind = kind;
    m.kernel = kernel;
    if (kind == LocalPredictor::Kind::linear) {
        m.head = init_mlp({L, H}, OutputActivation::identity, seed);
    } else {
        m.trend_head = init_mlp({L, H}, OutputActivation::identity, seed);
        m.seasonal_head = init_mlp({L, H}, OutputActivation::identity, seed ^ 0x5bd1e995ULL);
    }
    return m;
}

void moving_average_decompose(const std::vector<double>& x, int kernel,
                              std::vector<double>& trend, std::vector<double>& seasonal) {
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("moving_average_decompose: kernel must be odd");
    if (static_cast<std::size_t>(kernel) > x.size())
        throw std::invalid_argument("moving_average_decompose: kernel exceeds input length");
    const int n = static_cast<int>(x.size());
    const int half = kernel / 2;
    trend.assign(x.size(), 0.0);
    seasonal.assign(x.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int t = i - half; t <= i + half; ++t) {
            const int idx = t < 0 ? 0 : (t >= n ? n - 1 : t);  // edge replication
            acc += x[idx];
        }
        trend[i] = acc / static_cast<double>(kernel);
        seasonal[i] = x[i] - trend[i];
    }
}

Matrix local_forward(const LocalPredictor& model, const Matrix& x_batch, LocalCache* cache) {
    if (model.kind == LocalPredictor::Kind::linear)
        return mlp_forward(model.head, x_batch, cache ? &cache->head : nullptr);

    Matrix trend(x_batch.rows, x_batch.cols);
    Matrix seasonal(x_batch.rows, x_batch.cols);
    std::vector<double> row(x_batch.cols), t, s;
    for (std::size_t i = 0; i < x_batch.rows; ++i) {
        row.assign(x_batch.row(i), x_batch.row(i) + x_batch.cols);
        moving_average_decompose(row, model.kernel, t, s);
        std::copy(t.begin(), t.end(), trend.row(i));
        std::copy(s.begin(), s.end(), seasonal.row(i));
    }
    Matrix yt = mlp_forward(model.trend_head, trend, cache ? &cache->trend : nullptr);
    Matrix ys = mlp_forward(model.seasonal_head, seasonal, cache ? &cache->seasonal : nullptr);
    for (std::size_t i = 0; i < yt.data.size(); ++i) yt.data[i] += ys.data[i];
    return yt;
}

LocalGrads zero_local_grads(const LocalPredictor& model) {
    LocalGrads g;
    if (model.kind == LocalPredictor::Kind::linear) {
        g.head = zero_grads_like(model.head);
    } else {
        g.trend = zero_grads_like(model.trend_head);
        g.seasonal = zero_grads_like(model.seasonal_head);
    }
    return g;
}

void local_backward(const LocalPredictor& model, const LocalCache& cache, const Matrix& upstream,
                    LocalGrads& accum) {
    if (model.kind == LocalPredictor::Kind::linear) {
        mlp_backward(model.head, cache.head, upstream, accum.head);
    } else {
        mlp_backward(model.trend_head, cache.trend, upstream, accum.trend);
        mlp_backward(model.seasonal_head, cache.seasonal, upstream, accum.seasonal);
    }
}

LocalAdam make_local_adam(const LocalPredictor& model, double lr) {
    LocalAdam s;
    if (model.kind == LocalPredictor::Kind::linear) {
        s.head = make_adam(model.head, lr);
    } else {
        s.trend = make_adam(model.trend_head, lr);
        s.seasonal = make_adam(model.seasonal_head, lr);
    }
    return s;
}

void local_adam_step(LocalPredictor& model, const LocalGrads& grads, LocalAdam& state) {
    if (model.kind == LocalPredictor::Kind::linear) {
        adam_step(model.head, grads.head, state.head);
    } else {
        adam_step(model.trend_head, grads.trend, state.trend);
        adam_step(model.seasonal_head, grads.seasonal, state.seasonal);
    }
}

std::vector<double> linear_predict(const LocalPredictor& model, const std::vector<double>& x) {
    if (model.kind != LocalPredictor::Kind::linear)
        throw std::invalid_argument("linear_predict: model is not linear");
    Matrix out = mlp_forward(model.head, from_row(x));
    return out.data;
}

std::vector<double> dlinear_predict(const LocalPredictor& model, const std::vector<double>& x) {
    if (model.kind != LocalPredictor::Kind::dlinear)
        throw std::invalid_argument("dlinear_predict: model is not dlinear");
    Matrix out = local_forward(model, from_row(x));
    return out.data;
}

std::vector<double> local_predict(const LocalPredictor& model, const std::vector<double>& x) {
    Matrix out = local_forward(model, from_row(x));
    return out.data;
}

std::vector<double> train_local(const std::vector<WindowSample>& samples, LocalPredictor& model,
                                int epochs, double lr, int batch_size, std::uint64_t seed) {
    if (samples.empty()) throw DataError("train_local: empty training set");
    if (batch_size < 1) throw ConfigError("train_local: batch_size must be positive");
    const std::size_t L = samples[0].x.size();
    const std::size_t H = samples[0].y.size();

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    auto run_epoch = [&](LocalAdam* opt) {
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t from = 0; from < order.size(); from += batch_size) {
            const std::size_t count = std::min<std::size_t>(batch_size, order.size() - from);
            Matrix x(count, L), y(count, H);
            for (std::size_t r = 0; r < count; ++r) {
                const WindowSample& s = samples[order[from + r]];
                std::copy(s.x.begin(), s.x.end(), x.row(r));
                std::copy(s.y.begin(), s.y.end(), y.row(r));
            }
            LocalCache cache;
            Matrix pred = local_forward(model, x, &cache);
            Matrix dpred(pred.rows, pred.cols);
            double loss = 0.0;
            const double scale = 1.0 / static_cast<double>(pred.data.size());
            for (std::size_t i = 0; i < pred.data.size(); ++i) {
                const double d = pred.data[i] - y.data[i];
                loss += d * d * scale;
                dpred.data[i] = 2.0 * d * scale;
            }
            if (!std::isfinite(loss)) throw NumericError("local training loss is not finite");
            loss_sum += loss;
            ++batches;
            if (opt) {
                LocalGrads g = zero_local_grads(model);
                local_backward(model, cache, dpred, g);
                local_adam_step(model, g, *opt);
            }
        }
        return batches ? loss_sum / static_cast<double>(batches) : 0.0;
    };

    std::vector<double> curve;
    curve.push_back(run_epoch(nullptr));
    LocalAdam opt = make_local_adam(model, lr);
    Rng rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        curve.push_back(run_epoch(&opt));
    }
    return curve;
}

namespace {

const char* kind_name(LocalPredictor::Kind k) {
    return k == LocalPredictor::Kind::linear ? "linear" : "dlinear";
}

LocalPredictor::Kind kind_from(const std::string& s) {
    if (s == "linear") return LocalPredictor::Kind::linear;
    if (s == "dlinear") return LocalPredictor::Kind::dlinear;
    throw DataError("unknown local model kind: " + s);
}

}  // namespace

void save_local(const LocalPredictor& model, const std::string& path, const LocalAdam* adam) {
    nlohmann::json j;
    j["version"] = 1;
    j["kind"] = kind_name(model.kind);
    j["kernel"] = model.kernel;
    if (model.kind == LocalPredictor::Kind::linear) {
        j["head"] = nlohmann::json::parse(mlp_to_json(model.head, adam ? &adam->head : nullptr));
    } else {
        j["trend"] =
            nlohmann::json::parse(mlp_to_json(model.trend_head, adam ? &adam->trend : nullptr));
        j["seasonal"] = nlohmann::json::parse(
            mlp_to_json(model.seasonal_head, adam ? &adam->seasonal : nullptr));
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        out << j.dump(2);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot move checkpoint into place: " + path);
}

LocalPredictor load_local(const std::string& path, LocalAdam* adam) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid local checkpoint: ") + e.what());
    }
    if (j.value("version", 0) != 1) throw DataError("unsupported local checkpoint version");
    LocalPredictor m;
    m.kind = kind_from(j.at("kind").get<std::string>());
    m.kernel = j.at("kernel").get<int>();
    if (m.kind == LocalPredictor::Kind::linear) {
        m.head = mlp_from_json(j.at("head").dump(), adam ? &adam->head : nullptr);
    } else {
        m.trend_head = mlp_from_json(j.at("trend").dump(), adam ? &adam->trend : nullptr);
        m.seasonal_head = mlp_from_json(j.at("seasonal").dump(), adam ? &adam->seasonal : nullptr);
    }
    return m;
}

}  // namespace pfrp
