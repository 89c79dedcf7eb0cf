#include "pfrp/pcl.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pfrp/errors.hpp"
#include "pfrp/rng.hpp"

namespace pfrp {

void EncoderConfig::validate() const {
    if (L < 1) throw ConfigError("encoder: L must be positive");
    if (feature_dim < 1) throw ConfigError("encoder: feature_dim must be positive");
    if (tau <= 0.0) throw ConfigError("encoder: tau must be positive");
    if (batch_size < 3) throw ConfigError("encoder: batch_size must be at least 3");
    if (overlap_threshold < 0 || overlap_threshold > L)
        throw ConfigError("encoder: overlap_threshold must lie in [0, L]");
    if (lr <= 0.0) throw ConfigError("encoder: lr must be positive");
    if (epochs < 0) throw ConfigError("encoder: epochs must be non-negative");
}

namespace {

std::optional<std::size_t> select_positive_impl(const std::vector<WindowSample>& batch,
                                                std::size_t i, int overlap_threshold,
                                                bool by_horizon) {
    if (batch.size() < 2) throw std::invalid_argument("select_positive: batch size < 2");
    const std::size_t L = batch[i].x.size();
    const auto min_gap = static_cast<long>(L) - static_cast<long>(overlap_threshold);

    std::optional<std::size_t> best;
    double best_dist = 0.0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
        if (j == i) continue;
        const long gap = std::labs(static_cast<long>(batch[i].start_index) -
                                   static_cast<long>(batch[j].start_index));
        if (gap < min_gap) continue;  // windows share > overlap_threshold timestamps
        const std::vector<double>& a = by_horizon ? batch[i].y : batch[i].x;
        const std::vector<double>& b = by_horizon ? batch[j].y : batch[j].x;
        double dist = 0.0;
        for (std::size_t t = 0; t < a.size(); ++t) {
            const double d = a[t] - b[t];
            dist += d * d;
        }
        if (!best || dist < best_dist) {
            best = j;
            best_dist = dist;
        }
    }
    return best;
}

}  // namespace

std::optional<std::size_t> select_positive(const std::vector<WindowSample>& batch, std::size_t i,
                                           int overlap_threshold) {
    return select_positive_impl(batch, i, overlap_threshold, true);
}

std::optional<std::size_t> select_positive_by_lookback(const std::vector<WindowSample>& batch,
                                                       std::size_t i, int overlap_threshold) {
    return select_positive_impl(batch, i, overlap_threshold, false);
}

PclLossResult pcl_loss(const Matrix& features,
                       const std::vector<std::optional<std::size_t>>& positives, double tau) {
    const std::size_t B = features.rows;
    if (positives.size() != B) throw std::invalid_argument("pcl_loss: positives size mismatch");
    if (tau <= 0.0) throw std::invalid_argument("pcl_loss: tau must be positive");

    PclLossResult result;
    result.feature_grads = Matrix(B, features.cols);

    // s[i][j] = f_i . f_j
    Matrix sims = matmul_nt(features, features);
    Matrix dsims(B, B);

    double loss = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < B; ++i) {
        if (!positives[i]) continue;
        const std::size_t pos = *positives[i];
        if (pos >= B || pos == i) throw std::invalid_argument("pcl_loss: bad positive index");
        ++used;

        // log-sum-exp over j != i with max subtraction
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < B; ++j)
            if (j != i && sims(i, j) / tau > mx) mx = sims(i, j) / tau;
        double denom = 0.0;
        for (std::size_t j = 0; j < B; ++j)
            if (j != i) denom += std::exp(sims(i, j) / tau - mx);
        const double lse = mx + std::log(denom);
        loss += -(sims(i, pos) / tau) + lse;

        // d loss_i / d s_ij
        for (std::size_t j = 0; j < B; ++j) {
            if (j == i) continue;
            double g = std::exp(sims(i, j) / tau - mx) / denom / tau;
            if (j == pos) g -= 1.0 / tau;
            dsims(i, j) = g;
        }
    }
    if (used == 0) throw NumericError("pcl_loss: no row has an eligible positive");

    const double inv_used = 1.0 / static_cast<double>(used);
    loss *= inv_used;

    // s_ij = f_i . f_j contributes to both df_i and df_j
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = 0; j < B; ++j) {
            const double g = dsims(i, j) * inv_used;
            if (g == 0.0) continue;
            const double* fj = features.row(j);
            const double* fi = features.row(i);
            double* di = result.feature_grads.row(i);
            double* dj = result.feature_grads.row(j);
            for (std::size_t t = 0; t < features.cols; ++t) {
                di[t] += g * fj[t];
                dj[t] += g * fi[t];
            }
        }
    }

    result.loss = loss;
    result.rows_used = used;
    return result;
}

Matrix normalize_rows(const Matrix& raw, std::vector<double>* norms) {
    Matrix out = raw;
    if (norms) norms->assign(raw.rows, 0.0);
    for (std::size_t i = 0; i < raw.rows; ++i) {
        double* r = out.row(i);
        double sq = 0.0;
        for (std::size_t j = 0; j < raw.cols; ++j) sq += r[j] * r[j];
        const double norm = std::sqrt(sq);
        if (norms) (*norms)[i] = norm;
        if (norm == 0.0) {
            r[0] = 1.0;  // degenerate rule: zero output maps to e1
            for (std::size_t j = 1; j < raw.cols; ++j) r[j] = 0.0;
        } else {
            for (std::size_t j = 0; j < raw.cols; ++j) r[j] /= norm;
        }
    }
    return out;
}

Matrix normalize_rows_backward(const Matrix& normalized, const std::vector<double>& norms,
                               const Matrix& upstream) {
    if (!normalized.same_shape(upstream) || norms.size() != normalized.rows)
        throw std::invalid_argument("normalize_rows_backward: shape mismatch");
    Matrix out(normalized.rows, normalized.cols);
    for (std::size_t i = 0; i < normalized.rows; ++i) {
        const double norm = norms[i];
        double* o = out.row(i);
        if (norm == 0.0) continue;  // degenerate rows pass no gradient
        const double* f = normalized.row(i);
        const double* g = upstream.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < normalized.cols; ++j) dot += f[j] * g[j];
        for (std::size_t j = 0; j < normalized.cols; ++j) o[j] = (g[j] - dot * f[j]) / norm;
    }
    return out;
}

Matrix encode(const MlpModel& encoder, const Matrix& x_batch) {
    return normalize_rows(mlp_forward(encoder, x_batch));
}

std::vector<double> encode(const MlpModel& encoder, const std::vector<double>& x) {
    if (x.size() != static_cast<std::size_t>(encoder.input_dim()))
        throw std::invalid_argument("encode: lookback length " + std::to_string(x.size()) +
                                    " != encoder input dim " +
                                    std::to_string(encoder.input_dim()));
    Matrix out = encode(encoder, from_row(x));
    return std::vector<double>(out.data.begin(), out.data.end());
}

namespace {

Matrix gather_rows(const std::vector<WindowSample>& samples, const std::vector<std::size_t>& idx,
                   std::size_t from, std::size_t count, bool lookback) {
    const std::size_t width = lookback ? samples[0].x.size() : samples[0].y.size();
    Matrix m(count, width);
    for (std::size_t r = 0; r < count; ++r) {
        const WindowSample& s = samples[idx[from + r]];
        const std::vector<double>& src = lookback ? s.x : s.y;
        std::copy(src.begin(), src.end(), m.row(r));
    }
    return m;
}

// One pass over all batches. When `optimize` the encoder is updated in place;
// either way the mean per-batch loss is returned.
double encoder_epoch(MlpModel& encoder, MlpModel* pl_head, const std::vector<WindowSample>& samples,
                     const std::vector<std::size_t>& order, const EncoderConfig& cfg,
                     AdamState* opt, AdamState* head_opt) {
    const std::size_t N = order.size();
    const auto B = static_cast<std::size_t>(cfg.batch_size);
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;

    for (std::size_t from = 0; from < N; from += B) {
        const std::size_t count = std::min(B, N - from);
        Matrix x = gather_rows(samples, order, from, count, true);

        if (cfg.strategy == TrainStrategy::pl) {
            // forecasting-head objective: MSE of head(encoder(x)) vs y
            Matrix y = gather_rows(samples, order, from, count, false);
            ForwardCache enc_cache, head_cache;
            Matrix feat = mlp_forward(encoder, x, &enc_cache);
            Matrix pred = mlp_forward(*pl_head, feat, &head_cache);
            double loss = 0.0;
            Matrix dpred(pred.rows, pred.cols);
            const double scale = 1.0 / static_cast<double>(pred.rows * pred.cols);
            for (std::size_t i = 0; i < pred.data.size(); ++i) {
                const double d = pred.data[i] - y.data[i];
                loss += d * d * scale;
                dpred.data[i] = 2.0 * d * scale;
            }
            if (!std::isfinite(loss)) throw NumericError("encoder training loss is not finite");
            loss_sum += loss;
            ++loss_batches;
            if (opt) {
                MlpGrads head_g = zero_grads_like(*pl_head);
                Matrix dfeat = mlp_backward(*pl_head, head_cache, dpred, head_g);
                MlpGrads enc_g = zero_grads_like(encoder);
                mlp_backward(encoder, enc_cache, dfeat, enc_g);
                adam_step(*pl_head, head_g, *head_opt);
                adam_step(encoder, enc_g, *opt);
            }
            continue;
        }

        if (count < 2) continue;  // cannot form a pair
        std::vector<WindowSample> batch(count);
        for (std::size_t r = 0; r < count; ++r) batch[r] = samples[order[from + r]];

        std::vector<std::optional<std::size_t>> positives(count);
        bool any = false;
        for (std::size_t r = 0; r < count; ++r) {
            positives[r] = cfg.strategy == TrainStrategy::cl
                               ? select_positive_by_lookback(batch, r, cfg.overlap_threshold)
                               : select_positive(batch, r, cfg.overlap_threshold);
            any = any || positives[r].has_value();
        }
        if (!any) continue;  // skip batches with no usable anchor

        ForwardCache cache;
        Matrix raw = mlp_forward(encoder, x, &cache);
        std::vector<double> norms;
        Matrix feat = normalize_rows(raw, &norms);
        PclLossResult r = pcl_loss(feat, positives, cfg.tau);
        if (!std::isfinite(r.loss)) throw NumericError("encoder training loss is not finite");
        loss_sum += r.loss;
        ++loss_batches;

        if (opt) {
            Matrix draw = normalize_rows_backward(feat, norms, r.feature_grads);
            MlpGrads grads = zero_grads_like(encoder);
            mlp_backward(encoder, cache, draw, grads);
            adam_step(encoder, grads, *opt);
        }
    }
    return loss_batches > 0 ? loss_sum / static_cast<double>(loss_batches) : 0.0;
}

}  // namespace

TrainEncoderResult train_encoder(const std::vector<WindowSample>& samples,
                                 const EncoderConfig& cfg) {
    cfg.validate();
    if (samples.size() < static_cast<std::size_t>(cfg.batch_size))
        throw DataError("train_encoder: need at least batch_size samples, have " +
                        std::to_string(samples.size()));
    for (const auto& s : samples)
        if (s.x.size() != static_cast<std::size_t>(cfg.L))
            throw std::invalid_argument("train_encoder: sample lookback length != L");

    std::vector<int> dims;
    dims.push_back(cfg.L);
    for (int h : cfg.hidden) dims.push_back(h);
    dims.push_back(cfg.feature_dim);

    TrainEncoderResult result;
    result.encoder = init_mlp(dims, OutputActivation::identity, cfg.seed);

    MlpModel pl_head;
    AdamState head_opt;
    if (cfg.strategy == TrainStrategy::pl) {
        pl_head = init_mlp({cfg.feature_dim, static_cast<int>(samples[0].y.size())},
                           OutputActivation::identity, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        head_opt = make_adam(pl_head, cfg.lr);
    }

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    // row 0 of the loss curve: evaluation before any update, original order
    result.epoch_losses.push_back(
        encoder_epoch(result.encoder, &pl_head, samples, order, cfg, nullptr, nullptr));

    AdamState opt = make_adam(result.encoder, cfg.lr);
    Rng shuffle_rng(cfg.seed ^ 0xa5a5a5a55a5a5a5aULL);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        result.epoch_losses.push_back(
            encoder_epoch(result.encoder, &pl_head, samples, order, cfg, &opt, &head_opt));
    }
    return result;
}

}  // namespace pfrp
