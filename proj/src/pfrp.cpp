#include "pfrp/pfrp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "pfrp/altretrieval.hpp"
#include "pfrp/errors.hpp"
#include "pfrp/pcl.hpp"
#include "pfrp/rng.hpp"

namespace pfrp {

std::string criterion_name(RetrievalCriterion c) {
    switch (c) {
        case RetrievalCriterion::feature_cosine: return "feature";
        case RetrievalCriterion::window_mse: return "mse";
        case RetrievalCriterion::window_dtw: return "dtw";
        case RetrievalCriterion::window_pcc: return "pcc";
    }
    return "feature";
}

RetrievalCriterion criterion_from(const std::string& s) {
    if (s == "feature" || s == "feature_cosine") return RetrievalCriterion::feature_cosine;
    if (s == "mse") return RetrievalCriterion::window_mse;
    if (s == "dtw") return RetrievalCriterion::window_dtw;
    if (s == "pcc") return RetrievalCriterion::window_pcc;
    throw ConfigError("unknown retrieval criterion: " + s);
}

void PfrpConfig::validate() const {
    if (k < 1) throw ConfigError("pfrp: k must be at least 1");
    if (H < 1) throw ConfigError("pfrp: H must be positive");
    if (lr <= 0.0) throw ConfigError("pfrp: lr must be positive");
    if (epochs < 0) throw ConfigError("pfrp: epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("pfrp: batch_size must be positive");
    if (confidence_hidden < 1 || output_hidden < 1 || fusion_hidden < 1)
        throw ConfigError("pfrp: gate hidden widths must be positive");
}

namespace {

// Selects the k entries with the largest weights; ties go to the lower index.
std::vector<std::size_t> topk_indices(const std::vector<double>& weights, int k) {
    std::vector<std::size_t> idx(weights.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);
    idx.resize(k);
    return idx;
}

Retrieval finish_retrieval(const MemoryBank& bank, std::vector<double> scores,
                           std::vector<double> weights, int k, int H) {
    Retrieval r;
    r.indices = topk_indices(weights, k);
    for (std::size_t i : r.indices) {
        r.scores.push_back(scores[i]);
        r.weights.push_back(weights[i]);
        r.values.push_back(slice_horizon(bank.horizons[i], H));
    }
    return r;
}

}  // namespace

Retrieval retrieve_topk(const MemoryBank& bank, const std::vector<double>& eps, int k, int H) {
    if (k < 1 || static_cast<std::size_t>(k) > bank.size())
        throw std::invalid_argument("retrieve_topk: k=" + std::to_string(k) +
                                    " outside [1, K=" + std::to_string(bank.size()) + "]");
    if (eps.size() != static_cast<std::size_t>(bank.feature_dim))
        throw std::invalid_argument("retrieve_topk: query dimension mismatch");
    std::vector<double> sims(bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) {
        double dot = 0.0;
        const std::vector<double>& key = bank.features[i];
        for (std::size_t t = 0; t < key.size(); ++t) dot += eps[t] * key[t];
        sims[i] = dot;
    }
    return finish_retrieval(bank, sims, sims, k, H);
}

PfrpComponents init_pfrp(MlpModel encoder, MemoryBank bank, const PfrpConfig& config,
                         LocalPredictor::Kind local_kind, int kernel) {
    config.validate();
    const int L = bank.L;
    const int H = config.H;
    if (H > bank.H_bank)
        throw ConfigError("pfrp: serving horizon " + std::to_string(H) +
                          " exceeds bank horizon " + std::to_string(bank.H_bank));
    if (static_cast<std::size_t>(config.k) > bank.size())
        throw ConfigError("pfrp: k exceeds bank size");

    std::uint64_t sm = config.seed;
    PfrpComponents c;
    c.config = config;
    c.confidence_gate = init_mlp({L + H, config.confidence_hidden, 1}, OutputActivation::sigmoid,
                                 splitmix64_next(sm));
    c.output_gate = init_mlp({L, config.output_hidden, 2 * H}, OutputActivation::identity,
                             splitmix64_next(sm), /*zero_final=*/true);
    c.fusion = init_mlp({config.k, config.fusion_hidden, 2}, OutputActivation::identity,
                        splitmix64_next(sm), /*zero_final=*/true);
    c.local = init_local(local_kind, L, H, kernel, splitmix64_next(sm));
    c.encoder = std::move(encoder);
    c.bank = std::move(bank);
    return c;
}

std::vector<std::string> validate_components(const PfrpComponents& c) {
    const int L = c.bank.L;
    const int H = c.config.H;
    if (c.encoder.input_dim() != L) throw ConfigError("components: encoder input dim != bank L");
    if (c.encoder.output_dim() != c.bank.feature_dim)
        throw ConfigError("components: encoder feature dim != bank feature dim");
    if (H > c.bank.H_bank) throw ConfigError("components: H exceeds bank horizon");
    if (static_cast<std::size_t>(c.config.k) > c.bank.size())
        throw ConfigError("components: k exceeds bank size");
    if (c.confidence_gate.input_dim() != L + H || c.confidence_gate.output_dim() != 1)
        throw ConfigError("components: confidence gate dims must be (L+H)->1");
    if (c.output_gate.input_dim() != L || c.output_gate.output_dim() != 2 * H)
        throw ConfigError("components: output gate dims must be L->2H");
    if (!c.config.no_local_model &&
        (c.fusion.input_dim() != c.config.k || c.fusion.output_dim() != 2))
        throw ConfigError("components: fusion dims must be k->2");
    if (c.config.criterion != RetrievalCriterion::feature_cosine && !c.bank.has_raw())
        throw ConfigError("components: criterion '" + criterion_name(c.config.criterion) +
                          "' needs a bank built with raw windows (--store-raw-x)");

    std::vector<std::string> warnings;
    const std::string h = model_hash(c.encoder);
    if (!c.bank.encoder_hash.empty() && c.bank.encoder_hash != h)
        warnings.push_back("encoder hash " + h + " does not match bank encoder hash " +
                           c.bank.encoder_hash + "; the bank was built with a different encoder");
    return warnings;
}

std::vector<double> confidence_gate_probs(const MlpModel& gate, const std::vector<double>& x,
                                          const std::vector<std::vector<double>>& values) {
    if (values.empty()) throw std::invalid_argument("confidence_gate: no retrieved values");
    const std::size_t L = x.size();
    const std::size_t H = values[0].size();
    if (gate.input_dim() != static_cast<int>(L + H))
        throw std::invalid_argument("confidence_gate: gate input dim != L+H");
    Matrix u(values.size(), L + H);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].size() != H)
            throw std::invalid_argument("confidence_gate: ragged retrieved values");
        std::copy(x.begin(), x.end(), u.row(i));
        std::copy(values[i].begin(), values[i].end(), u.row(i) + L);
    }
    Matrix out = mlp_forward(gate, u);
    return out.data;  // one sigmoid output per row
}

std::vector<double> modulate_weights(const std::vector<double>& raw_weights,
                                     const std::vector<double>& probs) {
    if (raw_weights.size() != probs.size() || raw_weights.empty())
        throw std::invalid_argument("modulate_weights: length mismatch");
    std::vector<double> prod(raw_weights.size());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = raw_weights[i] * probs[i];
    return softmax(prod);
}

GlobalPrediction global_prediction(const std::vector<double>& mod_weights,
                                   const std::vector<std::vector<double>>& values,
                                   const MlpModel& output_gate, const std::vector<double>& x,
                                   bool gate_enabled) {
    if (mod_weights.size() != values.size() || values.empty())
        throw std::invalid_argument("global_prediction: weights/values mismatch");
    const std::size_t H = values[0].size();
    GlobalPrediction g;
    g.y1_bar.assign(H, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t t = 0; t < H; ++t) g.y1_bar[t] += mod_weights[i] * values[i][t];

    if (gate_enabled) {
        if (output_gate.output_dim() != static_cast<int>(2 * H))
            throw std::invalid_argument("global_prediction: output gate dim != 2H");
        Matrix raw = mlp_forward(output_gate, from_row(x));
        g.alpha.assign(H, 0.0);
        g.beta.assign(H, 0.0);
        for (std::size_t t = 0; t < H; ++t) {
            g.alpha[t] = 1.0 + raw.data[t];
            g.beta[t] = raw.data[H + t];
        }
    } else {
        g.alpha.assign(H, 1.0);
        g.beta.assign(H, 0.0);
    }
    g.y1.assign(H, 0.0);
    for (std::size_t t = 0; t < H; ++t) g.y1[t] = g.alpha[t] * g.y1_bar[t] + g.beta[t];
    return g;
}

FusionResult dynamic_fusion(const MlpModel& fusion, const std::vector<double>& mod_weights,
                            const std::vector<double>& y1, const std::vector<double>& y2) {
    if (y1.size() != y2.size()) throw std::invalid_argument("dynamic_fusion: y1/y2 mismatch");
    if (fusion.input_dim() != static_cast<int>(mod_weights.size()))
        throw std::invalid_argument("dynamic_fusion: fusion input dim != k");
    Matrix logits = mlp_forward(fusion, from_row(mod_weights));
    std::vector<double> w = softmax(logits.data);
    FusionResult r;
    r.w1 = w[0];
    r.w2 = w[1];
    r.y.assign(y1.size(), 0.0);
    for (std::size_t t = 0; t < y1.size(); ++t) r.y[t] = r.w1 * y1[t] + r.w2 * y2[t];
    return r;
}

namespace {

Retrieval retrieve_for(const PfrpComponents& c, const std::vector<double>& x) {
    if (c.config.criterion == RetrievalCriterion::feature_cosine)
        return retrieve_topk(c.bank, encode(c.encoder, x), c.config.k, c.config.H);
    return retrieve_topk_by(c.config.criterion, c.bank, c.encoder, x, c.config.k, c.config.H);
}

// Caches for one batched forward pass.
struct Trace {
    Matrix x;                       // B x L
    Matrix values;                  // (B*k) x H
    Matrix raw_weights;             // B x k
    Matrix probs;                   // B x k
    Matrix mod_weights;             // B x k
    Matrix y1_bar;                  // B x H
    Matrix gate_raw;                // B x 2H (empty when gate disabled)
    Matrix alpha;                   // B x H (empty when gate disabled)
    Matrix y1, y2, y;               // B x H
    Matrix fusion_weights;          // B x 2
    ForwardCache conf_cache, out_cache, fusion_cache;
    LocalCache local_cache;
};

Matrix forward_core(const PfrpComponents& c, const Matrix& x, const std::vector<Retrieval>& retr,
                    Trace* trace) {
    const std::size_t B = x.rows;
    const auto k = static_cast<std::size_t>(c.config.k);
    const auto H = static_cast<std::size_t>(c.config.H);
    const std::size_t L = x.cols;

    Matrix values(B * k, H);
    Matrix raw_w(B, k);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t i = 0; i < k; ++i) {
            std::copy(retr[b].values[i].begin(), retr[b].values[i].end(), values.row(b * k + i));
            raw_w(b, i) = retr[b].weights[i];
        }
    }

    Matrix probs(B, k, 1.0);
    ForwardCache conf_cache;
    if (!c.config.no_confidence_gate) {
        Matrix u(B * k, L + H);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t i = 0; i < k; ++i) {
                double* dst = u.row(b * k + i);
                std::copy(x.row(b), x.row(b) + L, dst);
                std::copy(values.row(b * k + i), values.row(b * k + i) + H, dst + L);
            }
        }
        Matrix p = mlp_forward(c.confidence_gate, u, trace ? &conf_cache : nullptr);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < k; ++i) probs(b, i) = p(b * k + i, 0);
    }

    Matrix mod = raw_w;
    for (std::size_t t = 0; t < mod.data.size(); ++t) mod.data[t] *= probs.data[t];
    softmax_rows(mod);

    Matrix y1_bar(B, H);
    for (std::size_t b = 0; b < B; ++b) {
        double* dst = y1_bar.row(b);
        for (std::size_t i = 0; i < k; ++i) {
            const double w = mod(b, i);
            const double* v = values.row(b * k + i);
            for (std::size_t t = 0; t < H; ++t) dst[t] += w * v[t];
        }
    }

    Matrix y1 = y1_bar;
    Matrix gate_raw;
    Matrix alpha;
    ForwardCache out_cache;
    if (!c.config.no_output_gate) {
        gate_raw = mlp_forward(c.output_gate, x, trace ? &out_cache : nullptr);
        alpha = Matrix(B, H);
        for (std::size_t b = 0; b < B; ++b) {
            const double* gb = gate_raw.row(b);
            double* ab = alpha.row(b);
            double* yb = y1.row(b);
            const double* bar = y1_bar.row(b);
            for (std::size_t t = 0; t < H; ++t) {
                ab[t] = 1.0 + gb[t];
                yb[t] = ab[t] * bar[t] + gb[H + t];
            }
        }
    }

    Matrix y = y1;
    Matrix y2, fw;
    ForwardCache fusion_cache;
    LocalCache local_cache;
    if (!c.config.no_local_model) {
        y2 = local_forward(c.local, x, trace ? &local_cache : nullptr);
        fw = mlp_forward(c.fusion, mod, trace ? &fusion_cache : nullptr);
        softmax_rows(fw);
        for (std::size_t b = 0; b < B; ++b) {
            const double w1 = fw(b, 0), w2 = fw(b, 1);
            double* yb = y.row(b);
            const double* y1b = y1.row(b);
            const double* y2b = y2.row(b);
            for (std::size_t t = 0; t < H; ++t) yb[t] = w1 * y1b[t] + w2 * y2b[t];
        }
    }

    if (trace) {
        trace->x = x;
        trace->values = std::move(values);
        trace->raw_weights = std::move(raw_w);
        trace->probs = std::move(probs);
        trace->mod_weights = std::move(mod);
        trace->y1_bar = std::move(y1_bar);
        trace->gate_raw = std::move(gate_raw);
        trace->alpha = std::move(alpha);
        trace->y1 = std::move(y1);
        trace->y2 = std::move(y2);
        trace->y = y;
        trace->fusion_weights = std::move(fw);
        trace->conf_cache = std::move(conf_cache);
        trace->out_cache = std::move(out_cache);
        trace->fusion_cache = std::move(fusion_cache);
        trace->local_cache = std::move(local_cache);
    }
    return y;
}

void ensure_grads(const PfrpComponents& c, PfrpGrads& g) {
    if (g.confidence.weights.empty()) g.confidence = zero_grads_like(c.confidence_gate);
    if (g.output.weights.empty()) g.output = zero_grads_like(c.output_gate);
    if (g.fusion.weights.empty()) g.fusion = zero_grads_like(c.fusion);
    if (g.local.head.weights.empty() && g.local.trend.weights.empty())
        g.local = zero_local_grads(c.local);
}

void backward_core(const PfrpComponents& c, const Trace& trace, const Matrix& dy,
                   PfrpGrads& grads) {
    const std::size_t B = dy.rows;
    const auto k = static_cast<std::size_t>(c.config.k);
    const auto H = static_cast<std::size_t>(c.config.H);
    ensure_grads(c, grads);

    Matrix dy1(B, H);
    Matrix dmod(B, k);

    if (!c.config.no_local_model) {
        Matrix dy2(B, H);
        Matrix dlogits(B, 2);
        for (std::size_t b = 0; b < B; ++b) {
            const double w1 = trace.fusion_weights(b, 0);
            const double w2 = trace.fusion_weights(b, 1);
            double dw1 = 0.0, dw2 = 0.0;
            const double* dyb = dy.row(b);
            const double* y1b = trace.y1.row(b);
            const double* y2b = trace.y2.row(b);
            for (std::size_t t = 0; t < H; ++t) {
                dw1 += dyb[t] * y1b[t];
                dw2 += dyb[t] * y2b[t];
                dy1(b, t) = w1 * dyb[t];
                dy2(b, t) = w2 * dyb[t];
            }
            // softmax backward on the two fusion logits
            const double inner = w1 * dw1 + w2 * dw2;
            dlogits(b, 0) = w1 * (dw1 - inner);
            dlogits(b, 1) = w2 * (dw2 - inner);
        }
        Matrix dmod_fusion = mlp_backward(c.fusion, trace.fusion_cache, dlogits, grads.fusion);
        dmod = std::move(dmod_fusion);
        local_backward(c.local, trace.local_cache, dy2, grads.local);
    } else {
        dy1 = dy;
    }

    Matrix dy1_bar(B, H);
    if (!c.config.no_output_gate) {
        Matrix dg(B, 2 * H);
        for (std::size_t b = 0; b < B; ++b) {
            const double* dy1b = dy1.row(b);
            const double* bar = trace.y1_bar.row(b);
            const double* ab = trace.alpha.row(b);
            double* dgb = dg.row(b);
            for (std::size_t t = 0; t < H; ++t) {
                dgb[t] = dy1b[t] * bar[t];      // d alpha
                dgb[H + t] = dy1b[t];           // d beta
                dy1_bar(b, t) = dy1b[t] * ab[t];
            }
        }
        mlp_backward(c.output_gate, trace.out_cache, dg, grads.output);
    } else {
        dy1_bar = dy1;
    }

    // through the weighted sum of retrieved values
    for (std::size_t b = 0; b < B; ++b) {
        const double* dbar = dy1_bar.row(b);
        for (std::size_t i = 0; i < k; ++i) {
            const double* v = trace.values.row(b * k + i);
            double acc = 0.0;
            for (std::size_t t = 0; t < H; ++t) acc += dbar[t] * v[t];
            dmod(b, i) += acc;
        }
    }

    // softmax backward, then the constant raw weights scale the probabilities
    Matrix dprod(B, k);
    for (std::size_t b = 0; b < B; ++b) {
        const double* wb = trace.mod_weights.row(b);
        const double* db = dmod.row(b);
        double inner = 0.0;
        for (std::size_t i = 0; i < k; ++i) inner += wb[i] * db[i];
        for (std::size_t i = 0; i < k; ++i) dprod(b, i) = wb[i] * (db[i] - inner);
    }

    if (!c.config.no_confidence_gate) {
        Matrix dp(B * k, 1);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < k; ++i)
                dp(b * k + i, 0) = dprod(b, i) * trace.raw_weights(b, i);
        mlp_backward(c.confidence_gate, trace.conf_cache, dp, grads.confidence);
    }
}

std::vector<Retrieval> retrieve_batch(const PfrpComponents& c, const Matrix& x) {
    std::vector<Retrieval> out(x.rows);
    if (c.config.criterion == RetrievalCriterion::feature_cosine) {
        Matrix feats = encode(c.encoder, x);
        std::vector<double> eps(feats.cols);
        for (std::size_t b = 0; b < x.rows; ++b) {
            eps.assign(feats.row(b), feats.row(b) + feats.cols);
            out[b] = retrieve_topk(c.bank, eps, c.config.k, c.config.H);
        }
    } else {
        std::vector<double> row(x.cols);
        for (std::size_t b = 0; b < x.rows; ++b) {
            row.assign(x.row(b), x.row(b) + x.cols);
            out[b] = retrieve_topk_by(c.config.criterion, c.bank, c.encoder, row, c.config.k,
                                      c.config.H);
        }
    }
    return out;
}

PfrpPrediction record_from_trace(const PfrpComponents& c, const Trace& trace,
                                 const std::vector<Retrieval>& retr, std::size_t b) {
    const auto k = static_cast<std::size_t>(c.config.k);
    const auto H = static_cast<std::size_t>(c.config.H);
    PfrpPrediction r;
    r.indices = retr[b].indices;
    r.raw_weights.assign(trace.raw_weights.row(b), trace.raw_weights.row(b) + k);
    r.confidences.assign(trace.probs.row(b), trace.probs.row(b) + k);
    r.mod_weights.assign(trace.mod_weights.row(b), trace.mod_weights.row(b) + k);
    r.y1_bar.assign(trace.y1_bar.row(b), trace.y1_bar.row(b) + H);
    if (!c.config.no_output_gate) {
        r.alpha.assign(trace.alpha.row(b), trace.alpha.row(b) + H);
        r.beta.assign(trace.gate_raw.row(b) + H, trace.gate_raw.row(b) + 2 * H);
    } else {
        r.alpha.assign(H, 1.0);
        r.beta.assign(H, 0.0);
    }
    r.y1.assign(trace.y1.row(b), trace.y1.row(b) + H);
    if (!c.config.no_local_model) {
        r.y2.assign(trace.y2.row(b), trace.y2.row(b) + H);
        r.w1 = trace.fusion_weights(b, 0);
        r.w2 = trace.fusion_weights(b, 1);
    } else {
        r.w1 = 1.0;
        r.w2 = 0.0;
    }
    r.y.assign(trace.y.row(b), trace.y.row(b) + H);
    return r;
}

}  // namespace

PfrpPrediction pfrp_forward(const PfrpComponents& c, const std::vector<double>& x) {
    if (x.size() != static_cast<std::size_t>(c.bank.L))
        throw std::invalid_argument("pfrp_forward: lookback length != bank L");
    const Retrieval retr = retrieve_for(c, x);

    PfrpPrediction r;
    r.indices = retr.indices;
    r.raw_weights = retr.weights;
    r.confidences = c.config.no_confidence_gate
                        ? std::vector<double>(retr.values.size(), 1.0)
                        : confidence_gate_probs(c.confidence_gate, x, retr.values);
    r.mod_weights = modulate_weights(r.raw_weights, r.confidences);
    GlobalPrediction g = global_prediction(r.mod_weights, retr.values, c.output_gate, x,
                                           !c.config.no_output_gate);
    r.y1_bar = std::move(g.y1_bar);
    r.alpha = std::move(g.alpha);
    r.beta = std::move(g.beta);
    r.y1 = std::move(g.y1);
    if (c.config.no_local_model) {
        r.w1 = 1.0;
        r.w2 = 0.0;
        r.y = r.y1;
    } else {
        r.y2 = local_predict(c.local, x);
        FusionResult f = dynamic_fusion(c.fusion, r.mod_weights, r.y1, r.y2);
        r.w1 = f.w1;
        r.w2 = f.w2;
        r.y = std::move(f.y);
    }
    return r;
}

std::vector<PfrpPrediction> predict_windows(const PfrpComponents& c,
                                            const std::vector<WindowSample>& samples) {
    std::vector<PfrpPrediction> out;
    out.reserve(samples.size());
    const std::size_t chunk = 256;
    const auto L = static_cast<std::size_t>(c.bank.L);
    for (std::size_t from = 0; from < samples.size(); from += chunk) {
        const std::size_t count = std::min(chunk, samples.size() - from);
        Matrix x(count, L);
        for (std::size_t b = 0; b < count; ++b) {
            if (samples[from + b].x.size() != L)
                throw std::invalid_argument("predict_windows: lookback length != bank L");
            std::copy(samples[from + b].x.begin(), samples[from + b].x.end(), x.row(b));
        }
        std::vector<Retrieval> retr = retrieve_batch(c, x);
        Trace trace;
        forward_core(c, x, retr, &trace);
        for (std::size_t b = 0; b < count; ++b) out.push_back(record_from_trace(c, trace, retr, b));
    }
    return out;
}

double pfrp_batch_loss(const PfrpComponents& c, const std::vector<WindowSample>& batch,
                       PfrpGrads* grads) {
    if (batch.empty()) throw std::invalid_argument("pfrp_batch_loss: empty batch");
    const auto L = static_cast<std::size_t>(c.bank.L);
    const auto H = static_cast<std::size_t>(c.config.H);
    Matrix x(batch.size(), L), ytrue(batch.size(), H);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::copy(batch[b].x.begin(), batch[b].x.end(), x.row(b));
        std::copy(batch[b].y.begin(), batch[b].y.end(), ytrue.row(b));
    }
    std::vector<Retrieval> retr = retrieve_batch(c, x);
    Trace trace;
    Matrix y = forward_core(c, x, retr, grads ? &trace : nullptr);

    double loss = 0.0;
    Matrix dy(y.rows, y.cols);
    const double scale = 1.0 / static_cast<double>(y.data.size());
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double d = y.data[i] - ytrue.data[i];
        loss += d * d * scale;
        dy.data[i] = 2.0 * d * scale;
    }
    if (grads) backward_core(c, trace, dy, *grads);
    return loss;
}

PfrpAdamStates make_pfrp_adam(const PfrpComponents& c) {
    PfrpAdamStates s;
    s.confidence = make_adam(c.confidence_gate, c.config.lr);
    s.output = make_adam(c.output_gate, c.config.lr);
    s.fusion = make_adam(c.fusion, c.config.lr);
    s.local = make_local_adam(c.local, c.config.lr);
    return s;
}

TrainPfrpResult train_pfrp(const std::vector<WindowSample>& samples, PfrpComponents& c,
                           bool train_local_model, PfrpAdamStates* states) {
    if (samples.empty()) throw DataError("train_pfrp: empty training set");
    validate_components(c);
    const auto L = static_cast<std::size_t>(c.bank.L);
    const auto H = static_cast<std::size_t>(c.config.H);
    for (const auto& s : samples)
        if (s.x.size() != L || s.y.size() != H)
            throw std::invalid_argument("train_pfrp: sample dims do not match L/H");

    // Retrieval is frozen, so indices/weights are computed once up front.
    std::vector<Retrieval> all_retr(samples.size());
    {
        const std::size_t chunk = 1024;
        for (std::size_t from = 0; from < samples.size(); from += chunk) {
            const std::size_t count = std::min(chunk, samples.size() - from);
            Matrix x(count, L);
            for (std::size_t b = 0; b < count; ++b)
                std::copy(samples[from + b].x.begin(), samples[from + b].x.end(), x.row(b));
            std::vector<Retrieval> r = retrieve_batch(c, x);
            for (std::size_t b = 0; b < count; ++b) all_retr[from + b] = std::move(r[b]);
        }
    }

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    const auto B = static_cast<std::size_t>(c.config.batch_size);

    auto run_epoch = [&](bool optimize, AdamState* conf_opt, AdamState* out_opt,
                         AdamState* fusion_opt, LocalAdam* local_opt) {
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t from = 0; from < order.size(); from += B) {
            const std::size_t count = std::min(B, order.size() - from);
            Matrix x(count, L), ytrue(count, H);
            std::vector<Retrieval> retr(count);
            for (std::size_t b = 0; b < count; ++b) {
                const WindowSample& s = samples[order[from + b]];
                std::copy(s.x.begin(), s.x.end(), x.row(b));
                std::copy(s.y.begin(), s.y.end(), ytrue.row(b));
                retr[b] = all_retr[order[from + b]];
            }
            Trace trace;
            Matrix y = forward_core(c, x, retr, optimize ? &trace : nullptr);
            double loss = 0.0;
            Matrix dy(y.rows, y.cols);
            const double scale = 1.0 / static_cast<double>(y.data.size());
            for (std::size_t i = 0; i < y.data.size(); ++i) {
                const double d = y.data[i] - ytrue.data[i];
                loss += d * d * scale;
                dy.data[i] = 2.0 * d * scale;
            }
            if (!std::isfinite(loss)) throw NumericError("pfrp training loss is not finite");
            loss_sum += loss;
            ++batches;
            if (optimize) {
                PfrpGrads grads;
                backward_core(c, trace, dy, grads);
                if (!c.config.no_confidence_gate)
                    adam_step(c.confidence_gate, grads.confidence, *conf_opt);
                if (!c.config.no_output_gate) adam_step(c.output_gate, grads.output, *out_opt);
                if (!c.config.no_local_model) {
                    adam_step(c.fusion, grads.fusion, *fusion_opt);
                    if (train_local_model) local_adam_step(c.local, grads.local, *local_opt);
                }
            }
        }
        return batches ? loss_sum / static_cast<double>(batches) : 0.0;
    };

    TrainPfrpResult result;
    result.epoch_losses.push_back(run_epoch(false, nullptr, nullptr, nullptr, nullptr));

    PfrpAdamStates fresh;
    if (!states) {
        fresh = make_pfrp_adam(c);
        states = &fresh;
    }
    // lr is a config property; the moment buffers and step counters carry over
    states->confidence.lr = c.config.lr;
    states->output.lr = c.config.lr;
    states->fusion.lr = c.config.lr;
    states->local.head.lr = c.config.lr;
    states->local.trend.lr = c.config.lr;
    states->local.seasonal.lr = c.config.lr;

    Rng rng(c.config.seed ^ 0x8f14e45fceea167aULL);
    for (int e = 0; e < c.config.epochs; ++e) {
        rng.shuffle(order);
        result.epoch_losses.push_back(run_epoch(true, &states->confidence, &states->output,
                                                &states->fusion, &states->local));
    }
    return result;
}

namespace {

nlohmann::json config_to_json(const PfrpConfig& cfg) {
    nlohmann::json j;
    j["k"] = cfg.k;
    j["H"] = cfg.H;
    j["confidence_hidden"] = cfg.confidence_hidden;
    j["output_hidden"] = cfg.output_hidden;
    j["fusion_hidden"] = cfg.fusion_hidden;
    j["lr"] = cfg.lr;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["no_confidence_gate"] = cfg.no_confidence_gate;
    j["no_output_gate"] = cfg.no_output_gate;
    j["no_local_model"] = cfg.no_local_model;
    j["criterion"] = criterion_name(cfg.criterion);
    return j;
}

PfrpConfig config_from_json(const nlohmann::json& j) {
    PfrpConfig cfg;
    cfg.k = j.at("k").get<int>();
    cfg.H = j.at("H").get<int>();
    cfg.confidence_hidden = j.at("confidence_hidden").get<int>();
    cfg.output_hidden = j.at("output_hidden").get<int>();
    cfg.fusion_hidden = j.at("fusion_hidden").get<int>();
    cfg.lr = j.at("lr").get<double>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.no_confidence_gate = j.at("no_confidence_gate").get<bool>();
    cfg.no_output_gate = j.at("no_output_gate").get<bool>();
    cfg.no_local_model = j.at("no_local_model").get<bool>();
    cfg.criterion = criterion_from(j.at("criterion").get<std::string>());
    return cfg;
}

}  // namespace

void save_composite(const PfrpComponents& c, const std::string& dir,
                    const std::string& encoder_path, const std::string& bank_path,
                    const AdamState* conf_adam, const AdamState* out_adam,
                    const AdamState* fusion_adam, const LocalAdam* local_adam,
                    const std::string& extra_manifest_json) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_mlp(c.confidence_gate, (fs::path(dir) / "confidence_gate.json").string(), conf_adam);
    save_mlp(c.output_gate, (fs::path(dir) / "output_gate.json").string(), out_adam);
    save_mlp(c.fusion, (fs::path(dir) / "fusion.json").string(), fusion_adam);
    save_local(c.local, (fs::path(dir) / "local.json").string(), local_adam);

    nlohmann::json j;
    j["version"] = 1;
    j["encoder"] = encoder_path;
    j["encoder_hash"] = model_hash(c.encoder);
    j["bank"] = bank_path;
    j["confidence_gate"] = "confidence_gate.json";
    j["output_gate"] = "output_gate.json";
    j["fusion"] = "fusion.json";
    j["local"] = "local.json";
    j["config"] = config_to_json(c.config);
    if (!extra_manifest_json.empty()) j["extra"] = nlohmann::json::parse(extra_manifest_json);

    const fs::path manifest = fs::path(dir) / "composite.json";
    const std::string tmp = manifest.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        out << j.dump(2);
    }
    if (std::rename(tmp.c_str(), manifest.string().c_str()) != 0)
        throw DataError("cannot move manifest into place");
}

PfrpComponents load_composite(const std::string& manifest_path, std::string* extra_json,
                              AdamState* conf_adam, AdamState* out_adam, AdamState* fusion_adam,
                              LocalAdam* local_adam) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw DataError("cannot open composite manifest: " + manifest_path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid composite manifest: ") + e.what());
    }
    if (j.value("version", 0) != 1) throw DataError("unsupported composite version");

    const fs::path base = fs::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& p) {
        return fs::path(p).is_absolute() ? p : (base / p).string();
    };

    PfrpComponents c;
    c.config = config_from_json(j.at("config"));
    c.encoder = load_mlp(resolve(j.at("encoder").get<std::string>()));
    c.bank = load_bank(resolve(j.at("bank").get<std::string>()));
    c.confidence_gate = load_mlp(resolve(j.at("confidence_gate").get<std::string>()), conf_adam);
    c.output_gate = load_mlp(resolve(j.at("output_gate").get<std::string>()), out_adam);
    c.fusion = load_mlp(resolve(j.at("fusion").get<std::string>()), fusion_adam);
    c.local = load_local(resolve(j.at("local").get<std::string>()), local_adam);
    if (extra_json) *extra_json = j.contains("extra") ? j.at("extra").dump() : "";
    return c;
}

}  // namespace pfrp
