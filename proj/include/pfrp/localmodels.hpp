#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfrp/nn.hpp"
#include "pfrp/series.hpp"

namespace pfrp {

// Reference local prediction models behind one interface: a direct affine map
// L->H and a decomposition-linear variant with separate trend/seasonal maps.
struct LocalPredictor {
    enum class Kind { linear, dlinear };

    Kind kind = Kind::linear;
    MlpModel head;           // linear: affine L->H
    MlpModel trend_head;     // dlinear
    MlpModel seasonal_head;  // dlinear
    int kernel = 25;         // moving-average kernel, odd

    long parameter_count() const;
};

LocalPredictor init_local(LocalPredictor::Kind kind, int L, int H, int kernel,
                          std::uint64_t seed);

// Centered moving average with edge-replication padding; seasonal = x - trend,
// so the two components reconstruct x exactly.
void moving_average_decompose(const std::vector<double>& x, int kernel,
                              std::vector<double>& trend, std::vector<double>& seasonal);

struct LocalCache {
    ForwardCache head;
    ForwardCache trend;
    ForwardCache seasonal;
};

Matrix local_forward(const LocalPredictor& model, const Matrix& x_batch,
                     LocalCache* cache = nullptr);

struct LocalGrads {
    MlpGrads head, trend, seasonal;
};

LocalGrads zero_local_grads(const LocalPredictor& model);
void local_backward(const LocalPredictor& model, const LocalCache& cache, const Matrix& upstream,
                    LocalGrads& accum);

struct LocalAdam {
    AdamState head, trend, seasonal;
};

LocalAdam make_local_adam(const LocalPredictor& model, double lr);
void local_adam_step(LocalPredictor& model, const LocalGrads& grads, LocalAdam& state);

// Single-window predictions.
std::vector<double> linear_predict(const LocalPredictor& model, const std::vector<double>& x);
std::vector<double> dlinear_predict(const LocalPredictor& model, const std::vector<double>& x);
std::vector<double> local_predict(const LocalPredictor& model, const std::vector<double>& x);

// Minibatch Adam on mean squared error; used for the standalone baseline.
std::vector<double> train_local(const std::vector<WindowSample>& samples, LocalPredictor& model,
                                int epochs, double lr, int batch_size, std::uint64_t seed);

// Checkpoints carry the kind tag plus the underlying MLP payloads.
void save_local(const LocalPredictor& model, const std::string& path,
                const LocalAdam* adam = nullptr);
LocalPredictor load_local(const std::string& path, LocalAdam* adam = nullptr);

}  // namespace pfrp
