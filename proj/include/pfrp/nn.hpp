#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfrp/matrix.hpp"

namespace pfrp {

enum class OutputActivation { identity, sigmoid };

// Fully connected network. Hidden layers use ReLU; only the output activation
// varies. Weight matrix of layer m has shape d_m x d_{m-1}, row-major.
struct MlpModel {
    std::vector<int> layer_dims;  // d0 .. dM
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    OutputActivation output_activation = OutputActivation::identity;

    std::size_t num_layers() const { return weights.size(); }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    long parameter_count() const;
};

// He-uniform weights, zero biases, seeded. With zero_final the last layer's
// weights and biases are zeroed (used by the output and fusion gates so the
// stage-2 graph starts as the identity configuration).
MlpModel init_mlp(const std::vector<int>& layer_dims, OutputActivation out_act,
                  std::uint64_t seed, bool zero_final = false);

struct ForwardCache {
    Matrix input;
    std::vector<Matrix> pre;   // pre-activation per layer
    std::vector<Matrix> post;  // post-activation per layer
};

// batch: B x d0 -> B x dM. The cache, when given, is filled for backward.
Matrix mlp_forward(const MlpModel& model, const Matrix& batch, ForwardCache* cache = nullptr);

struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    void add_scaled(const MlpGrads& other, double scale);
    void zero();
};

MlpGrads zero_grads_like(const MlpModel& model);

// Accumulates parameter gradients into `accum` and returns the gradient with
// respect to the batch input. `upstream` is dLoss/dOutput, B x dM.
Matrix mlp_backward(const MlpModel& model, const ForwardCache& cache, const Matrix& upstream,
                    MlpGrads& accum);

// Numerically stable softmax (max subtraction); outputs sum to 1.
std::vector<double> softmax(const std::vector<double>& v);
void softmax_rows(Matrix& m);
double sigmoid(double x);

struct AdamState {
    long step = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    MlpGrads m, v;
};

AdamState make_adam(const MlpModel& model, double lr);

// Standard bias-corrected Adam update; increments the step counter.
void adam_step(MlpModel& model, const MlpGrads& grads, AdamState& state);

// Flat parameter access in layer order (weights row-major, then biases).
// Used by gradient checks and resumable optimizer state.
std::vector<double> collect_parameters(const MlpModel& model);
void apply_parameters(MlpModel& model, const std::vector<double>& flat);
std::vector<double> collect_grads(const MlpGrads& grads);

// Versioned JSON checkpoints; round trips are bit-exact.
std::string mlp_to_json(const MlpModel& model, const AdamState* adam = nullptr);
MlpModel mlp_from_json(const std::string& text, AdamState* adam = nullptr);
void save_mlp(const MlpModel& model, const std::string& path, const AdamState* adam = nullptr);
MlpModel load_mlp(const std::string& path, AdamState* adam = nullptr);

// FNV-1a hash of the canonical serialization, hex-encoded. Banks record this
// to detect encoder/bank mismatches at serve time.
std::string model_hash(const MlpModel& model);

}  // namespace pfrp
