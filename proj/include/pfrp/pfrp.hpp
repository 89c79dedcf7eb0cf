#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pfrp/gmb.hpp"
#include "pfrp/localmodels.hpp"
#include "pfrp/nn.hpp"
#include "pfrp/series.hpp"

namespace pfrp {

enum class RetrievalCriterion { feature_cosine, window_mse, window_dtw, window_pcc };

std::string criterion_name(RetrievalCriterion c);
RetrievalCriterion criterion_from(const std::string& s);

struct PfrpConfig {
    int k = 10;
    int H = 96;
    int confidence_hidden = 128;
    int output_hidden = 128;
    int fusion_hidden = 32;
    double lr = 1e-4;
    int epochs = 10;
    int batch_size = 256;
    std::uint64_t seed = 0;
    bool no_confidence_gate = false;
    bool no_output_gate = false;
    bool no_local_model = false;
    RetrievalCriterion criterion = RetrievalCriterion::feature_cosine;

    void validate() const;
};

struct Retrieval {
    std::vector<std::size_t> indices;          // descending similarity, ties to lower index
    std::vector<double> scores;                // native criterion scores
    std::vector<double> weights;               // attention weights: score, or -distance
    std::vector<std::vector<double>> values;   // horizon sequences sliced to H
};

// Cosine-similarity top-k over the bank features (the feature criterion).
Retrieval retrieve_topk(const MemoryBank& bank, const std::vector<double>& eps, int k, int H);

// All learnable and frozen pieces of the stage-2 graph. Encoder and bank are
// constants; the two gates, the fusion MLP and the local model train.
struct PfrpComponents {
    MlpModel encoder;
    MemoryBank bank;
    MlpModel confidence_gate;  // (L+H) -> hidden -> 1, sigmoid output
    MlpModel output_gate;      // L -> hidden -> 2H, final layer zero-initialized
    MlpModel fusion;           // k -> hidden -> 2, final layer zero-initialized
    LocalPredictor local;
    PfrpConfig config;
};

PfrpComponents init_pfrp(MlpModel encoder, MemoryBank bank, const PfrpConfig& config,
                         LocalPredictor::Kind local_kind, int kernel);

// Hard dimension errors throw; soft issues (encoder/bank hash mismatch) are
// returned as warnings for the CLI to surface.
std::vector<std::string> validate_components(const PfrpComponents& c);

// Per-query record of the full forward pass.
struct PfrpPrediction {
    std::vector<std::size_t> indices;
    std::vector<double> raw_weights;
    std::vector<double> confidences;
    std::vector<double> mod_weights;
    std::vector<double> y1_bar;
    std::vector<double> alpha, beta;
    std::vector<double> y1;
    std::vector<double> y2;  // empty when the local model is disabled
    double w1 = 1.0, w2 = 0.0;
    std::vector<double> y;
};

// Existence probabilities p_i = sigmoid(MLP([x; value_i])); the k
// concatenations are evaluated as one batch.
std::vector<double> confidence_gate_probs(const MlpModel& gate, const std::vector<double>& x,
                                          const std::vector<std::vector<double>>& values);

// softmax(w .* p)
std::vector<double> modulate_weights(const std::vector<double>& raw_weights,
                                     const std::vector<double>& probs);

struct GlobalPrediction {
    std::vector<double> y1_bar, alpha, beta, y1;
};

// Weighted sum of retrieved values, then the per-step scale/shift emitted by
// the output gate: y1 = alpha .* y1_bar + beta with alpha = 1 + gate_raw.
GlobalPrediction global_prediction(const std::vector<double>& mod_weights,
                                   const std::vector<std::vector<double>>& values,
                                   const MlpModel& output_gate, const std::vector<double>& x,
                                   bool gate_enabled = true);

struct FusionResult {
    double w1 = 0.5, w2 = 0.5;
    std::vector<double> y;
};

FusionResult dynamic_fusion(const MlpModel& fusion, const std::vector<double>& mod_weights,
                            const std::vector<double>& y1, const std::vector<double>& y2);

// Full composition: encode -> retrieve -> confidence gate -> weight
// modulation -> global prediction -> local model -> dynamic fusion.
PfrpPrediction pfrp_forward(const PfrpComponents& c, const std::vector<double>& x);

// Batched inference over many windows (identical math to pfrp_forward).
std::vector<PfrpPrediction> predict_windows(const PfrpComponents& c,
                                            const std::vector<WindowSample>& samples);

struct TrainPfrpResult {
    std::vector<double> epoch_losses;  // epochs+1 entries, index 0 = before training
};

// Optimizer states for all stage-2 trainables; pass a loaded set to resume
// training with its Adam step counters.
struct PfrpAdamStates {
    AdamState confidence, output, fusion;
    LocalAdam local;
};

PfrpAdamStates make_pfrp_adam(const PfrpComponents& c);

// Stage-2 training: Adam on mean squared error of the fused prediction.
// Retrieval indices and similarities are constants (encoder and bank frozen);
// gradients flow through the gates, the fusion MLP and, unless frozen, the
// local model. Deterministic given the config seed.
TrainPfrpResult train_pfrp(const std::vector<WindowSample>& samples, PfrpComponents& c,
                           bool train_local_model = true, PfrpAdamStates* states = nullptr);

// Gradients of the stage-2 trainables for one batch; exposed for the
// finite-difference checks.
struct PfrpGrads {
    MlpGrads confidence, output, fusion;
    LocalGrads local;
};

double pfrp_batch_loss(const PfrpComponents& c, const std::vector<WindowSample>& batch,
                       PfrpGrads* grads = nullptr);

// Composite checkpoint: manifest JSON referencing the stage-1 artifacts and
// the per-component checkpoints next to it.
struct CompositePaths {
    std::string manifest;
};

void save_composite(const PfrpComponents& c, const std::string& dir,
                    const std::string& encoder_path, const std::string& bank_path,
                    const AdamState* conf_adam = nullptr, const AdamState* out_adam = nullptr,
                    const AdamState* fusion_adam = nullptr, const LocalAdam* local_adam = nullptr,
                    const std::string& extra_manifest_json = "");
PfrpComponents load_composite(const std::string& manifest_path, std::string* extra_json = nullptr,
                              AdamState* conf_adam = nullptr, AdamState* out_adam = nullptr,
                              AdamState* fusion_adam = nullptr, LocalAdam* local_adam = nullptr);

}  // namespace pfrp
