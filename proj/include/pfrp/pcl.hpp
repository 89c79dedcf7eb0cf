#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pfrp/nn.hpp"
#include "pfrp/series.hpp"

namespace pfrp {

// Encoder training strategies. pcl picks positives by horizon-sequence MSE,
// cl by lookback-sequence MSE, pl trains a forecasting head instead.
enum class TrainStrategy { pcl, cl, pl };

struct EncoderConfig {
    int L = 96;
    int feature_dim = 128;
    std::vector<int> hidden = {256, 256};
    double tau = 0.05;
    int batch_size = 256;
    double lr = 0.001;
    int epochs = 10;
    int overlap_threshold = 48;
    std::uint64_t seed = 0;
    TrainStrategy strategy = TrainStrategy::pcl;

    void validate() const;
};

// Index of the in-batch positive for anchor i: the eligible j != i whose
// horizon sequence minimizes ||y_i - y_j||^2. j is eligible when the two
// lookback windows share at most overlap_threshold timestamps, i.e.
// |start_i - start_j| >= L - overlap_threshold. Ties go to the smallest j;
// returns nullopt when no candidate is eligible.
std::optional<std::size_t> select_positive(const std::vector<WindowSample>& batch, std::size_t i,
                                           int overlap_threshold);

// cl variant: same eligibility, distance measured between lookback windows.
std::optional<std::size_t> select_positive_by_lookback(const std::vector<WindowSample>& batch,
                                                       std::size_t i, int overlap_threshold);

struct PclLossResult {
    double loss = 0.0;
    Matrix feature_grads;      // dLoss/dFeatures, B x d
    std::size_t rows_used = 0; // rows that had a positive
};

// InfoNCE over in-batch similarities. Rows without a positive are excluded
// from the average; errors when no row has one.
PclLossResult pcl_loss(const Matrix& features, const std::vector<std::optional<std::size_t>>& positives,
                       double tau);

// L2-normalizes each row; rows with zero norm map to the basis vector e1.
// norms, when given, receives the pre-normalization row norms for backward.
Matrix normalize_rows(const Matrix& raw, std::vector<double>* norms = nullptr);

// Gradient of row normalization: for f = r/|r|, dr = (df - (f.df) f)/|r|.
// Degenerate rows (norm 0) get zero gradient.
Matrix normalize_rows_backward(const Matrix& normalized, const std::vector<double>& norms,
                               const Matrix& upstream);

// Encoder output, unit-norm per row.
Matrix encode(const MlpModel& encoder, const Matrix& x_batch);
std::vector<double> encode(const MlpModel& encoder, const std::vector<double>& x);

struct TrainEncoderResult {
    MlpModel encoder;
    std::vector<double> epoch_losses;  // epochs+1 entries, index 0 = before training
};

// Trains the lookback encoder. Batches are shuffled per epoch from the seed;
// the run is deterministic given identical inputs and config.
TrainEncoderResult train_encoder(const std::vector<WindowSample>& samples,
                                 const EncoderConfig& config);

}  // namespace pfrp
