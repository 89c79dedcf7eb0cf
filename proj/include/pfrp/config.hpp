#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pfrp/pcl.hpp"
#include "pfrp/pfrp.hpp"
#include "pfrp/series.hpp"

namespace pfrp {

// One run's worth of knobs: dataset, windowing, both training stages and the
// ablation switches. Defaults follow the reference setup (L=96, bank horizon
// 720, stage-1 lr 1e-3 with tau 0.05, stage-2 lr 1e-4).
struct RunConfig {
    std::string dataset;
    std::string column;       // header name or 0-based index; empty = last numeric
    std::string freq = "1h";  // "1h" | "15min" | "10min"
    std::string name;         // defaults to the dataset basename

    int L = 96;
    int H = 96;
    SplitSpec split;  // 7:1:2

    // stage 1
    int feature_dim = 128;
    std::vector<int> encoder_hidden = {256, 256};
    double tau = 0.05;
    int encoder_batch = 256;
    double encoder_lr = 0.001;
    int encoder_epochs = 10;
    int overlap_threshold = 48;
    std::string strategy = "pcl";  // pcl | cl | pl

    // bank
    int K = 0;  // 0 = per-dataset default when the name is known
    int H_bank = 720;
    bool store_raw_x = false;

    // stage 2
    int k = 0;  // 0 = per-dataset default
    std::string criterion = "feature";
    std::string local = "linear";  // linear | dlinear
    int kernel = 25;
    double lr = 1e-4;
    int epochs = 10;
    int batch_size = 256;
    int confidence_hidden = 128;
    int output_hidden = 128;
    int fusion_hidden = 32;
    bool no_confidence_gate = false;
    bool no_output_gate = false;
    bool no_local_model = false;
    std::string pretrained_local;  // path; loads and freezes the local model

    int train_stride = 1;
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    // paths produced by earlier stages, consumed by later ones
    std::string encoder_path;
    std::string bank_path;

    EncoderConfig encoder_config() const;
    PfrpConfig pfrp_config() const;
    LocalPredictor::Kind local_kind() const;
    std::string dataset_name() const;  // explicit name or lowercased basename
};

// Table of per-dataset (K, k) defaults from the reference hyperparameter
// configurations; keyed by lowercase dataset name.
std::optional<std::pair<int, int>> dataset_default_hyperparams(const std::string& name);

// Flat key = value config file: # comments, quoted or bare strings, ints,
// floats, booleans and [a, b, c] arrays.
RunConfig load_run_config(const std::string& path);
void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value);

// Resolves auto K/k from the dataset table and validates ranges.
void finalize_config(RunConfig& cfg);

}  // namespace pfrp
