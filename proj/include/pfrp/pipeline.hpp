#pragma once

#include <string>
#include <vector>

#include "pfrp/analysis.hpp"
#include "pfrp/config.hpp"

namespace pfrp {

// Shared data preparation: load, chronological split, train-split z-score.
struct DataBundle {
    TimeSeries raw;
    SplitRanges ranges;
    Standardizer standardizer;
    std::vector<double> standardized;  // whole series in standardized units
};

DataBundle prepare_data(const RunConfig& cfg);

struct EncoderArtifacts {
    std::string encoder_path;
    std::string loss_csv_path;
};

// Stage 1a: train the lookback encoder, write encoder.json + encoder_loss.csv.
EncoderArtifacts cmd_train_encoder(const RunConfig& cfg);

// Stage 1b: encode train windows, cluster, write bank.gmb. Needs
// cfg.encoder_path.
std::string cmd_build_bank(const RunConfig& cfg);

// Stage 2: joint training of gates, fusion and local model plus the
// standalone baseline local model. Needs cfg.encoder_path and cfg.bank_path.
// Returns the composite manifest path. `resume_manifest` continues a previous
// run including its Adam step counters.
std::string cmd_train(const RunConfig& cfg, const std::string& resume_manifest = "");

struct EvalRow {
    int H = 0;
    double base_mse = 0, base_mae = 0;
    double pfrp_mse = 0, pfrp_mae = 0;
    double impr_mse_pct = 0, impr_mae_pct = 0;
    long base_params = 0, pfrp_params = 0;
    double runtime_sec = 0;  // wall clock; excluded from determinism comparisons
    double mean_w1 = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;  // one per checkpoint/horizon
    EvalRow average;
    bool has_average = false;
};

std::string eval_report_to_json(const EvalReport& report);

// Evaluates checkpoints on their test split, writes report.json, per-horizon
// prediction CSVs, w1 CSVs and optional per-window SVG plots.
EvalReport cmd_eval(const std::vector<std::string>& manifests, const std::string& out_dir,
                    const std::vector<long>& plot_indices = {},
                    const std::string& dataset_override = "");

// Predictions for selected test windows (all when empty); CSV + optional SVGs.
void cmd_predict(const std::string& manifest, const std::vector<long>& indices,
                 const std::string& out_dir, bool plots,
                 const std::string& dataset_override = "");

PeriodicityScore cmd_periodicity(const std::string& csv_path, const std::string& column,
                                 const std::vector<int>& lags, int bins);

}  // namespace pfrp
