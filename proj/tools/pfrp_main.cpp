#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pfrp/errors.hpp"
#include "pfrp/pipeline.hpp"

namespace {

std::vector<long> parse_index_list(const std::string& s) {
    std::vector<long> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t comma = s.find(',', pos);
        const std::string item = s.substr(pos, comma - pos);
        if (!item.empty()) out.push_back(std::stol(item));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::vector<int> parse_lag_list(const std::string& s) {
    std::vector<int> out;
    for (long v : parse_index_list(s)) out.push_back(static_cast<int>(v));
    return out;
}

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
};

pfrp::RunConfig resolve_config(const CommonOpts& common) {
    pfrp::RunConfig cfg;
    if (!common.config_path.empty()) cfg = pfrp::load_run_config(common.config_path);
    for (const std::string& kv : common.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw pfrp::ConfigError("--set expects key=value, got '" + kv + "'");
        pfrp::apply_config_line(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (const char* env_seed = std::getenv("PFRP_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env_seed, &end, 10);
        if (end == env_seed || *end != '\0')
            throw pfrp::ConfigError("PFRP_SEED must be an unsigned integer");
        cfg.seed = v;
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& common) {
    cmd->add_option("--config", common.config_path, "config file (key = value lines)");
    cmd->add_option("--set", common.sets, "override a config key, e.g. --set seed=7")
        ->take_all();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PFRP: retrieval-augmented univariate time-series forecasting"};
    app.require_subcommand(1);

    CommonOpts enc_common, bank_common, train_common;
    std::string train_resume, train_retrieval, train_pretrained;
    bool bank_store_raw = false;
    bool train_no_conf = false, train_no_out = false, train_no_local = false;

    CLI::App* cmd_enc = app.add_subcommand("train-encoder", "stage 1: train the lookback encoder");
    add_common(cmd_enc, enc_common);

    CLI::App* cmd_bank = app.add_subcommand("build-bank", "stage 1: build the global memory bank");
    add_common(cmd_bank, bank_common);
    cmd_bank->add_flag("--store-raw-x", bank_store_raw,
                       "store raw lookback windows (required for mse/dtw/pcc retrieval)");

    CLI::App* cmd_train = app.add_subcommand("train", "stage 2: train gates, fusion and local model");
    add_common(cmd_train, train_common);
    cmd_train->add_option("--resume", train_resume, "composite checkpoint to resume from");
    cmd_train->add_option("--retrieval", train_retrieval,
                          "retrieval criterion: feature, mse, dtw or pcc");
    cmd_train->add_option("--pretrained-local", train_pretrained,
                          "load and freeze this local-model checkpoint");
    cmd_train->add_flag("--no-confidence-gate", train_no_conf, "ablation: fix every p_i to 1");
    cmd_train->add_flag("--no-output-gate", train_no_out, "ablation: fix scale/shift to 1/0");
    cmd_train->add_flag("--no-local-model", train_no_local, "ablation: output the global prediction");

    std::vector<std::string> eval_checkpoints;
    std::string eval_out = "out", eval_plots, eval_dataset;
    CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate checkpoints on the test split");
    cmd_eval->add_option("--checkpoint", eval_checkpoints, "composite manifest(s)")
        ->required()
        ->take_all();
    cmd_eval->add_option("--out", eval_out, "output directory");
    cmd_eval->add_option("--plot-indices", eval_plots, "comma-separated test window indices");
    cmd_eval->add_option("--dataset", eval_dataset, "override the dataset CSV path");

    std::string pred_checkpoint, pred_indices, pred_out = "out", pred_dataset;
    bool pred_plots = false;
    CLI::App* cmd_pred = app.add_subcommand("predict", "predictions for test windows");
    cmd_pred->add_option("--checkpoint", pred_checkpoint, "composite manifest")->required();
    cmd_pred->add_option("--indices", pred_indices, "comma-separated test window indices");
    cmd_pred->add_option("--out", pred_out, "output directory");
    cmd_pred->add_flag("--plots", pred_plots, "also emit per-window SVG charts");
    cmd_pred->add_option("--dataset", pred_dataset, "override the dataset CSV path");

    std::string period_csv, period_column, period_lags, period_freq = "1h";
    int period_bins = 20;
    CLI::App* cmd_period = app.add_subcommand("periodicity", "periodicity score of a CSV series");
    cmd_period->add_option("csv", period_csv, "input CSV file")->required();
    cmd_period->add_option("--column", period_column, "column name or 0-based index");
    cmd_period->add_option("--lags", period_lags, "comma-separated lags (default from --freq)");
    cmd_period->add_option("--freq", period_freq, "sampling frequency: 1h, 15min or 10min");
    cmd_period->add_option("--bins", period_bins, "histogram bins for the entropy term");

    std::string plot_checkpoint, plot_indices, plot_out = "out", plot_dataset;
    CLI::App* cmd_plot = app.add_subcommand("plot", "SVG charts for test windows");
    cmd_plot->add_option("--checkpoint", plot_checkpoint, "composite manifest")->required();
    cmd_plot->add_option("--indices", plot_indices, "comma-separated test window indices");
    cmd_plot->add_option("--out", plot_out, "output directory");
    cmd_plot->add_option("--dataset", plot_dataset, "override the dataset CSV path");

    try {
        app.parse(argc, argv);

        if (cmd_enc->parsed()) {
            pfrp::RunConfig cfg = resolve_config(enc_common);
            pfrp::finalize_config(cfg);
            pfrp::EncoderArtifacts a = pfrp::cmd_train_encoder(cfg);
            std::cout << "encoder: " << a.encoder_path << "\nloss curve: " << a.loss_csv_path
                      << "\n";
        } else if (cmd_bank->parsed()) {
            pfrp::RunConfig cfg = resolve_config(bank_common);
            if (bank_store_raw) cfg.store_raw_x = true;
            pfrp::finalize_config(cfg);
            std::cout << "bank: " << pfrp::cmd_build_bank(cfg) << "\n";
        } else if (cmd_train->parsed()) {
            pfrp::RunConfig cfg = resolve_config(train_common);
            if (!train_retrieval.empty()) cfg.criterion = train_retrieval;
            if (!train_pretrained.empty()) cfg.pretrained_local = train_pretrained;
            if (train_no_conf) cfg.no_confidence_gate = true;
            if (train_no_out) cfg.no_output_gate = true;
            if (train_no_local) cfg.no_local_model = true;
            pfrp::finalize_config(cfg);
            std::cout << "checkpoint: " << pfrp::cmd_train(cfg, train_resume) << "\n";
        } else if (cmd_eval->parsed()) {
            pfrp::EvalReport report = pfrp::cmd_eval(eval_checkpoints, eval_out,
                                                     parse_index_list(eval_plots), eval_dataset);
            std::cout << pfrp::eval_report_to_json(report) << "\n";
        } else if (cmd_pred->parsed()) {
            pfrp::cmd_predict(pred_checkpoint, parse_index_list(pred_indices), pred_out,
                              pred_plots, pred_dataset);
            std::cout << "predictions written to " << pred_out << "\n";
        } else if (cmd_period->parsed()) {
            const std::vector<int> lags =
                period_lags.empty() ? pfrp::default_lags(period_freq) : parse_lag_list(period_lags);
            pfrp::PeriodicityScore s =
                pfrp::cmd_periodicity(period_csv, period_column, lags, period_bins);
            std::cout << "periodicity_score: " << s.score << "\n"
                      << "acf_score (clamped mean): " << s.acf_score << "\n"
                      << "mean_acf: " << s.mean_acf << "\n";
            for (std::size_t i = 0; i < lags.size(); ++i)
                std::cout << "acf[lag=" << lags[i] << "]: " << s.lag_acfs[i] << "\n";
            std::cout << "normalized_entropy: " << s.entropy_norm << "\n"
                      << "inv_entropy: " << s.inv_entropy << "\n";
        } else if (cmd_plot->parsed()) {
            pfrp::cmd_predict(plot_checkpoint, parse_index_list(plot_indices), plot_out, true,
                              plot_dataset);
            std::cout << "plots written to " << plot_out << "\n";
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const pfrp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const pfrp::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const pfrp::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
