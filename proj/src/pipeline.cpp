#include "pfrp/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"
#include "pfrp/errors.hpp"
#include "pfrp/rng.hpp"
#include "pfrp/svg.hpp"

namespace fs = std::filesystem;

namespace pfrp {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        out << text;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot move file into place: " + path);
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
    std::string text = "epoch,mean_loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i)
        text += std::to_string(i) + "," + g17(losses[i]) + "\n";
    write_text_atomic(path, text);
}

}  // namespace

DataBundle prepare_data(const RunConfig& cfg) {
    DataBundle d;
    d.raw = load_csv(cfg.dataset, cfg.column.empty()
                                      ? std::optional<std::string>{}
                                      : std::optional<std::string>{cfg.column});
    d.raw.freq_label = cfg.freq;
    d.raw.name = cfg.dataset_name();
    d.ranges = chronological_split(d.raw, cfg.split);
    d.standardizer = fit_standardizer(d.raw.values, d.ranges.train);
    d.standardized = d.standardizer.apply(d.raw.values);
    return d;
}

EncoderArtifacts cmd_train_encoder(const RunConfig& cfg) {
    DataBundle data = prepare_data(cfg);
    // stage-1 windows carry the full bank horizon so PCL positives and the
    // bank are built from the same sample set
    std::vector<WindowSample> samples = make_windows(data.standardized, data.ranges.train, cfg.L,
                                                     cfg.H_bank, cfg.train_stride);
    TrainEncoderResult r = train_encoder(samples, cfg.encoder_config());

    fs::create_directories(cfg.out_dir);
    EncoderArtifacts a;
    a.encoder_path = (fs::path(cfg.out_dir) / "encoder.json").string();
    a.loss_csv_path = (fs::path(cfg.out_dir) / "encoder_loss.csv").string();
    save_mlp(r.encoder, a.encoder_path);
    write_loss_csv(a.loss_csv_path, r.epoch_losses);
    return a;
}

std::string cmd_build_bank(const RunConfig& cfg) {
    if (cfg.encoder_path.empty()) throw ConfigError("build-bank: encoder path is required");
    DataBundle data = prepare_data(cfg);
    MlpModel encoder = load_mlp(cfg.encoder_path);
    std::vector<WindowSample> samples = make_windows(data.standardized, data.ranges.train, cfg.L,
                                                     cfg.H_bank, cfg.train_stride);
    if (samples.size() < static_cast<std::size_t>(cfg.K))
        throw ConfigError("build-bank: K=" + std::to_string(cfg.K) + " exceeds " +
                          std::to_string(samples.size()) + " train windows");
    MemoryBank bank = build_bank(encoder, samples, static_cast<std::size_t>(cfg.K), cfg.seed,
                                 cfg.store_raw_x, cfg.dataset_name());
    fs::create_directories(cfg.out_dir);
    const std::string path = (fs::path(cfg.out_dir) / "bank.gmb").string();
    save_bank(bank, path);
    return path;
}

namespace {

nlohmann::json extra_manifest(const RunConfig& cfg, const DataBundle& data) {
    nlohmann::json e;
    e["dataset"] = cfg.dataset;
    e["column"] = cfg.column;
    e["freq"] = cfg.freq;
    e["name"] = cfg.dataset_name();
    e["split"] = {{"train", cfg.split.train_ratio},
                  {"val", cfg.split.val_ratio},
                  {"test", cfg.split.test_ratio}};
    e["standardizer"] = {{"mean", data.standardizer.mean}, {"std", data.standardizer.std}};
    e["L"] = cfg.L;
    e["train_stride"] = cfg.train_stride;
    e["local_kind"] = cfg.local;
    e["kernel"] = cfg.kernel;
    e["baseline_local"] = "baseline_local.json";
    return e;
}

}  // namespace

std::string cmd_train(const RunConfig& cfg, const std::string& resume_manifest) {
    DataBundle data = prepare_data(cfg);
    std::vector<WindowSample> samples =
        make_windows(data.standardized, data.ranges.train, cfg.L, cfg.H, cfg.train_stride);

    PfrpComponents c;
    PfrpAdamStates states;
    bool have_states = false;
    if (!resume_manifest.empty()) {
        states.confidence.lr = cfg.lr;
        states.output.lr = cfg.lr;
        states.fusion.lr = cfg.lr;
        c = load_composite(resume_manifest, nullptr, &states.confidence, &states.output,
                           &states.fusion, &states.local);
        c.config = cfg.pfrp_config();  // epochs/lr may differ on resume
        have_states = true;
    } else {
        if (cfg.encoder_path.empty() || cfg.bank_path.empty())
            throw ConfigError("train: encoder and bank paths are required");
        MlpModel encoder = load_mlp(cfg.encoder_path);
        MemoryBank bank = load_bank(cfg.bank_path);
        c = init_pfrp(std::move(encoder), std::move(bank), cfg.pfrp_config(), cfg.local_kind(),
                      cfg.kernel);
    }

    bool train_local_model = true;
    if (!cfg.pretrained_local.empty()) {
        c.local = load_local(cfg.pretrained_local);
        train_local_model = false;
    }

    for (const std::string& w : validate_components(c)) std::cerr << "warning: " << w << "\n";

    if (!have_states) states = make_pfrp_adam(c);
    TrainPfrpResult r = train_pfrp(samples, c, train_local_model, &states);

    // standalone baseline: the same local architecture trained alone
    LocalPredictor baseline;
    if (!cfg.pretrained_local.empty()) {
        baseline = load_local(cfg.pretrained_local);
    } else {
        std::uint64_t sm = cfg.seed ^ 0x6a09e667f3bcc909ULL;
        baseline = init_local(cfg.local_kind(), cfg.L, cfg.H, cfg.kernel, splitmix64_next(sm));
        train_local(samples, baseline, cfg.epochs, cfg.lr, cfg.batch_size, cfg.seed);
    }

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    // keep the checkpoint directory self-contained
    if (resume_manifest.empty()) {
        auto copy_in = [&](const std::string& src, const fs::path& dst) {
            if (fs::exists(dst) && fs::equivalent(src, dst)) return;
            fs::copy_file(src, dst, fs::copy_options::overwrite_existing);
        };
        copy_in(cfg.encoder_path, dir / "encoder.json");
        copy_in(cfg.bank_path, dir / "bank.gmb");
    } else {
        save_mlp(c.encoder, (dir / "encoder.json").string());
        save_bank(c.bank, (dir / "bank.gmb").string());
    }
    save_local(baseline, (dir / "baseline_local.json").string());
    write_loss_csv((dir / "train_loss.csv").string(), r.epoch_losses);
    save_composite(c, cfg.out_dir, "encoder.json", "bank.gmb", &states.confidence, &states.output,
                   &states.fusion, &states.local, extra_manifest(cfg, data).dump());
    return (dir / "composite.json").string();
}

namespace {

struct LoadedCheckpoint {
    PfrpComponents components;
    LocalPredictor baseline;
    DataBundle data;
    nlohmann::json extra;
};

LoadedCheckpoint load_for_eval(const std::string& manifest, const std::string& dataset_override) {
    LoadedCheckpoint lc;
    std::string extra_text;
    lc.components = load_composite(manifest, &extra_text);
    if (extra_text.empty())
        throw DataError("composite manifest lacks dataset metadata: " + manifest);
    lc.extra = nlohmann::json::parse(extra_text);

    for (const std::string& w : validate_components(lc.components))
        std::cerr << "warning: " << w << "\n";

    const fs::path base = fs::path(manifest).parent_path();
    const std::string baseline_ref = lc.extra.at("baseline_local").get<std::string>();
    lc.baseline = load_local(fs::path(baseline_ref).is_absolute()
                                 ? baseline_ref
                                 : (base / baseline_ref).string());

    RunConfig data_cfg;
    data_cfg.dataset =
        dataset_override.empty() ? lc.extra.at("dataset").get<std::string>() : dataset_override;
    data_cfg.column = lc.extra.at("column").get<std::string>();
    data_cfg.freq = lc.extra.at("freq").get<std::string>();
    data_cfg.name = lc.extra.at("name").get<std::string>();
    data_cfg.split.train_ratio = lc.extra.at("split").at("train").get<double>();
    data_cfg.split.val_ratio = lc.extra.at("split").at("val").get<double>();
    data_cfg.split.test_ratio = lc.extra.at("split").at("test").get<double>();
    lc.data.raw = load_csv(data_cfg.dataset, data_cfg.column.empty()
                                                 ? std::optional<std::string>{}
                                                 : std::optional<std::string>{data_cfg.column});
    lc.data.ranges = chronological_split(lc.data.raw, data_cfg.split);
    lc.data.standardizer.mean = lc.extra.at("standardizer").at("mean").get<double>();
    lc.data.standardizer.std = lc.extra.at("standardizer").at("std").get<double>();
    lc.data.standardized = lc.data.standardizer.apply(lc.data.raw.values);
    return lc;
}

void write_predictions_csv(const std::string& path, const std::vector<WindowSample>& windows,
                           const std::vector<PfrpPrediction>& preds) {
    const std::size_t H = preds.empty() ? 0 : preds[0].y.size();
    const bool has_local = !preds.empty() && !preds[0].y2.empty();
    std::string text = "window,start_index,w1";
    auto block = [&](const std::string& stem) {
        for (std::size_t t = 0; t < H; ++t) text += "," + stem + "_" + std::to_string(t);
    };
    block("y_true");
    block("y1");
    if (has_local) block("y2");
    block("y");
    text += "\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        text += std::to_string(i) + "," + std::to_string(windows[i].start_index) + "," +
                g17(preds[i].w1);
        for (double v : windows[i].y) text += "," + g17(v);
        for (double v : preds[i].y1) text += "," + g17(v);
        if (has_local)
            for (double v : preds[i].y2) text += "," + g17(v);
        for (double v : preds[i].y) text += "," + g17(v);
        text += "\n";
    }
    write_text_atomic(path, text);
}

void write_window_svg(const std::string& path, const WindowSample& w, const PfrpPrediction& p,
                      int index, int H) {
    std::vector<SvgSeries> series;
    series.push_back({"ground truth", "#333333", w.y});
    series.push_back({"global y1", "#d62728", p.y1});
    if (!p.y2.empty()) series.push_back({"local y2", "#2ca02c", p.y2});
    series.push_back({"fused y", "#1f77b4", p.y});
    write_line_chart_svg(path, "test window " + std::to_string(index) + " (H=" +
                                   std::to_string(H) + ", w1=" + g17(p.w1).substr(0, 6) + ")",
                         series);
}

}  // namespace

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    auto row_json = [](const EvalRow& r) {
        nlohmann::json x;
        x["H"] = r.H;
        x["base_mse"] = r.base_mse;
        x["base_mae"] = r.base_mae;
        x["pfrp_mse"] = r.pfrp_mse;
        x["pfrp_mae"] = r.pfrp_mae;
        x["impr_mse_pct"] = r.impr_mse_pct;
        x["impr_mae_pct"] = r.impr_mae_pct;
        x["base_params"] = r.base_params;
        x["pfrp_params"] = r.pfrp_params;
        x["mean_w1"] = r.mean_w1;
        x["runtime_sec"] = r.runtime_sec;
        return x;
    };
    j["rows"] = nlohmann::json::array();
    for (const auto& r : report.rows) j["rows"].push_back(row_json(r));
    if (report.has_average) j["average"] = row_json(report.average);
    return j.dump(2);
}

EvalReport cmd_eval(const std::vector<std::string>& manifests, const std::string& out_dir,
                    const std::vector<long>& plot_indices, const std::string& dataset_override) {
    if (manifests.empty()) throw ConfigError("eval: at least one checkpoint is required");
    fs::create_directories(out_dir);

    EvalReport report;
    for (const std::string& manifest : manifests) {
        LoadedCheckpoint lc = load_for_eval(manifest, dataset_override);
        const int H = lc.components.config.H;
        const int L = lc.components.bank.L;
        std::vector<WindowSample> windows =
            make_windows(lc.data.standardized, lc.data.ranges.test, L, H);

        const auto t0 = std::chrono::steady_clock::now();
        std::vector<PfrpPrediction> preds = predict_windows(lc.components, windows);

        Matrix x(windows.size(), L);
        for (std::size_t i = 0; i < windows.size(); ++i)
            std::copy(windows[i].x.begin(), windows[i].x.end(), x.row(i));
        Matrix base_pred = local_forward(lc.baseline, x);
        const auto t1 = std::chrono::steady_clock::now();

        EvalRow row;
        row.H = H;
        std::vector<double> base_row(H);
        for (std::size_t i = 0; i < windows.size(); ++i) {
            base_row.assign(base_pred.row(i), base_pred.row(i) + H);
            row.base_mse += mse(base_row, windows[i].y);
            row.base_mae += mae(base_row, windows[i].y);
            row.pfrp_mse += mse(preds[i].y, windows[i].y);
            row.pfrp_mae += mae(preds[i].y, windows[i].y);
            row.mean_w1 += preds[i].w1;
        }
        const auto n = static_cast<double>(windows.size());
        row.base_mse /= n;
        row.base_mae /= n;
        row.pfrp_mse /= n;
        row.pfrp_mae /= n;
        row.mean_w1 /= n;
        row.impr_mse_pct = (row.base_mse - row.pfrp_mse) / row.base_mse * 100.0;
        row.impr_mae_pct = (row.base_mae - row.pfrp_mae) / row.base_mae * 100.0;
        row.base_params = lc.baseline.parameter_count();
        row.pfrp_params = lc.components.confidence_gate.parameter_count() +
                          lc.components.output_gate.parameter_count() +
                          lc.components.fusion.parameter_count() +
                          lc.components.local.parameter_count();
        row.runtime_sec = std::chrono::duration<double>(t1 - t0).count();
        report.rows.push_back(row);

        const std::string suffix = "_H" + std::to_string(H);
        write_predictions_csv((fs::path(out_dir) / ("predictions" + suffix + ".csv")).string(),
                              windows, preds);
        WeightReport wr = weight_report(preds);
        write_weight_report_csv(wr, (fs::path(out_dir) / ("w1" + suffix + ".csv")).string());
        {
            std::vector<double> idx(wr.w1.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<double>(i);
            write_scatter_svg((fs::path(out_dir) / ("w1" + suffix + ".svg")).string(),
                              "global weight w1 per test window", idx, wr.w1, "test window",
                              "w1");
        }
        for (long pi : plot_indices) {
            if (pi < 0 || static_cast<std::size_t>(pi) >= windows.size())
                throw ConfigError("plot index " + std::to_string(pi) + " out of range");
            write_window_svg(
                (fs::path(out_dir) / ("window_" + std::to_string(pi) + suffix + ".svg")).string(),
                windows[pi], preds[pi], static_cast<int>(pi), H);
        }
    }

    if (report.rows.size() > 1) {
        EvalRow avg;
        avg.H = 0;
        for (const auto& r : report.rows) {
            avg.base_mse += r.base_mse;
            avg.base_mae += r.base_mae;
            avg.pfrp_mse += r.pfrp_mse;
            avg.pfrp_mae += r.pfrp_mae;
            avg.mean_w1 += r.mean_w1;
            avg.runtime_sec += r.runtime_sec;
        }
        const auto n = static_cast<double>(report.rows.size());
        avg.base_mse /= n;
        avg.base_mae /= n;
        avg.pfrp_mse /= n;
        avg.pfrp_mae /= n;
        avg.mean_w1 /= n;
        avg.impr_mse_pct = (avg.base_mse - avg.pfrp_mse) / avg.base_mse * 100.0;
        avg.impr_mae_pct = (avg.base_mae - avg.pfrp_mae) / avg.base_mae * 100.0;
        avg.base_params = report.rows[0].base_params;
        avg.pfrp_params = report.rows[0].pfrp_params;
        report.average = avg;
        report.has_average = true;
    }

    write_text_atomic((fs::path(out_dir) / "report.json").string(), eval_report_to_json(report));
    return report;
}

void cmd_predict(const std::string& manifest, const std::vector<long>& indices,
                 const std::string& out_dir, bool plots, const std::string& dataset_override) {
    LoadedCheckpoint lc = load_for_eval(manifest, dataset_override);
    const int H = lc.components.config.H;
    const int L = lc.components.bank.L;
    std::vector<WindowSample> all = make_windows(lc.data.standardized, lc.data.ranges.test, L, H);

    std::vector<WindowSample> windows;
    if (indices.empty()) {
        windows = all;
    } else {
        for (long i : indices) {
            if (i < 0 || static_cast<std::size_t>(i) >= all.size())
                throw ConfigError("window index " + std::to_string(i) + " out of range (" +
                                  std::to_string(all.size()) + " test windows)");
            windows.push_back(all[i]);
        }
    }
    std::vector<PfrpPrediction> preds = predict_windows(lc.components, windows);

    fs::create_directories(out_dir);
    const std::string suffix = "_H" + std::to_string(H);
    write_predictions_csv((fs::path(out_dir) / ("predictions" + suffix + ".csv")).string(),
                          windows, preds);
    if (plots) {
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const long shown = indices.empty() ? static_cast<long>(i) : indices[i];
            write_window_svg((fs::path(out_dir) /
                              ("window_" + std::to_string(shown) + suffix + ".svg"))
                                 .string(),
                             windows[i], preds[i], static_cast<int>(shown), H);
        }
    }
}

PeriodicityScore cmd_periodicity(const std::string& csv_path, const std::string& column,
                                 const std::vector<int>& lags, int bins) {
    TimeSeries ts = load_csv(csv_path, column.empty() ? std::optional<std::string>{}
                                                      : std::optional<std::string>{column});
    PeriodicityConfig cfg;
    cfg.lags = lags;
    cfg.bins = bins;
    return periodicity_score(ts.values, cfg);
}

}  // namespace pfrp
