#include "pfrp/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "pfrp/errors.hpp"

namespace pfrp {

EncoderConfig RunConfig::encoder_config() const {
    EncoderConfig e;
    e.L = L;
    e.feature_dim = feature_dim;
    e.hidden = encoder_hidden;
    e.tau = tau;
    e.batch_size = encoder_batch;
    e.lr = encoder_lr;
    e.epochs = encoder_epochs;
    e.overlap_threshold = overlap_threshold;
    e.seed = seed;
    if (strategy == "pcl")
        e.strategy = TrainStrategy::pcl;
    else if (strategy == "cl")
        e.strategy = TrainStrategy::cl;
    else if (strategy == "pl")
        e.strategy = TrainStrategy::pl;
    else
        throw ConfigError("unknown training strategy: " + strategy);
    return e;
}

PfrpConfig RunConfig::pfrp_config() const {
    PfrpConfig p;
    p.k = k;
    p.H = H;
    p.confidence_hidden = confidence_hidden;
    p.output_hidden = output_hidden;
    p.fusion_hidden = fusion_hidden;
    p.lr = lr;
    p.epochs = epochs;
    p.batch_size = batch_size;
    p.seed = seed;
    p.no_confidence_gate = no_confidence_gate;
    p.no_output_gate = no_output_gate;
    p.no_local_model = no_local_model;
    p.criterion = criterion_from(criterion);
    return p;
}

LocalPredictor::Kind RunConfig::local_kind() const {
    if (local == "linear") return LocalPredictor::Kind::linear;
    if (local == "dlinear") return LocalPredictor::Kind::dlinear;
    throw ConfigError("unknown local model kind: " + local);
}

std::string RunConfig::dataset_name() const {
    if (!name.empty()) return name;
    std::string stem = std::filesystem::path(dataset).stem().string();
    std::transform(stem.begin(), stem.end(), stem.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return stem;
}

std::optional<std::pair<int, int>> dataset_default_hyperparams(const std::string& name) {
    std::string n = name;
    std::transform(n.begin(), n.end(), n.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (n == "traffic") return std::make_pair(4000, 10);
    if (n == "electricity") return std::make_pair(1000, 20);
    if (n == "weather") return std::make_pair(4000, 20);
    if (n == "etth1") return std::make_pair(1000, 50);
    if (n == "etth2") return std::make_pair(1000, 50);
    if (n == "ettm1") return std::make_pair(3000, 200);
    if (n == "ettm2") return std::make_pair(3000, 100);
    return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                          (s.front() == '\'' && s.back() == '\'')))
        return s.substr(1, s.size() - 2);
    return s;
}

long parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    long x = std::strtol(v.c_str(), &end, 10);
    if (end != v.c_str() + v.size())
        throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
    return x;
}

double parse_real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size())
        throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<int> parse_int_array(const std::string& key, const std::string& v) {
    std::string body = v;
    if (!body.empty() && body.front() == '[' && body.back() == ']')
        body = body.substr(1, body.size() - 2);
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < body.size()) {
        std::size_t comma = body.find(',', pos);
        const std::string item = trim(body.substr(pos, comma - pos));
        if (!item.empty()) out.push_back(static_cast<int>(parse_int(key, item)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

}  // namespace

void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& raw) {
    const std::string value = unquote(trim(raw));
    if (key == "dataset") cfg.dataset = value;
    else if (key == "column") cfg.column = value;
    else if (key == "freq") cfg.freq = value;
    else if (key == "name") cfg.name = value;
    else if (key == "L") cfg.L = static_cast<int>(parse_int(key, value));
    else if (key == "H") cfg.H = static_cast<int>(parse_int(key, value));
    else if (key == "train_ratio") cfg.split.train_ratio = parse_real(key, value);
    else if (key == "val_ratio") cfg.split.val_ratio = parse_real(key, value);
    else if (key == "test_ratio") cfg.split.test_ratio = parse_real(key, value);
    else if (key == "feature_dim") cfg.feature_dim = static_cast<int>(parse_int(key, value));
    else if (key == "encoder_hidden") cfg.encoder_hidden = parse_int_array(key, value);
    else if (key == "tau") cfg.tau = parse_real(key, value);
    else if (key == "encoder_batch") cfg.encoder_batch = static_cast<int>(parse_int(key, value));
    else if (key == "encoder_lr") cfg.encoder_lr = parse_real(key, value);
    else if (key == "encoder_epochs") cfg.encoder_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "overlap_threshold")
        cfg.overlap_threshold = static_cast<int>(parse_int(key, value));
    else if (key == "strategy") cfg.strategy = value;
    else if (key == "K") cfg.K = static_cast<int>(parse_int(key, value));
    else if (key == "H_bank") cfg.H_bank = static_cast<int>(parse_int(key, value));
    else if (key == "store_raw_x") cfg.store_raw_x = parse_bool(key, value);
    else if (key == "k") cfg.k = static_cast<int>(parse_int(key, value));
    else if (key == "criterion") cfg.criterion = value;
    else if (key == "local") cfg.local = value;
    else if (key == "kernel") cfg.kernel = static_cast<int>(parse_int(key, value));
    else if (key == "lr") cfg.lr = parse_real(key, value);
    else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "confidence_hidden")
        cfg.confidence_hidden = static_cast<int>(parse_int(key, value));
    else if (key == "output_hidden") cfg.output_hidden = static_cast<int>(parse_int(key, value));
    else if (key == "fusion_hidden") cfg.fusion_hidden = static_cast<int>(parse_int(key, value));
    else if (key == "no_confidence_gate") cfg.no_confidence_gate = parse_bool(key, value);
    else if (key == "no_output_gate") cfg.no_output_gate = parse_bool(key, value);
    else if (key == "no_local_model") cfg.no_local_model = parse_bool(key, value);
    else if (key == "pretrained_local") cfg.pretrained_local = value;
    else if (key == "train_stride") cfg.train_stride = static_cast<int>(parse_int(key, value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "encoder_path") cfg.encoder_path = value;
    else if (key == "bank_path") cfg.bank_path = value;
    else throw ConfigError("unknown config key: " + key);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        apply_config_line(cfg, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return cfg;
}

void finalize_config(RunConfig& cfg) {
    if (cfg.dataset.empty()) throw ConfigError("config: dataset path is required");
    if (cfg.K == 0 || cfg.k == 0) {
        const auto def = dataset_default_hyperparams(cfg.dataset_name());
        if (def) {
            if (cfg.K == 0) cfg.K = def->first;
            if (cfg.k == 0) cfg.k = def->second;
        } else {
            throw ConfigError("config: no (K, k) defaults for dataset '" + cfg.dataset_name() +
                              "'; set K and k explicitly");
        }
    }
    if (cfg.L < 1 || cfg.H < 1) throw ConfigError("config: L and H must be positive");
    if (cfg.H > cfg.H_bank)
        throw ConfigError("config: H=" + std::to_string(cfg.H) + " exceeds H_bank=" +
                          std::to_string(cfg.H_bank));
    if (cfg.k > cfg.K) throw ConfigError("config: k exceeds K");
    if (cfg.train_stride < 1) throw ConfigError("config: train_stride must be positive");
    if (cfg.criterion != "feature" && !cfg.store_raw_x)
        cfg.store_raw_x = true;  // non-feature retrieval needs raw windows in the bank
    cfg.encoder_config().validate();
    cfg.pfrp_config().validate();
}

}  // namespace pfrp
