#include "pfrp/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "pfrp/errors.hpp"
#include "pfrp/rng.hpp"

namespace pfrp {

long MlpModel::parameter_count() const {
    long n = 0;
    for (std::size_t m = 0; m < weights.size(); ++m)
        n += static_cast<long>(weights[m].data.size() + biases[m].size());
    return n;
}

MlpModel init_mlp(const std::vector<int>& layer_dims, OutputActivation out_act,
                  std::uint64_t seed, bool zero_final) {
    if (layer_dims.size() < 2)
        throw std::invalid_argument("init_mlp: need at least input and output dims");
    for (int d : layer_dims)
        if (d < 1) throw std::invalid_argument("init_mlp: non-positive layer dim");

    MlpModel model;
    model.layer_dims = layer_dims;
    model.output_activation = out_act;
    Rng rng(seed);
    for (std::size_t m = 1; m < layer_dims.size(); ++m) {
        const int fan_in = layer_dims[m - 1];
        const int fan_out = layer_dims[m];
        Matrix w(static_cast<std::size_t>(fan_out), static_cast<std::size_t>(fan_in));
        const bool zero = zero_final && m + 1 == layer_dims.size();
        if (!zero) {
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (double& v : w.data) v = rng.uniform(-limit, limit);
        }
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    return model;
}

Matrix mlp_forward(const MlpModel& model, const Matrix& batch, ForwardCache* cache) {
    if (batch.cols != static_cast<std::size_t>(model.input_dim()))
        throw std::invalid_argument("mlp_forward: batch width " + std::to_string(batch.cols) +
                                    " != input dim " + std::to_string(model.input_dim()));
    if (cache) {
        cache->input = batch;
        cache->pre.clear();
        cache->post.clear();
    }
    Matrix act = batch;
    const std::size_t layers = model.num_layers();
    for (std::size_t m = 0; m < layers; ++m) {
        Matrix z = matmul_nt(act, model.weights[m]);
        const std::vector<double>& b = model.biases[m];
        for (std::size_t i = 0; i < z.rows; ++i) {
            double* zi = z.row(i);
            for (std::size_t j = 0; j < z.cols; ++j) zi[j] += b[j];
        }
        if (cache) cache->pre.push_back(z);
        const bool last = (m + 1 == layers);
        if (!last) {
            for (double& v : z.data) v = v > 0.0 ? v : 0.0;  // ReLU
        } else if (model.output_activation == OutputActivation::sigmoid) {
            for (double& v : z.data) v = sigmoid(v);
        }
        if (cache) cache->post.push_back(z);
        act = std::move(z);
    }
    return act;
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
    for (std::size_t m = 0; m < weights.size(); ++m) {
        for (std::size_t i = 0; i < weights[m].data.size(); ++i)
            weights[m].data[i] += scale * other.weights[m].data[i];
        for (std::size_t i = 0; i < biases[m].size(); ++i)
            biases[m][i] += scale * other.biases[m][i];
    }
}

void MlpGrads::zero() {
    for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

MlpGrads zero_grads_like(const MlpModel& model) {
    MlpGrads g;
    for (std::size_t m = 0; m < model.num_layers(); ++m) {
        g.weights.emplace_back(model.weights[m].rows, model.weights[m].cols);
        g.biases.emplace_back(model.biases[m].size(), 0.0);
    }
    return g;
}

Matrix mlp_backward(const MlpModel& model, const ForwardCache& cache, const Matrix& upstream,
                    MlpGrads& accum) {
    const std::size_t layers = model.num_layers();
    if (cache.pre.size() != layers || accum.weights.size() != layers)
        throw std::invalid_argument("mlp_backward: cache/grads do not match model");
    if (!upstream.same_shape(cache.post.back()))
        throw std::invalid_argument("mlp_backward: upstream shape mismatch");

    Matrix delta = upstream;  // dLoss/d(post-activation of current layer)
    for (std::size_t m = layers; m-- > 0;) {
        // through the layer's activation
        if (m + 1 == layers) {
            if (model.output_activation == OutputActivation::sigmoid) {
                const Matrix& s = cache.post[m];
                for (std::size_t i = 0; i < delta.data.size(); ++i)
                    delta.data[i] *= s.data[i] * (1.0 - s.data[i]);
            }
        } else {
            const Matrix& z = cache.pre[m];
            for (std::size_t i = 0; i < delta.data.size(); ++i)
                if (z.data[i] <= 0.0) delta.data[i] = 0.0;
        }

        const Matrix& in = (m == 0) ? cache.input : cache.post[m - 1];
        Matrix& dw = accum.weights[m];
        std::vector<double>& db = accum.biases[m];
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* di = delta.row(i);
            const double* xi = in.row(i);
            for (std::size_t j = 0; j < delta.cols; ++j) {
                const double dij = di[j];
                if (dij == 0.0) continue;
                double* dwj = dw.row(j);
                for (std::size_t k = 0; k < in.cols; ++k) dwj[k] += dij * xi[k];
                db[j] += dij;
            }
        }

        // d(input of layer m) = delta * W_m
        Matrix dprev(delta.rows, in.cols);
        for (std::size_t i = 0; i < delta.rows; ++i) {
            const double* di = delta.row(i);
            double* dpi = dprev.row(i);
            for (std::size_t j = 0; j < delta.cols; ++j) {
                const double dij = di[j];
                if (dij == 0.0) continue;
                const double* wj = model.weights[m].row(j);
                for (std::size_t k = 0; k < in.cols; ++k) dpi[k] += dij * wj[k];
            }
        }
        delta = std::move(dprev);
    }
    return delta;
}

std::vector<double> softmax(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("softmax: empty input");
    double mx = v[0];
    for (double x : v)
        if (x > mx) mx = x;
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

void softmax_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* r = m.row(i);
        double mx = r[0];
        for (std::size_t j = 1; j < m.cols; ++j)
            if (r[j] > mx) mx = r[j];
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            r[j] = std::exp(r[j] - mx);
            sum += r[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) r[j] /= sum;
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

AdamState make_adam(const MlpModel& model, double lr) {
    AdamState s;
    s.lr = lr;
    s.m = zero_grads_like(model);
    s.v = zero_grads_like(model);
    return s;
}

void adam_step(MlpModel& model, const MlpGrads& grads, AdamState& state) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t m = 0; m < model.num_layers(); ++m) {
        if (!grads.weights[m].same_shape(model.weights[m]))
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        auto update = [&](double& param, double g, double& mom, double& vel) {
            mom = state.beta1 * mom + (1.0 - state.beta1) * g;
            vel = state.beta2 * vel + (1.0 - state.beta2) * g * g;
            const double mhat = mom / bc1;
            const double vhat = vel / bc2;
            param -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        };
        for (std::size_t i = 0; i < model.weights[m].data.size(); ++i)
            update(model.weights[m].data[i], grads.weights[m].data[i], state.m.weights[m].data[i],
                   state.v.weights[m].data[i]);
        for (std::size_t i = 0; i < model.biases[m].size(); ++i)
            update(model.biases[m][i], grads.biases[m][i], state.m.biases[m][i],
                   state.v.biases[m][i]);
    }
}

std::vector<double> collect_parameters(const MlpModel& model) {
    std::vector<double> flat;
    for (std::size_t m = 0; m < model.num_layers(); ++m) {
        flat.insert(flat.end(), model.weights[m].data.begin(), model.weights[m].data.end());
        flat.insert(flat.end(), model.biases[m].begin(), model.biases[m].end());
    }
    return flat;
}

void apply_parameters(MlpModel& model, const std::vector<double>& flat) {
    std::size_t pos = 0;
    for (std::size_t m = 0; m < model.num_layers(); ++m) {
        for (double& v : model.weights[m].data) v = flat.at(pos++);
        for (double& v : model.biases[m]) v = flat.at(pos++);
    }
    if (pos != flat.size()) throw std::invalid_argument("apply_parameters: size mismatch");
}

std::vector<double> collect_grads(const MlpGrads& grads) {
    std::vector<double> flat;
    for (std::size_t m = 0; m < grads.weights.size(); ++m) {
        flat.insert(flat.end(), grads.weights[m].data.begin(), grads.weights[m].data.end());
        flat.insert(flat.end(), grads.biases[m].begin(), grads.biases[m].end());
    }
    return flat;
}

namespace {

const char* activation_name(OutputActivation a) {
    return a == OutputActivation::sigmoid ? "sigmoid" : "identity";
}

OutputActivation activation_from(const std::string& s) {
    if (s == "sigmoid") return OutputActivation::sigmoid;
    if (s == "identity") return OutputActivation::identity;
    throw DataError("unknown output activation: " + s);
}

nlohmann::json grads_to_json(const MlpGrads& g) {
    nlohmann::json j;
    j["weights"] = nlohmann::json::array();
    j["biases"] = nlohmann::json::array();
    for (std::size_t m = 0; m < g.weights.size(); ++m) {
        j["weights"].push_back(g.weights[m].data);
        j["biases"].push_back(g.biases[m]);
    }
    return j;
}

void grads_from_json(const nlohmann::json& j, MlpGrads& g) {
    for (std::size_t m = 0; m < g.weights.size(); ++m) {
        g.weights[m].data = j.at("weights").at(m).get<std::vector<double>>();
        g.biases[m] = j.at("biases").at(m).get<std::vector<double>>();
    }
}

}  // namespace

std::string mlp_to_json(const MlpModel& model, const AdamState* adam) {
    nlohmann::json j;
    j["version"] = 1;
    j["kind"] = "mlp";
    j["layer_dims"] = model.layer_dims;
    j["hidden_activation"] = "relu";
    j["output_activation"] = activation_name(model.output_activation);
    j["weights"] = nlohmann::json::array();
    j["biases"] = nlohmann::json::array();
    for (std::size_t m = 0; m < model.num_layers(); ++m) {
        j["weights"].push_back(model.weights[m].data);  // row-major
        j["biases"].push_back(model.biases[m]);
    }
    if (adam) {
        nlohmann::json a;
        a["step"] = adam->step;
        a["lr"] = adam->lr;
        a["beta1"] = adam->beta1;
        a["beta2"] = adam->beta2;
        a["eps"] = adam->eps;
        a["m"] = grads_to_json(adam->m);
        a["v"] = grads_to_json(adam->v);
        j["adam"] = a;
    }
    return j.dump(2);
}

MlpModel mlp_from_json(const std::string& text, AdamState* adam) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("invalid checkpoint JSON: ") + e.what());
    }
    if (j.value("version", 0) != 1) throw DataError("unsupported checkpoint version");
    MlpModel model;
    model.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    model.output_activation = activation_from(j.at("output_activation").get<std::string>());
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    for (std::size_t m = 1; m < model.layer_dims.size(); ++m) {
        Matrix w(static_cast<std::size_t>(model.layer_dims[m]),
                 static_cast<std::size_t>(model.layer_dims[m - 1]));
        w.data = jw.at(m - 1).get<std::vector<double>>();
        if (w.data.size() != w.rows * w.cols) throw DataError("checkpoint weight size mismatch");
        model.weights.push_back(std::move(w));
        auto b = jb.at(m - 1).get<std::vector<double>>();
        if (b.size() != static_cast<std::size_t>(model.layer_dims[m]))
            throw DataError("checkpoint bias size mismatch");
        model.biases.push_back(std::move(b));
    }
    if (adam) {
        *adam = make_adam(model, adam->lr);
        if (j.contains("adam")) {
            const auto& a = j.at("adam");
            adam->step = a.at("step").get<long>();
            adam->lr = a.at("lr").get<double>();
            adam->beta1 = a.at("beta1").get<double>();
            adam->beta2 = a.at("beta2").get<double>();
            adam->eps = a.at("eps").get<double>();
            grads_from_json(a.at("m"), adam->m);
            grads_from_json(a.at("v"), adam->v);
        }
    }
    return model;
}

void save_mlp(const MlpModel& model, const std::string& path, const AdamState* adam) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        out << mlp_to_json(model, adam);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot move checkpoint into place: " + path);
}

MlpModel load_mlp(const std::string& path, AdamState* adam) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return mlp_from_json(text, adam);
}

std::string model_hash(const MlpModel& model) {
    const std::string canonical = mlp_to_json(model, nullptr);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace pfrp
