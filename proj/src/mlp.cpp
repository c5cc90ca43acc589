#include "oocpll/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace oocpll {

namespace {

void check_same_shape(const MlpParams& a, const MlpParams& b, const char* what) {
    if (a.layers.size() != b.layers.size())
        throw std::invalid_argument(std::string(what) + ": layer count mismatch");
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].in != b.layers[l].in || a.layers[l].out != b.layers[l].out)
            throw std::invalid_argument(std::string(what) + ": layer shape mismatch");
    }
}

}  // namespace

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

MlpParams make_mlp(int input_dim, const std::vector<int>& hidden_dims, int num_classes,
                   SplitRng& rng) {
    if (input_dim < 1 || num_classes < 2)
        throw std::invalid_argument("make_mlp: need input_dim >= 1 and num_classes >= 2");
    for (int h : hidden_dims)
        if (h < 1) throw std::invalid_argument("make_mlp: hidden dims must be >= 1");

    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(num_classes);

    MlpParams params;
    params.layers.resize(dims.size() - 1);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        MlpLayer& layer = params.layers[l];
        layer.in = dims[l];
        layer.out = dims[l + 1];
        layer.weights.resize(static_cast<std::size_t>(layer.in) * layer.out);
        layer.bias.assign(static_cast<std::size_t>(layer.out), 0.0);
        const double bound = std::sqrt(6.0 / (layer.in + layer.out));
        for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
    }
    return params;
}

MlpParams zeros_like(const MlpParams& params) {
    MlpParams out = params;
    for (auto& l : out.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    return out;
}

void forward(const MlpParams& params, std::span<const double> x, ForwardWorkspace& ws) {
    if (params.layers.empty()) throw std::invalid_argument("forward: empty model");
    if (static_cast<int>(x.size()) != params.input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");

    const std::size_t num_layers = params.layers.size();
    ws.input.assign(x.begin(), x.end());
    ws.pre.resize(num_layers);
    ws.act.resize(num_layers);

    std::span<const double> input = x;
    for (std::size_t l = 0; l < num_layers; ++l) {
        const MlpLayer& layer = params.layers[l];
        auto& pre = ws.pre[l];
        auto& act = ws.act[l];
        pre.resize(static_cast<std::size_t>(layer.out));
        act.resize(static_cast<std::size_t>(layer.out));
        for (int o = 0; o < layer.out; ++o) {
            const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
            double z = layer.bias[static_cast<std::size_t>(o)];
            for (int i = 0; i < layer.in; ++i) z += w[i] * input[static_cast<std::size_t>(i)];
            pre[static_cast<std::size_t>(o)] = z;
        }
        if (l + 1 < num_layers) {
            for (int o = 0; o < layer.out; ++o) {
                const double z = pre[static_cast<std::size_t>(o)];
                act[static_cast<std::size_t>(o)] = z > 0.0 ? z : 0.0;
            }
        } else {
            double zmax = pre[0];
            for (double z : pre) zmax = std::max(zmax, z);
            double sum = 0.0;
            for (int o = 0; o < layer.out; ++o) {
                const double e = std::exp(pre[static_cast<std::size_t>(o)] - zmax);
                act[static_cast<std::size_t>(o)] = e;
                sum += e;
            }
            for (auto& a : act) a /= sum;
        }
        input = act;
    }
}

std::vector<double> forward(const MlpParams& params, std::span<const double> x) {
    ForwardWorkspace ws;
    forward(params, x, ws);
    return ws.act.back();
}

Matrix forward_all(const MlpParams& params, const std::vector<LabeledExample>& examples) {
    Matrix out(examples.size(), static_cast<std::size_t>(params.num_classes()));
    ForwardWorkspace ws;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        forward(params, examples[i].features, ws);
        std::copy(ws.act.back().begin(), ws.act.back().end(), out.row(i));
    }
    return out;
}

Matrix forward_all(const MlpParams& params, const PartialDataset& dataset) {
    return forward_all(params, dataset.examples);
}

void accumulate_grad_soft_target(const MlpParams& params, const ForwardWorkspace& ws,
                                 std::span<const double> target, double scale,
                                 MlpParams& grads) {
    check_same_shape(params, grads, "accumulate_grad_soft_target");
    const std::size_t num_layers = params.layers.size();
    const auto& probs = ws.act.back();
    if (target.size() != probs.size())
        throw std::invalid_argument("accumulate_grad_soft_target: target length mismatch");

    double target_sum = 0.0;
    for (double t : target) {
        if (t < 0.0 || !std::isfinite(t))
            throw std::invalid_argument("accumulate_grad_soft_target: negative target");
        target_sum += t;
    }

    // delta at the softmax input of the last layer
    std::vector<double> delta(probs.size());
    for (std::size_t j = 0; j < probs.size(); ++j)
        delta[j] = target_sum * probs[j] - target[j];

    for (std::size_t l = num_layers; l-- > 0;) {
        const MlpLayer& layer = params.layers[l];
        MlpLayer& grad = grads.layers[l];
        // activations feeding this layer: previous layer output, or the
        // input x which the workspace does not keep -- handled below.
        const std::vector<double>* below = l > 0 ? &ws.act[l - 1] : nullptr;
        for (int o = 0; o < layer.out; ++o) {
            const double d = delta[static_cast<std::size_t>(o)] * scale;
            grad.bias[static_cast<std::size_t>(o)] += d;
            double* gw = grad.weights.data() + static_cast<std::size_t>(o) * layer.in;
            if (below) {
                const double* a = below->data();
                for (int i = 0; i < layer.in; ++i) gw[i] += d * a[i];
            } else {
                const double* a = ws.input.data();
                for (int i = 0; i < layer.in; ++i) gw[i] += d * a[i];
            }
        }
        if (l > 0) {
            std::vector<double> next(static_cast<std::size_t>(layer.in), 0.0);
            for (int o = 0; o < layer.out; ++o) {
                const double d = delta[static_cast<std::size_t>(o)];
                const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
                for (int i = 0; i < layer.in; ++i) next[static_cast<std::size_t>(i)] += w[i] * d;
            }
            for (int i = 0; i < layer.in; ++i)
                if (ws.pre[l - 1][static_cast<std::size_t>(i)] <= 0.0)
                    next[static_cast<std::size_t>(i)] = 0.0;
            delta = std::move(next);
        }
    }
}

MlpParams grad_soft_target(const MlpParams& params, std::span<const double> x,
                           std::span<const double> target) {
    ForwardWorkspace ws;
    forward(params, x, ws);
    MlpParams grads = zeros_like(params);
    accumulate_grad_soft_target(params, ws, target, 1.0, grads);
    return grads;
}

OptimizerState make_optimizer(const MlpParams& params, double base_lr, double momentum,
                              double weight_decay, int total_epochs) {
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("make_optimizer: momentum must be in [0, 1)");
    OptimizerState s;
    s.velocity = zeros_like(params);
    s.base_lr = base_lr;
    s.momentum = momentum;
    s.weight_decay = weight_decay;
    s.total_epochs = total_epochs;
    return s;
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
    if (epoch < 0 || epoch > total_epochs)
        throw std::invalid_argument("cosine_lr: epoch outside [0, total_epochs]");
    return base_lr * 0.5 *
           (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / total_epochs));
}

void sgd_step(MlpParams& params, const MlpParams& grads, OptimizerState& state) {
    check_same_shape(params, grads, "sgd_step");
    check_same_shape(params, state.velocity, "sgd_step");
    const double lr = cosine_lr(state.base_lr, state.epoch, state.total_epochs);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        MlpLayer& p = params.layers[l];
        const MlpLayer& g = grads.layers[l];
        MlpLayer& v = state.velocity.layers[l];
        for (std::size_t i = 0; i < p.weights.size(); ++i) {
            v.weights[i] = state.momentum * v.weights[i] +
                           (g.weights[i] + state.weight_decay * p.weights[i]);
            p.weights[i] -= lr * v.weights[i];
        }
        for (std::size_t i = 0; i < p.bias.size(); ++i) {
            v.bias[i] =
                state.momentum * v.bias[i] + (g.bias[i] + state.weight_decay * p.bias[i]);
            p.bias[i] -= lr * v.bias[i];
        }
    }
}

void save_checkpoint(const MlpParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << "oocpll-checkpoint 1\n";
    out << "layers " << params.layers.size() << "\n";
    char buf[64];
    for (const auto& layer : params.layers) {
        out << "layer " << layer.out << " " << layer.in << "\n";
        for (std::size_t i = 0; i < layer.weights.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", layer.weights[i]);
            out << buf << (i + 1 == layer.weights.size() ? "\n" : " ");
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.17g", layer.bias[i]);
            out << buf << (i + 1 == layer.bias.size() ? "\n" : " ");
        }
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

MlpParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "oocpll-checkpoint" || version != 1)
        throw std::runtime_error("load_checkpoint: unrecognized format in " + path);
    std::string word;
    std::size_t num_layers = 0;
    in >> word >> num_layers;
    if (word != "layers") throw std::runtime_error("load_checkpoint: malformed header");
    MlpParams params;
    params.layers.resize(num_layers);
    for (auto& layer : params.layers) {
        in >> word >> layer.out >> layer.in;
        if (word != "layer" || layer.out < 1 || layer.in < 1)
            throw std::runtime_error("load_checkpoint: malformed layer header");
        layer.weights.resize(static_cast<std::size_t>(layer.in) * layer.out);
        layer.bias.resize(static_cast<std::size_t>(layer.out));
        for (auto& w : layer.weights) in >> w;
        for (auto& b : layer.bias) in >> b;
    }
    if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
    return params;
}

}  // namespace oocpll
