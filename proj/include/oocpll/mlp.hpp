#pragma once

#include <span>
#include <string>
#include <vector>

#include "oocpll/rng.hpp"
#include "oocpll/types.hpp"

namespace oocpll {

// One dense layer: weights is out x in, row-major.
struct MlpLayer {
    int in = 0;
    int out = 0;
    std::vector<double> weights;
    std::vector<double> bias;
};

// Rectifier MLP with a softmax output layer.
struct MlpParams {
    std::vector<MlpLayer> layers;

    int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    int num_classes() const { return layers.empty() ? 0 : layers.back().out; }
    std::size_t parameter_count() const;
};

// Glorot-uniform initialization, deterministic given the rng stream.
MlpParams make_mlp(int input_dim, const std::vector<int>& hidden_dims, int num_classes,
                   SplitRng& rng);

MlpParams zeros_like(const MlpParams& params);

// Input copy plus per-layer preactivations and activations of one forward
// pass; the final activation row holds the softmax probabilities.
struct ForwardWorkspace {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> act;

    std::span<const double> probs() const { return act.back(); }
};

// Softmax-normalized class probabilities for one input.
void forward(const MlpParams& params, std::span<const double> x, ForwardWorkspace& ws);
std::vector<double> forward(const MlpParams& params, std::span<const double> x);

// Probabilities for every example of a dataset, one row per example.
Matrix forward_all(const MlpParams& params, const PartialDataset& dataset);
Matrix forward_all(const MlpParams& params, const std::vector<LabeledExample>& examples);

// Adds scale * d/dtheta of L(x, t) = -sum_j t_j log f_j(x) into grads, with
// ws holding the forward pass for x. The softmax-input gradient is
// (sum_j t_j) * f - t, backpropagated exactly through the hidden layers.
void accumulate_grad_soft_target(const MlpParams& params, const ForwardWorkspace& ws,
                                 std::span<const double> target, double scale, MlpParams& grads);

// Gradients of L(x, t) for a single example; targets must be >= 0.
MlpParams grad_soft_target(const MlpParams& params, std::span<const double> x,
                           std::span<const double> target);

struct OptimizerState {
    MlpParams velocity;
    double base_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.001;
    int epoch = 0;
    int total_epochs = 1;
};

OptimizerState make_optimizer(const MlpParams& params, double base_lr, double momentum,
                              double weight_decay, int total_epochs);

// Single-cycle cosine schedule: base_lr * 0.5 * (1 + cos(pi * epoch / total)).
double cosine_lr(double base_lr, int epoch, int total_epochs);

// v <- momentum * v + (grad + weight_decay * param); param <- param - lr * v,
// with lr taken from cosine_lr at state.epoch.
void sgd_step(MlpParams& params, const MlpParams& grads, OptimizerState& state);

// Versioned decimal-text checkpoint of the architecture and all tensors.
void save_checkpoint(const MlpParams& params, const std::string& path);
MlpParams load_checkpoint(const std::string& path);

}  // namespace oocpll
