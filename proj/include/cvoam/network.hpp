#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cvoam/corpus.hpp"
#include "cvoam/features.hpp"
#include "cvoam/tensor.hpp"

namespace cvoam {

// Softmax outputs over the consonant inventory.
using PosteriorVector = std::vector<double>;

// Architecture: conv 9x5x64 -> ReLU -> maxpool 2x2 (stride 1) -> conv 5x3x64
// -> ReLU -> pool -> flatten -> three FC+ReLU layers -> linear -> softmax.
// Convolutions use valid padding and 1x1 stride. Everything is configurable
// so tests can run reduced instances.
struct NetConfig {
    int input_h = 40, input_w = 32;
    int conv1_h = 9, conv1_w = 5, conv1_filters = 64;
    int conv2_h = 5, conv2_w = 3, conv2_filters = 64;
    int pool = 2, pool_stride = 1;
    int fc_width = 1024;
    int n_classes = 21;

    int conv1_out_h() const { return input_h - conv1_h + 1; }
    int conv1_out_w() const { return input_w - conv1_w + 1; }
    int pool1_out_h() const { return (conv1_out_h() - pool) / pool_stride + 1; }
    int pool1_out_w() const { return (conv1_out_w() - pool) / pool_stride + 1; }
    int conv2_out_h() const { return pool1_out_h() - conv2_h + 1; }
    int conv2_out_w() const { return pool1_out_w() - conv2_w + 1; }
    int pool2_out_h() const { return (conv2_out_h() - pool) / pool_stride + 1; }
    int pool2_out_w() const { return (conv2_out_w() - pool) / pool_stride + 1; }
    int flatten_dim() const { return pool2_out_h() * pool2_out_w() * conv2_filters; }

    void validate() const;  // throws ShapeMismatch if any stage collapses
};

struct ModelParams {
    NetConfig net;

    ConvKernel conv1_w;          // conv1_h x conv1_w x 1 x conv1_filters
    std::vector<double> conv1_b;
    ConvKernel conv2_w;          // conv2_h x conv2_w x conv1_filters x conv2_filters
    std::vector<double> conv2_b;
    Matrix fc1_w;                // flatten_dim x fc_width
    std::vector<double> fc1_b;
    Matrix fc2_w;
    std::vector<double> fc2_b;
    Matrix fc3_w;
    std::vector<double> fc3_b;
    Matrix out_w;                // fc_width x n_classes
    std::vector<double> out_b;

    // metadata carried into the model file
    PhoneInventory inventory;
    int window_ms = 160;
    MelParams mel;
};

struct TrainConfig {
    int epochs = 10;
    double learning_rate = 1e-3;
    int sentences_per_batch = 8;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    uint64_t seed = 42;
    // alternative batching: fixed number of segments per batch instead of the
    // 8-sentence grouping
    int fixed_segments_per_batch = 0;  // 0 = off
};

// All CV examples of one sentence; batches group 8 of these.
struct TrainUtterance {
    std::string utterance_id;
    std::vector<MelSpectrogram> inputs;
    std::vector<int> labels;
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;            // mean cross-entropy per segment
    double train_accuracy = 0.0;  // training-pass accuracy
};

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> log;
};

enum class Activation { Relu, Identity };  // Identity is a test hook

// Per-batch activations kept for the backward pass.
struct BatchCache {
    int batch = 0;
    std::vector<Tensor> input;
    std::vector<Tensor> conv1_pre, conv1_act, pool1;
    std::vector<Tensor> conv2_pre, conv2_act, pool2;
    std::vector<std::vector<int>> pool1_arg, pool2_arg;  // flat input index per pooled cell
    Matrix flat;
    Matrix fc1_pre, fc1_act, fc2_pre, fc2_act, fc3_pre, fc3_act;
    Matrix logits, probs;
};

struct Gradients {
    ConvKernel conv1_w;
    std::vector<double> conv1_b;
    ConvKernel conv2_w;
    std::vector<double> conv2_b;
    Matrix fc1_w;
    std::vector<double> fc1_b;
    Matrix fc2_w;
    std::vector<double> fc2_b;
    Matrix fc3_w;
    std::vector<double> fc3_b;
    Matrix out_w;
    std::vector<double> out_b;
};

// Fan-in scaled normal init (std = sqrt(2 / fan_in)), zero biases.
ModelParams init_params(const NetConfig& net, const PhoneInventory& inventory, int window_ms,
                        const MelParams& mel, uint64_t seed);
ModelParams init_params(const NetConfig& net, const PhoneInventory& inventory, int window_ms,
                        const MelParams& mel, std::mt19937_64& rng);

BatchCache forward_batch(const ModelParams& params, const std::vector<const MelSpectrogram*>& inputs,
                         Activation activation = Activation::Relu);

// workspace variant: reuses the cache's buffers across batches
void forward_batch(const ModelParams& params, const std::vector<const MelSpectrogram*>& inputs,
                   BatchCache& cache, Activation activation = Activation::Relu);

PosteriorVector forward(const ModelParams& params, const MelSpectrogram& input);

// Eq. 1: cross-entropy summed over the batch, softmax floored at 1e-12.
double cross_entropy(const Matrix& probs, const std::vector<int>& labels);

// Exact analytic gradients of the summed loss. Maxpool routes to the argmax
// (first in row-major scan on ties), ReLU gradient is zero at non-positive
// pre-activations.
Gradients backward_batch(const ModelParams& params, const BatchCache& cache,
                         const std::vector<int>& labels);
void backward_batch(const ModelParams& params, const BatchCache& cache,
                    const std::vector<int>& labels, Gradients& grads);

TrainResult train(const std::vector<TrainUtterance>& data, const NetConfig& net,
                  const TrainConfig& cfg, const PhoneInventory& inventory, int window_ms,
                  const MelParams& mel);

struct EvalResult {
    double accuracy = 0.0;
    Matrix confusion;  // rows = true class, cols = predicted
    int total = 0;
};

EvalResult evaluate(const ModelParams& params, const std::vector<const MelSpectrogram*>& inputs,
                    const std::vector<int>& labels);

int argmax_class(const PosteriorVector& posterior);  // ties -> lowest index

struct SaliencyOptions {
    bool guided = true;                         // guided backprop vs plain gradient
    Activation activation = Activation::Relu;   // Identity bypasses every ReLU
    bool raw_gradient = false;                  // skip abs + normalization (test hook)
};

// |d logit[target] / d input| backpropagated with the guided rule at every
// ReLU, min-max normalized to [0, 1] (an all-zero map stays zero).
MelSpectrogram saliency(const ModelParams& params, const MelSpectrogram& input, int target_class,
                        const SaliencyOptions& options = {});

// Versioned container: one-line JSON header (magic "CVOAM1", shapes,
// inventory, mel config) followed by raw little-endian float32 tensors in
// declared order. Atomic write.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

// Serialized bytes of save_model, for byte-identity checks.
std::string serialize_model(const ModelParams& params);

struct SweepRow {
    int window_ms = 0;
    double accuracy = 0.0;
};

// Trains one model per window length (frame count and flatten_dim follow the
// window) and reports test accuracy for each.
std::vector<SweepRow> sweep_window(const Manifest& train_manifest, const Manifest& test_manifest,
                                   const NetConfig& net, const TrainConfig& cfg,
                                   const PhoneInventory& inventory, const MelParams& mel,
                                   const std::vector<int>& windows,
                                   const std::string& tier_name = "phones");

}  // namespace cvoam
