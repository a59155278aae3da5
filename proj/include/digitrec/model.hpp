#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "digitrec/layers.hpp"
#include "digitrec/mfcc.hpp"
#include "digitrec/tensor.hpp"

namespace digitrec {

struct ModelConfig {
    std::vector<std::size_t> conv_filters = {24, 32, 64, 128};
    std::size_t kernel = 3;       // square, odd
    std::size_t pool = 2;         // square
    std::size_t dense_units = 128;
    double dropout_rate = 0.2;
    double l2_factor = 0.1;       // applied to the first conv layer's kernels only
    std::size_t classes = 10;
    std::size_t input_size = 39;  // square single-channel input

    void validate() const;
    // Spatial side after each pooling stage (floor halving).
    std::vector<std::size_t> stage_sizes() const;
    std::size_t flat_dim() const;
};

struct TrainConfig {
    std::size_t epochs = 1000;
    std::size_t batch_size = 32;
    double lr = 1e-4;
    std::uint64_t seed = 0;
    std::optional<std::size_t> early_stop_patience;  // epochs without val-loss improvement

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss, train_acc;  // one entry per completed epoch
    std::vector<double> val_loss, val_acc;      // empty when no validation set
};

struct TrainReport {
    TrainHistory history;
    std::size_t best_epoch = 0;  // index into history (by val loss; final epoch without val)
    bool early_stopped = false;
};

struct ConvStage {
    ConvLayer conv;
    BatchNormState bn;
};

struct Model {
    ModelConfig config;
    FeaturePipeline features;  // how inputs were featurized; carried for predict
    std::uint64_t seed = 0;
    std::vector<ConvStage> stages;
    DenseLayer dense1, dense2;
    bool has_stats = false;
    RowStats stats;  // feature standardization from the training set
    TrainHistory history;

    std::size_t parameter_count() const;  // trainable only
    void snap_f32();                      // quantize persistent state to the float32 grid
};

struct FeatureDataset {
    std::vector<FeatureMap> maps;
    std::vector<int> labels;

    std::size_t size() const { return maps.size(); }
    bool empty() const { return maps.empty(); }
};

struct ForwardCache {
    std::vector<Tensor> conv_in;        // per stage: input to the conv
    std::vector<BatchNormCache> bn;     // per stage
    std::vector<Tensor> relu_in;        // per stage: BN output
    std::vector<MaxPoolResult> pool;    // per stage
    Tensor flat;                        // dense1 input
    Tensor fc1_out;                     // dense1 output (relu input)
    DropoutResult drop;                 // mask over relu(fc1) output
    Tensor fc2_in;                      // dropout output
};

// He-normal weights from the seeded generator, zero biases, unit gamma,
// zero beta. State is snapped to the float32 grid so checkpoints are
// lossless.
Model build_model(const ModelConfig& config, std::uint64_t seed);

// Runs the layer stack on an N x S x S x 1 batch and returns logits N x 10.
// Train mode needs a cache and a dropout rng.
Tensor forward(Model& model, const Tensor& batch, Mode mode, ForwardCache* cache = nullptr,
               Rng* dropout_rng = nullptr);

// Per epoch: seeded shuffle, minibatch forward/backward, Adam step with the
// l2 gradient term. Records train and validation loss/accuracy, optionally
// early-stops on validation loss, and restores the best-epoch weights.
// Computes and stores the feature standardization statistics from train_set.
TrainReport train(Model& model, const FeatureDataset& train_set, const FeatureDataset& val_set,
                  const TrainConfig& tc);

// Mean total loss (cross-entropy + l2 penalty) and accuracy fraction over a
// dataset in infer mode.
std::pair<double, double> dataset_loss_accuracy(Model& model, const FeatureDataset& set,
                                                std::size_t batch_size = 32);

struct Prediction {
    int digit = 0;
    std::array<double, 10> probabilities{};
};

// Applies the stored standardization, runs an infer-mode forward pass, and
// softmaxes the logits. Argmax ties break to the smallest class index.
Prediction predict(Model& model, const FeatureMap& fm);

// Checkpoint: magic, format version, JSON metadata (config, seed, history,
// standardization stats), little-endian float32 parameter blobs in build
// order, trailing CRC32.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace digitrec
