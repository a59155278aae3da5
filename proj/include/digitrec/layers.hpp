#pragma once

#include <cstdint>
#include <vector>

#include "digitrec/rng.hpp"
#include "digitrec/tensor.hpp"

namespace digitrec {

enum class Mode { train, infer };

// ---------------------------------------------------------------- conv ----

struct ConvLayer {
    Tensor kernels;  // [Cout, Cin, kh, kw]
    Tensor bias;     // [Cout]
    double l2_factor = 0.0;
};

struct ConvGrads {
    Tensor input;    // same shape as forward input
    Tensor kernels;  // same shape as layer.kernels
    Tensor bias;     // same shape as layer.bias
};

// Same-padding cross-correlation at stride 1:
// out[n,y,x,co] = bias[co] + sum_{i,j,ci} K[co,ci,i,j] * in[n, y+i-ph, x+j-pw, ci]
// with zeros outside the input bounds.
Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvLayer& layer);

// ------------------------------------------------------------- maxpool ----

struct MaxPoolResult {
    Tensor output;                        // [N, H/2, W/2, C]
    std::vector<std::size_t> argmax;      // flat input index per output element
    std::vector<std::size_t> input_shape;
};

// 2x2 max pooling with floor semantics (odd trailing row/column dropped).
// Ties go to the first element in row-major window order.
MaxPoolResult maxpool_forward(const Tensor& input);

Tensor maxpool_backward(const Tensor& grad_out, const MaxPoolResult& cache);

// ----------------------------------------------------------- batchnorm ----

struct BatchNormState {
    std::vector<double> gamma, beta;
    std::vector<double> running_mean, running_var;
    double momentum = 0.99;
    double epsilon = 1e-5;

    BatchNormState() = default;
    explicit BatchNormState(std::size_t channels)
        : gamma(channels, 1.0),
          beta(channels, 0.0),
          running_mean(channels, 0.0),
          running_var(channels, 1.0) {}
    std::size_t channels() const { return gamma.size(); }
};

struct BatchNormCache {
    Tensor xhat;                  // normalized input
    std::vector<double> inv_std;  // per channel, 1/sqrt(var + eps)
    std::size_t m = 0;            // elements reduced per channel
};

struct BatchNormGrads {
    Tensor input;
    std::vector<double> gamma, beta;
};

// Per-channel normalization over every non-channel axis. Train mode uses
// batch statistics (biased variance) and updates the running estimates with
// momentum; infer mode uses the running estimates. Train mode requires a
// batch of at least 2 samples.
Tensor batchnorm_forward(const Tensor& input, BatchNormState& state, Mode mode,
                         BatchNormCache* cache = nullptr);

BatchNormGrads batchnorm_backward(const Tensor& grad_out, const BatchNormCache& cache,
                                  const BatchNormState& state);

// --------------------------------------------------------------- dense ----

struct DenseLayer {
    Tensor weights;  // [D, U]
    Tensor bias;     // [U]
};

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

Tensor dense_forward(const Tensor& input, const DenseLayer& layer);
DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const DenseLayer& layer);

// ---------------------------------------------------------------- relu ----

Tensor relu(const Tensor& input);
// Gradient is masked where the forward input was <= 0 (0 at exactly 0).
Tensor relu_backward(const Tensor& grad_out, const Tensor& input);

// ------------------------------------------------------------- dropout ----

struct DropoutResult {
    Tensor output;
    std::vector<std::uint8_t> mask;  // 1 = kept
};

// Inverted dropout: zero with probability rate, scale survivors by
// 1/(1-rate). Infer mode (or rate 0) is the identity with an all-ones mask.
DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng);

Tensor dropout_backward(const Tensor& grad_out, const std::vector<std::uint8_t>& mask,
                        double rate);

// --------------------------------------------------- softmax + ce loss ----

struct SoftmaxCeResult {
    double loss = 0.0;   // mean over the batch of -log p[label]
    Tensor probs;        // [N, K]
    Tensor grad_logits;  // (p - onehot) / N
};

// Row-stabilized softmax followed by categorical cross-entropy.
SoftmaxCeResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// ---------------------------------------------------------- l2 penalty ----

// factor * sum of squared kernel weights; the gradient contribution is
// 2 * factor * w, added by the training loop.
double l2_penalty(const ConvLayer& layer);
double l2_penalty(const std::vector<ConvLayer>& layers);

// ---------------------------------------------------------------- adam ----

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long long t = 0;
    std::vector<std::vector<double>> m, v;  // parallel to the parameter list
};

// One Adam update over an ordered list of parameter buffers. The first call
// sizes the moment buffers; later calls require identical shapes.
void adam_step(const std::vector<std::vector<double>*>& params,
               const std::vector<const std::vector<double>*>& grads, AdamState& state);

}  // namespace digitrec
