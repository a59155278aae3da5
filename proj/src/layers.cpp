#include "digitrec/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace digitrec {

namespace {

// Repacks [Cout, Cin, kh, kw] kernels to [kh, kw, Cin, Cout] so the channel
// loops below run over contiguous memory.
std::vector<double> pack_hwio(const Tensor& kernels) {
    const std::size_t co_n = kernels.dim(0), ci_n = kernels.dim(1);
    const std::size_t kh = kernels.dim(2), kw = kernels.dim(3);
    std::vector<double> packed(kernels.size());
    for (std::size_t co = 0; co < co_n; ++co)
        for (std::size_t ci = 0; ci < ci_n; ++ci)
            for (std::size_t i = 0; i < kh; ++i)
                for (std::size_t j = 0; j < kw; ++j)
                    packed[(((i * kw + j) * ci_n) + ci) * co_n + co] =
                        kernels.data[((co * ci_n + ci) * kh + i) * kw + j];
    return packed;
}

void check_conv_shapes(const Tensor& input, const ConvLayer& layer) {
    input.require_rank(4, "conv input must be N x H x W x C");
    layer.kernels.require_rank(4, "conv kernels must be Cout x Cin x kh x kw");
    if (input.dim(3) != layer.kernels.dim(1))
        raise(Errc::shape_mismatch, "conv input channels do not match the kernels");
    if (layer.kernels.dim(2) % 2 == 0 || layer.kernels.dim(3) % 2 == 0)
        raise(Errc::shape_mismatch, "conv kernel sides must be odd for same padding");
    if (layer.bias.size() != layer.kernels.dim(0))
        raise(Errc::shape_mismatch, "conv bias length must equal output channels");
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
    check_conv_shapes(input, layer);
    const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), Ci = input.dim(3);
    const std::size_t Co = layer.kernels.dim(0);
    const std::size_t kh = layer.kernels.dim(2), kw = layer.kernels.dim(3);
    const std::size_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;

    const auto packed = pack_hwio(layer.kernels);
    Tensor out({N, H, W, Co});

    for (std::size_t n = 0; n < N; ++n) {
        const double* in_n = input.data.data() + n * H * W * Ci;
        double* out_n = out.data.data() + n * H * W * Co;
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x)
                std::memcpy(out_n + (y * W + x) * Co, layer.bias.data.data(),
                            Co * sizeof(double));
            for (std::size_t i = 0; i < kh; ++i) {
                const long long sy = static_cast<long long>(y + i) - static_cast<long long>(ph);
                if (sy < 0 || sy >= static_cast<long long>(H)) continue;
                for (std::size_t j = 0; j < kw; ++j) {
                    const long long off = static_cast<long long>(j) - static_cast<long long>(pw);
                    const std::size_t x_lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
                    const std::size_t x_hi =
                        off > 0 ? W - static_cast<std::size_t>(off) : W;
                    const double* kp = packed.data() + (i * kw + j) * Ci * Co;
                    for (std::size_t x = x_lo; x < x_hi; ++x) {
                        const std::size_t sx = static_cast<std::size_t>(
                            static_cast<long long>(x) + off);
                        const double* in_px = in_n + (static_cast<std::size_t>(sy) * W + sx) * Ci;
                        double* out_px = out_n + (y * W + x) * Co;
                        for (std::size_t ci = 0; ci < Ci; ++ci) {
                            const double v = in_px[ci];
                            const double* krow = kp + ci * Co;
                            for (std::size_t co = 0; co < Co; ++co) out_px[co] += v * krow[co];
                        }
                    }
                }
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const ConvLayer& layer) {
    check_conv_shapes(input, layer);
    grad_out.require_rank(4, "conv grad_out must be N x H x W x C");
    const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), Ci = input.dim(3);
    const std::size_t Co = layer.kernels.dim(0);
    const std::size_t kh = layer.kernels.dim(2), kw = layer.kernels.dim(3);
    const std::size_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
    if (grad_out.shape != std::vector<std::size_t>{N, H, W, Co})
        raise(Errc::shape_mismatch, "conv grad_out shape does not match the forward output");

    const auto packed = pack_hwio(layer.kernels);
    std::vector<double> gk_packed(layer.kernels.size(), 0.0);

    ConvGrads grads;
    grads.input = Tensor(input.shape);
    grads.kernels = Tensor(layer.kernels.shape);
    grads.bias = Tensor(layer.bias.shape);

    for (std::size_t n = 0; n < N; ++n) {
        const double* in_n = input.data.data() + n * H * W * Ci;
        const double* go_n = grad_out.data.data() + n * H * W * Co;
        double* gi_n = grads.input.data.data() + n * H * W * Ci;
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                const double* go_px = go_n + (y * W + x) * Co;
                for (std::size_t co = 0; co < Co; ++co) grads.bias.data[co] += go_px[co];
            }
            for (std::size_t i = 0; i < kh; ++i) {
                const long long sy = static_cast<long long>(y + i) - static_cast<long long>(ph);
                if (sy < 0 || sy >= static_cast<long long>(H)) continue;
                for (std::size_t j = 0; j < kw; ++j) {
                    const long long off = static_cast<long long>(j) - static_cast<long long>(pw);
                    const std::size_t x_lo = off < 0 ? static_cast<std::size_t>(-off) : 0;
                    const std::size_t x_hi =
                        off > 0 ? W - static_cast<std::size_t>(off) : W;
                    const double* kp = packed.data() + (i * kw + j) * Ci * Co;
                    double* gkp = gk_packed.data() + (i * kw + j) * Ci * Co;
                    for (std::size_t x = x_lo; x < x_hi; ++x) {
                        const std::size_t sx = static_cast<std::size_t>(
                            static_cast<long long>(x) + off);
                        const double* in_px = in_n + (static_cast<std::size_t>(sy) * W + sx) * Ci;
                        double* gi_px = gi_n + (static_cast<std::size_t>(sy) * W + sx) * Ci;
                        const double* go_px = go_n + (y * W + x) * Co;
                        for (std::size_t ci = 0; ci < Ci; ++ci) {
                            const double v = in_px[ci];
                            const double* krow = kp + ci * Co;
                            double* gkrow = gkp + ci * Co;
                            double acc = 0.0;
                            for (std::size_t co = 0; co < Co; ++co) {
                                acc += krow[co] * go_px[co];
                                gkrow[co] += v * go_px[co];
                            }
                            gi_px[ci] += acc;
                        }
                    }
                }
            }
        }
    }

    // Unpack accumulated kernel gradients back to [Cout, Cin, kh, kw].
    for (std::size_t co = 0; co < Co; ++co)
        for (std::size_t ci = 0; ci < Ci; ++ci)
            for (std::size_t i = 0; i < kh; ++i)
                for (std::size_t j = 0; j < kw; ++j)
                    grads.kernels.data[((co * Ci + ci) * kh + i) * kw + j] =
                        gk_packed[(((i * kw + j) * Ci) + ci) * Co + co];
    return grads;
}

MaxPoolResult maxpool_forward(const Tensor& input) {
    input.require_rank(4, "maxpool input must be N x H x W x C");
    const std::size_t N = input.dim(0), H = input.dim(1), W = input.dim(2), C = input.dim(3);
    const std::size_t Ho = H / 2, Wo = W / 2;

    MaxPoolResult res;
    res.output = Tensor({N, Ho, Wo, C});
    res.argmax.resize(res.output.size());
    res.input_shape = input.shape;

    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t yo = 0; yo < Ho; ++yo)
            for (std::size_t xo = 0; xo < Wo; ++xo)
                for (std::size_t c = 0; c < C; ++c) {
                    std::size_t best_idx = ((n * H + 2 * yo) * W + 2 * xo) * C + c;
                    double best = input.data[best_idx];
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t idx =
                                ((n * H + 2 * yo + dy) * W + 2 * xo + dx) * C + c;
                            if (input.data[idx] > best) {  // strict: ties keep the first
                                best = input.data[idx];
                                best_idx = idx;
                            }
                        }
                    const std::size_t out_idx = ((n * Ho + yo) * Wo + xo) * C + c;
                    res.output.data[out_idx] = best;
                    res.argmax[out_idx] = best_idx;
                }
    return res;
}

Tensor maxpool_backward(const Tensor& grad_out, const MaxPoolResult& cache) {
    if (grad_out.shape != cache.output.shape)
        raise(Errc::shape_mismatch, "maxpool grad_out shape does not match the forward output");
    Tensor grad_input(cache.input_shape);
    for (std::size_t k = 0; k < grad_out.size(); ++k)
        grad_input.data[cache.argmax[k]] += grad_out.data[k];
    return grad_input;
}

Tensor batchnorm_forward(const Tensor& input, BatchNormState& state, Mode mode,
                         BatchNormCache* cache) {
    if (input.rank() < 2) raise(Errc::shape_mismatch, "batchnorm input must have a channel axis");
    const std::size_t C = input.shape.back();
    if (C != state.channels())
        raise(Errc::shape_mismatch, "batchnorm channel count does not match the state");
    const std::size_t m = input.size() / C;

    Tensor out(input.shape);
    if (mode == Mode::infer) {
        std::vector<double> scale(C), shift(C);
        for (std::size_t c = 0; c < C; ++c) {
            const double inv = 1.0 / std::sqrt(state.running_var[c] + state.epsilon);
            scale[c] = state.gamma[c] * inv;
            shift[c] = state.beta[c] - state.running_mean[c] * scale[c];
        }
        for (std::size_t k = 0; k < input.size(); ++k) {
            const std::size_t c = k % C;
            out.data[k] = input.data[k] * scale[c] + shift[c];
        }
        return out;
    }

    if (input.dim(0) < 2)
        raise(Errc::degenerate_batch, "batchnorm train mode needs a batch of at least 2");

    std::vector<double> mean(C, 0.0), var(C, 0.0);
    for (std::size_t k = 0; k < input.size(); ++k) mean[k % C] += input.data[k];
    for (double& v : mean) v /= static_cast<double>(m);
    for (std::size_t k = 0; k < input.size(); ++k) {
        const double d = input.data[k] - mean[k % C];
        var[k % C] += d * d;
    }
    for (double& v : var) v /= static_cast<double>(m);  // biased variance

    std::vector<double> inv_std(C);
    for (std::size_t c = 0; c < C; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + state.epsilon);

    Tensor xhat(input.shape);
    for (std::size_t k = 0; k < input.size(); ++k) {
        const std::size_t c = k % C;
        xhat.data[k] = (input.data[k] - mean[c]) * inv_std[c];
        out.data[k] = state.gamma[c] * xhat.data[k] + state.beta[c];
    }

    for (std::size_t c = 0; c < C; ++c) {
        state.running_mean[c] =
            state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mean[c];
        state.running_var[c] =
            state.momentum * state.running_var[c] + (1.0 - state.momentum) * var[c];
    }

    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
        cache->m = m;
    }
    return out;
}

BatchNormGrads batchnorm_backward(const Tensor& grad_out, const BatchNormCache& cache,
                                  const BatchNormState& state) {
    if (grad_out.shape != cache.xhat.shape)
        raise(Errc::shape_mismatch, "batchnorm grad_out shape does not match the cache");
    const std::size_t C = grad_out.shape.back();
    const double m = static_cast<double>(cache.m);

    BatchNormGrads grads;
    grads.input = Tensor(grad_out.shape);
    grads.gamma.assign(C, 0.0);
    grads.beta.assign(C, 0.0);

    std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
    for (std::size_t k = 0; k < grad_out.size(); ++k) {
        const std::size_t c = k % C;
        sum_g[c] += grad_out.data[k];
        sum_gx[c] += grad_out.data[k] * cache.xhat.data[k];
    }
    for (std::size_t c = 0; c < C; ++c) {
        grads.beta[c] = sum_g[c];
        grads.gamma[c] = sum_gx[c];
    }

    // d/dx of gamma * xhat + beta through the batch mean and variance:
    // gin = gamma * inv_std / m * (m * g - sum(g) - xhat * sum(g * xhat)).
    for (std::size_t k = 0; k < grad_out.size(); ++k) {
        const std::size_t c = k % C;
        grads.input.data[k] = state.gamma[c] * cache.inv_std[c] / m *
                              (m * grad_out.data[k] - sum_g[c] -
                               cache.xhat.data[k] * sum_gx[c]);
    }
    return grads;
}

Tensor dense_forward(const Tensor& input, const DenseLayer& layer) {
    input.require_rank(2, "dense input must be N x D");
    layer.weights.require_rank(2, "dense weights must be D x U");
    const std::size_t N = input.dim(0), D = input.dim(1);
    const std::size_t U = layer.weights.dim(1);
    if (layer.weights.dim(0) != D)
        raise(Errc::shape_mismatch, "dense weight rows do not match the input width");
    if (layer.bias.size() != U)
        raise(Errc::shape_mismatch, "dense bias length must equal the unit count");

    Tensor out({N, U});
    for (std::size_t n = 0; n < N; ++n) {
        double* out_row = out.data.data() + n * U;
        std::memcpy(out_row, layer.bias.data.data(), U * sizeof(double));
        const double* in_row = input.data.data() + n * D;
        for (std::size_t d = 0; d < D; ++d) {
            const double v = in_row[d];
            const double* wrow = layer.weights.data.data() + d * U;
            for (std::size_t u = 0; u < U; ++u) out_row[u] += v * wrow[u];
        }
    }
    return out;
}

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& input, const DenseLayer& layer) {
    input.require_rank(2, "dense input must be N x D");
    grad_out.require_rank(2, "dense grad_out must be N x U");
    const std::size_t N = input.dim(0), D = input.dim(1);
    const std::size_t U = layer.weights.dim(1);
    if (grad_out.dim(0) != N || grad_out.dim(1) != U)
        raise(Errc::shape_mismatch, "dense grad_out shape does not match the forward output");

    DenseGrads grads;
    grads.input = Tensor(input.shape);
    grads.weights = Tensor(layer.weights.shape);
    grads.bias = Tensor(layer.bias.shape);

    for (std::size_t n = 0; n < N; ++n) {
        const double* go_row = grad_out.data.data() + n * U;
        const double* in_row = input.data.data() + n * D;
        double* gi_row = grads.input.data.data() + n * D;
        for (std::size_t u = 0; u < U; ++u) grads.bias.data[u] += go_row[u];
        for (std::size_t d = 0; d < D; ++d) {
            const double v = in_row[d];
            const double* wrow = layer.weights.data.data() + d * U;
            double* gwrow = grads.weights.data.data() + d * U;
            double acc = 0.0;
            for (std::size_t u = 0; u < U; ++u) {
                acc += wrow[u] * go_row[u];
                gwrow[u] += v * go_row[u];
            }
            gi_row[d] = acc;
        }
    }
    return grads;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape);
    for (std::size_t k = 0; k < input.size(); ++k) out.data[k] = std::max(0.0, input.data[k]);
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
    if (grad_out.shape != input.shape)
        raise(Errc::shape_mismatch, "relu grad_out shape does not match the input");
    Tensor grad_input(input.shape);
    for (std::size_t k = 0; k < input.size(); ++k)
        grad_input.data[k] = input.data[k] > 0.0 ? grad_out.data[k] : 0.0;
    return grad_input;
}

DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) raise(Errc::invalid_config, "dropout rate must lie in [0, 1)");
    DropoutResult res;
    res.output = input;
    res.mask.assign(input.size(), 1);
    if (mode == Mode::infer || rate == 0.0) return res;

    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t k = 0; k < input.size(); ++k) {
        if (rng.uniform() < rate) {
            res.mask[k] = 0;
            res.output.data[k] = 0.0;
        } else {
            res.output.data[k] = input.data[k] * scale;
        }
    }
    return res;
}

Tensor dropout_backward(const Tensor& grad_out, const std::vector<std::uint8_t>& mask,
                        double rate) {
    if (grad_out.size() != mask.size())
        raise(Errc::shape_mismatch, "dropout mask size does not match grad_out");
    const double scale = 1.0 / (1.0 - rate);
    Tensor grad_input(grad_out.shape);
    for (std::size_t k = 0; k < grad_out.size(); ++k)
        grad_input.data[k] = mask[k] ? grad_out.data[k] * scale : 0.0;
    return grad_input;
}

SoftmaxCeResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    logits.require_rank(2, "logits must be N x K");
    const std::size_t N = logits.dim(0), K = logits.dim(1);
    if (labels.size() != N) raise(Errc::shape_mismatch, "one label per logit row required");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= K)
            raise(Errc::label_out_of_range, "label outside 0..K-1");

    SoftmaxCeResult res;
    res.probs = Tensor({N, K});
    res.grad_logits = Tensor({N, K});

    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const double* row = logits.data.data() + n * K;
        double* p = res.probs.data.data() + n * K;
        const double mx = *std::max_element(row, row + K);
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            p[k] = std::exp(row[k] - mx);
            denom += p[k];
        }
        for (std::size_t k = 0; k < K; ++k) p[k] /= denom;

        const std::size_t y = static_cast<std::size_t>(labels[n]);
        total += -std::log(std::max(p[y], 1e-300));

        double* g = res.grad_logits.data.data() + n * K;
        for (std::size_t k = 0; k < K; ++k)
            g[k] = (p[k] - (k == y ? 1.0 : 0.0)) / static_cast<double>(N);
    }
    res.loss = total / static_cast<double>(N);
    return res;
}

double l2_penalty(const ConvLayer& layer) {
    double acc = 0.0;
    for (double w : layer.kernels.data) acc += w * w;
    return layer.l2_factor * acc;
}

double l2_penalty(const std::vector<ConvLayer>& layers) {
    double acc = 0.0;
    for (const auto& layer : layers) acc += l2_penalty(layer);
    return acc;
}

void adam_step(const std::vector<std::vector<double>*>& params,
               const std::vector<const std::vector<double>*>& grads, AdamState& state) {
    if (params.size() != grads.size())
        raise(Errc::shape_mismatch, "parameter and gradient lists differ in length");
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i]->size(), 0.0);
            state.v[i].assign(params[i]->size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        raise(Errc::shape_mismatch, "optimizer state does not match the parameter list");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

    for (std::size_t i = 0; i < params.size(); ++i) {
        std::vector<double>& p = *params[i];
        const std::vector<double>& g = *grads[i];
        if (p.size() != g.size() || p.size() != state.m[i].size())
            raise(Errc::shape_mismatch, "adam parameter/gradient size mismatch");
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p[k] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace digitrec
