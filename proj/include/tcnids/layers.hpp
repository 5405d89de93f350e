#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tcnids/tensor.hpp"

namespace tcnids {

enum class Mode { kTrain, kInference };

namespace detail {

// Accepts a single sequence (T x C) or a batch (B x T x C) and reports the
// flattened extents so ops can share one code path.
struct SeqDims {
    std::size_t batch, steps, channels;
};

inline SeqDims seq_dims(const Tensor& x, const char* op) {
    if (x.rank() == 2) return {1, x.extent(0), x.extent(1)};
    if (x.rank() == 3) return {x.extent(0), x.extent(1), x.extent(2)};
    throw DimensionError(std::string(op) + ": expected rank 2 or 3 input, got " + x.shape_str());
}

inline std::vector<std::size_t> seq_shape(const Tensor& like, std::size_t steps,
                                          std::size_t channels) {
    if (like.rank() == 2) return {steps, channels};
    return {like.extent(0), steps, channels};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// dilated causal convolution
// ---------------------------------------------------------------------------

// y[t,o] = bias[o] + sum_j sum_c kernel[j,c,o] * x[t - (k-1-j)*dilation, c],
// reading x as zero for negative timesteps. The last kernel tap aligns with
// the current step, so outputs never see the future.
inline Tensor conv1d_causal_forward(const Tensor& x, const Tensor& kernel, const Tensor& bias,
                                    std::size_t dilation) {
    const auto [B, T, Cin] = detail::seq_dims(x, "conv1d_causal_forward");
    if (kernel.rank() != 3 || kernel.extent(1) != Cin) {
        throw DimensionError("conv1d_causal_forward: kernel " + kernel.shape_str() +
                             " incompatible with input " + x.shape_str());
    }
    const std::size_t k = kernel.extent(0), Cout = kernel.extent(2);
    if (bias.rank() != 1 || bias.extent(0) != Cout) {
        throw DimensionError("conv1d_causal_forward: bias " + bias.shape_str() + " expected [" +
                             std::to_string(Cout) + "]");
    }
    if (dilation == 0) throw ArgumentError("conv1d_causal_forward: dilation must be >= 1");

    Tensor y(detail::seq_shape(x, T, Cout));
    const double* xd = x.data();
    const double* kd = kernel.data();
    const double* bd = bias.data();
    double* yd = y.data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < T; ++t) {
            double* yrow = yd + (b * T + t) * Cout;
            for (std::size_t o = 0; o < Cout; ++o) yrow[o] = bd[o];
            for (std::size_t j = 0; j < k; ++j) {
                const std::ptrdiff_t tin = static_cast<std::ptrdiff_t>(t) -
                                           static_cast<std::ptrdiff_t>((k - 1 - j) * dilation);
                if (tin < 0) continue;
                const double* xrow = xd + (b * T + static_cast<std::size_t>(tin)) * Cin;
                for (std::size_t c = 0; c < Cin; ++c) {
                    const double xv = xrow[c];
                    if (xv == 0.0) continue;
                    const double* krow = kd + (j * Cin + c) * Cout;
                    for (std::size_t o = 0; o < Cout; ++o) yrow[o] += xv * krow[o];
                }
            }
        }
    }
    return y;
}

struct ConvGrads {
    Tensor grad_x, grad_kernel, grad_bias;
};

inline ConvGrads conv1d_causal_backward(const Tensor& x, const Tensor& kernel,
                                        std::size_t dilation, const Tensor& grad_out) {
    const auto [B, T, Cin] = detail::seq_dims(x, "conv1d_causal_backward");
    const std::size_t k = kernel.extent(0), Cout = kernel.extent(2);
    const auto [gB, gT, gC] = detail::seq_dims(grad_out, "conv1d_causal_backward");
    if (gB != B || gT != T || gC != Cout || kernel.extent(1) != Cin) {
        throw DimensionError("conv1d_causal_backward: grad " + grad_out.shape_str() +
                             " does not match forward call on " + x.shape_str());
    }

    ConvGrads g{Tensor(x.shape()), Tensor(kernel.shape()), Tensor({Cout})};
    const double* xd = x.data();
    const double* kd = kernel.data();
    const double* god = grad_out.data();
    double* gx = g.grad_x.data();
    double* gk = g.grad_kernel.data();
    double* gb = g.grad_bias.data();

    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t t = 0; t < T; ++t) {
            const double* gorow = god + (b * T + t) * Cout;
            for (std::size_t o = 0; o < Cout; ++o) gb[o] += gorow[o];
            for (std::size_t j = 0; j < k; ++j) {
                const std::ptrdiff_t tin = static_cast<std::ptrdiff_t>(t) -
                                           static_cast<std::ptrdiff_t>((k - 1 - j) * dilation);
                if (tin < 0) continue;
                const std::size_t xoff = (b * T + static_cast<std::size_t>(tin)) * Cin;
                const double* xrow = xd + xoff;
                double* gxrow = gx + xoff;
                for (std::size_t c = 0; c < Cin; ++c) {
                    const double* krow = kd + (j * Cin + c) * Cout;
                    double* gkrow = gk + (j * Cin + c) * Cout;
                    const double xv = xrow[c];
                    double acc = 0.0;
                    for (std::size_t o = 0; o < Cout; ++o) {
                        const double go = gorow[o];
                        acc += krow[o] * go;
                        gkrow[o] += xv * go;
                    }
                    gxrow[c] += acc;
                }
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------

inline Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0.0) y[i] = 0.0;
    }
    return y;
}

// Subgradient 0 at exactly 0.
inline Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    require_same_shape(x, grad_out, "relu_backward");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (x[i] <= 0.0) g[i] = 0.0;
    }
    return g;
}

// ---------------------------------------------------------------------------
// dropout
// ---------------------------------------------------------------------------

struct DropoutResult {
    Tensor y, mask;
};

// Inverted dropout: kept elements are scaled by 1/(1-rate) so inference
// needs no rescaling. Inference mode never touches the rng, which keeps the
// stream position independent of evaluation passes.
inline DropoutResult dropout_forward(const Tensor& x, double rate, Rng& rng, Mode mode) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ArgumentError("dropout_forward: rate must lie in [0,1), got " +
                            std::to_string(rate));
    }
    if (mode == Mode::kInference) {
        Tensor mask(x.shape());
        for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = 1.0;
        return {x, std::move(mask)};
    }
    const double keep = 1.0 - rate;
    const double inv_keep = 1.0 / keep;
    Tensor mask(x.shape());
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask[i] = rng.uniform() < keep ? inv_keep : 0.0;
        y[i] = x[i] * mask[i];
    }
    return {std::move(y), std::move(mask)};
}

inline Tensor dropout_backward(const Tensor& mask, const Tensor& grad_out) {
    require_same_shape(mask, grad_out, "dropout_backward");
    return mul(grad_out, mask);
}

// ---------------------------------------------------------------------------
// dense
// ---------------------------------------------------------------------------

// x may be a single vector [D] or a batch [B x D]; y = xW + b.
inline Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.rank() != 2) {
        throw DimensionError("dense_forward: weights must be rank 2, got " + w.shape_str());
    }
    const std::size_t D = w.extent(0), U = w.extent(1);
    if (b.rank() != 1 || b.extent(0) != U) {
        throw DimensionError("dense_forward: bias " + b.shape_str() + " expected [" +
                             std::to_string(U) + "]");
    }
    const bool batched = x.rank() == 2;
    const std::size_t B = batched ? x.extent(0) : 1;
    const std::size_t xd = batched ? x.extent(1) : x.extent(0);
    if (x.rank() > 2 || xd != D) {
        throw DimensionError("dense_forward: input " + x.shape_str() + " incompatible with " +
                             w.shape_str());
    }
    Tensor y(batched ? std::vector<std::size_t>{B, U} : std::vector<std::size_t>{U});
    for (std::size_t i = 0; i < B; ++i) {
        double* yrow = y.data() + i * U;
        for (std::size_t o = 0; o < U; ++o) yrow[o] = b[o];
        const double* xrow = x.data() + i * D;
        for (std::size_t p = 0; p < D; ++p) {
            const double xv = xrow[p];
            if (xv == 0.0) continue;
            const double* wrow = w.data() + p * U;
            for (std::size_t o = 0; o < U; ++o) yrow[o] += xv * wrow[o];
        }
    }
    return y;
}

struct DenseGrads {
    Tensor grad_x, grad_w, grad_b;
};

inline DenseGrads dense_backward(const Tensor& x, const Tensor& w, const Tensor& grad_out) {
    const std::size_t D = w.extent(0), U = w.extent(1);
    const bool batched = x.rank() == 2;
    const std::size_t B = batched ? x.extent(0) : 1;
    if ((batched ? grad_out.extent(1) : grad_out.extent(0)) != U ||
        grad_out.rank() != x.rank()) {
        throw DimensionError("dense_backward: grad " + grad_out.shape_str() +
                             " does not match forward output");
    }
    DenseGrads g{Tensor(x.shape()), Tensor(w.shape()), Tensor({U})};
    for (std::size_t i = 0; i < B; ++i) {
        const double* gorow = grad_out.data() + i * U;
        const double* xrow = x.data() + i * D;
        double* gxrow = g.grad_x.data() + i * D;
        for (std::size_t o = 0; o < U; ++o) g.grad_b[o] += gorow[o];
        for (std::size_t p = 0; p < D; ++p) {
            const double* wrow = w.data() + p * U;
            double* gwrow = g.grad_w.data() + p * U;
            const double xv = xrow[p];
            double acc = 0.0;
            for (std::size_t o = 0; o < U; ++o) {
                acc += wrow[o] * gorow[o];
                gwrow[o] += xv * gorow[o];
            }
            gxrow[p] = acc;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// flatten
// ---------------------------------------------------------------------------

// Row-major reshape: [T x C] -> [T*C], or [B x T x C] -> [B x T*C].
inline Tensor flatten(const Tensor& x) {
    if (x.rank() == 2) return Tensor({x.extent(0) * x.extent(1)}, x.values());
    if (x.rank() == 3) return Tensor({x.extent(0), x.extent(1) * x.extent(2)}, x.values());
    throw DimensionError("flatten: expected rank 2 or 3, got " + x.shape_str());
}

inline Tensor unflatten(const Tensor& x, const std::vector<std::size_t>& shape) {
    Tensor y(shape, x.values());
    return y;
}

// ---------------------------------------------------------------------------
// softmax + cross-entropy
// ---------------------------------------------------------------------------

// Row-wise softmax with max subtraction.
inline Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) {
        throw DimensionError("softmax: logits must be rank 2, got " + logits.shape_str());
    }
    const std::size_t B = logits.extent(0), K = logits.extent(1);
    Tensor probs({B, K});
    for (std::size_t i = 0; i < B; ++i) {
        const double* row = logits.data() + i * K;
        double* prow = probs.data() + i * K;
        double mx = row[0];
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            prow[k] = std::exp(row[k] - mx);
            denom += prow[k];
        }
        for (std::size_t k = 0; k < K; ++k) prow[k] /= denom;
    }
    return probs;
}

struct SoftmaxXent {
    double loss = 0.0;
    Tensor probs;
};

// Fused op: probabilities via max-subtracted softmax, loss via log-sum-exp so
// confident correct predictions cannot overflow to -inf.
inline SoftmaxXent softmax_xent_forward(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw DimensionError("softmax_xent_forward: logits must be rank 2, got " +
                             logits.shape_str());
    }
    const std::size_t B = logits.extent(0), K = logits.extent(1);
    if (labels.size() != B) {
        throw DimensionError("softmax_xent_forward: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(B) + " rows");
    }
    SoftmaxXent out;
    out.probs = Tensor({B, K});
    double total = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= K) {
            throw LabelError("softmax_xent_forward: label " + std::to_string(label) +
                             " at row " + std::to_string(i) + " outside [0," +
                             std::to_string(K) + ")");
        }
        const double* row = logits.data() + i * K;
        double mx = row[0];
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k) denom += std::exp(row[k] - mx);
        const double log_denom = std::log(denom);
        double* prow = out.probs.data() + i * K;
        for (std::size_t k = 0; k < K; ++k) prow[k] = std::exp(row[k] - mx) / denom;
        total += log_denom - (row[static_cast<std::size_t>(label)] - mx);
    }
    out.loss = total / static_cast<double>(B);
    return out;
}

inline Tensor softmax_xent_backward(const Tensor& probs, const std::vector<int>& labels) {
    const std::size_t B = probs.extent(0), K = probs.extent(1);
    if (labels.size() != B) {
        throw DimensionError("softmax_xent_backward: label count does not match probs");
    }
    Tensor g = probs;
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t i = 0; i < B; ++i) {
        double* row = g.data() + i * K;
        row[static_cast<std::size_t>(labels[i])] -= 1.0;
        for (std::size_t k = 0; k < K; ++k) row[k] *= inv_b;
    }
    return g;
}

}  // namespace tcnids
