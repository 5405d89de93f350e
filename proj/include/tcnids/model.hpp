#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tcnids/layers.hpp"
#include "tcnids/tensor.hpp"

namespace tcnids {

// ---------------------------------------------------------------------------
// architecture description
// ---------------------------------------------------------------------------

struct DilatedCausalConvSpec {
    std::size_t out_channels = 0;
    std::size_t kernel_size = 0;
    std::size_t dilation = 1;
};

struct ReluSpec {};

struct DropoutSpec {
    double rate = 0.0;
};

struct DenseSpec {
    std::size_t units = 0;
};

struct FlattenSpec {};

// Two dilated causal convs with relu+dropout after each, an identity skip
// (1x1 projection when channel counts differ), and relu after the addition.
struct ResidualBlockSpec {
    std::size_t out_channels = 0;
    std::size_t kernel_size = 0;
    std::size_t dilation = 1;
    double dropout_rate = 0.0;
};

using LayerSpec = std::variant<DilatedCausalConvSpec, ReluSpec, DropoutSpec, DenseSpec,
                               FlattenSpec, ResidualBlockSpec>;

struct ModelSpec {
    std::size_t input_length = 0;
    std::size_t input_channels = 0;
    std::size_t num_classes = 0;
    std::vector<LayerSpec> layers;
};

namespace detail {

// Shape of the value flowing between layers: a (steps x channels) sequence
// until the first flatten, a feature vector afterwards.
struct FlowShape {
    bool flat = false;
    std::size_t steps = 0, channels = 0;  // valid while !flat
    std::size_t dims = 0;                 // valid while flat
};

inline void check_positive(std::size_t v, const char* what) {
    if (v == 0) throw ArgumentError(std::string(what) + " must be >= 1");
}

inline void check_rate(double rate, const char* what) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ArgumentError(std::string(what) + " must lie in [0,1), got " +
                            std::to_string(rate));
    }
}

}  // namespace detail

// Walks the spec once, validating every layer and reporting the shape each
// layer sees. visit is called as visit(index, layer, incoming_shape).
template <typename Visitor>
inline detail::FlowShape walk_spec(const ModelSpec& spec, Visitor&& visit) {
    detail::check_positive(spec.input_length, "ModelSpec.input_length");
    detail::check_positive(spec.input_channels, "ModelSpec.input_channels");
    detail::check_positive(spec.num_classes, "ModelSpec.num_classes");

    detail::FlowShape shape{false, spec.input_length, spec.input_channels, 0};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& layer = spec.layers[i];
        visit(i, layer, shape);
        if (const auto* conv = std::get_if<DilatedCausalConvSpec>(&layer)) {
            detail::check_positive(conv->out_channels, "DilatedCausalConv.out_channels");
            detail::check_positive(conv->kernel_size, "DilatedCausalConv.kernel_size");
            detail::check_positive(conv->dilation, "DilatedCausalConv.dilation");
            if (shape.flat) {
                throw DimensionError("layer " + std::to_string(i) +
                                     ": convolution after flatten");
            }
            shape.channels = conv->out_channels;
        } else if (const auto* block = std::get_if<ResidualBlockSpec>(&layer)) {
            detail::check_positive(block->out_channels, "ResidualBlock.out_channels");
            detail::check_positive(block->kernel_size, "ResidualBlock.kernel_size");
            detail::check_positive(block->dilation, "ResidualBlock.dilation");
            detail::check_rate(block->dropout_rate, "ResidualBlock.dropout_rate");
            if (shape.flat) {
                throw DimensionError("layer " + std::to_string(i) +
                                     ": residual block after flatten");
            }
            shape.channels = block->out_channels;
        } else if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
            detail::check_positive(dense->units, "Dense.units");
            if (!shape.flat) {
                throw DimensionError("layer " + std::to_string(i) +
                                     ": dense layer requires flattened input");
            }
            shape.dims = dense->units;
        } else if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
            detail::check_rate(drop->rate, "Dropout.rate");
        } else if (std::holds_alternative<FlattenSpec>(layer)) {
            if (shape.flat) {
                throw DimensionError("layer " + std::to_string(i) + ": repeated flatten");
            }
            shape = {true, 0, 0, shape.steps * shape.channels};
        }
        // relu: shape unchanged
    }
    return shape;
}

inline void validate_spec(const ModelSpec& spec) {
    auto out = walk_spec(spec, [](std::size_t, const LayerSpec&, const detail::FlowShape&) {});
    if (!out.flat || out.dims != spec.num_classes) {
        throw DimensionError("ModelSpec: final layer must emit " +
                             std::to_string(spec.num_classes) + " logits");
    }
}

// ---------------------------------------------------------------------------
// model with parameters
// ---------------------------------------------------------------------------

struct Model {
    ModelSpec spec;
    std::vector<Tensor> params;
    std::vector<std::string> param_names;
    // params index range of layer i is [layer_param_start[i], layer_param_start[i+1])
    std::vector<std::size_t> layer_param_start;
    std::uint64_t init_seed = 0;
};

// Residual block with differing channel counts carries a 1x1 projection:
// params are conv1.kernel, conv1.bias, conv2.kernel, conv2.bias[, proj.kernel,
// proj.bias] in that order.
inline Model init_model(const ModelSpec& spec, std::uint64_t seed) {
    validate_spec(spec);
    Model model;
    model.spec = spec;
    model.init_seed = seed;
    Rng rng(derive_seed(seed, "model-init"));

    auto add_conv = [&](const std::string& name, std::size_t k, std::size_t cin,
                        std::size_t cout) {
        model.params.push_back(glorot_uniform(rng, k * cin, k * cout, {k, cin, cout}));
        model.param_names.push_back(name + ".kernel");
        model.params.push_back(Tensor({cout}));
        model.param_names.push_back(name + ".bias");
    };
    auto add_dense = [&](const std::string& name, std::size_t d, std::size_t u) {
        model.params.push_back(glorot_uniform(rng, d, u, {d, u}));
        model.param_names.push_back(name + ".weight");
        model.params.push_back(Tensor({u}));
        model.param_names.push_back(name + ".bias");
    };

    walk_spec(spec, [&](std::size_t i, const LayerSpec& layer, const detail::FlowShape& in) {
        model.layer_param_start.push_back(model.params.size());
        const std::string prefix = "layer" + std::to_string(i);
        if (const auto* conv = std::get_if<DilatedCausalConvSpec>(&layer)) {
            add_conv(prefix, conv->kernel_size, in.channels, conv->out_channels);
        } else if (const auto* block = std::get_if<ResidualBlockSpec>(&layer)) {
            add_conv(prefix + ".conv1", block->kernel_size, in.channels, block->out_channels);
            add_conv(prefix + ".conv2", block->kernel_size, block->out_channels,
                     block->out_channels);
            if (in.channels != block->out_channels) {
                add_conv(prefix + ".proj", 1, in.channels, block->out_channels);
            }
        } else if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
            add_dense(prefix, in.dims, dense->units);
        }
    });
    model.layer_param_start.push_back(model.params.size());
    return model;
}

inline std::size_t count_parameters(const Model& model) {
    std::size_t n = 0;
    for (const Tensor& p : model.params) n += p.size();
    return n;
}

// 1 + sum of (kernel_size - 1) * dilation over every conv, counting both
// convs in a residual block; 1x1 projections add nothing.
inline std::size_t receptive_field(const ModelSpec& spec) {
    std::size_t rf = 1;
    for (const LayerSpec& layer : spec.layers) {
        if (const auto* conv = std::get_if<DilatedCausalConvSpec>(&layer)) {
            rf += (conv->kernel_size - 1) * conv->dilation;
        } else if (const auto* block = std::get_if<ResidualBlockSpec>(&layer)) {
            rf += 2 * (block->kernel_size - 1) * block->dilation;
        }
    }
    return rf;
}

// ---------------------------------------------------------------------------
// forward / backward
// ---------------------------------------------------------------------------

struct LayerCache {
    Tensor x;        // layer input
    Tensor preact1;  // residual block: first conv output
    Tensor mask1;    // dropout mask (plain dropout layers use this slot too)
    Tensor drop1;    // residual block: second conv input
    Tensor preact2;  // residual block: second conv output
    Tensor mask2;
    Tensor sum;      // residual block: branch + skip before the final relu
};

struct ForwardResult {
    Tensor logits;
    std::vector<LayerCache> caches;
};

namespace detail {

struct ResidualParamRefs {
    const Tensor *k1, *b1, *k2, *b2;
    const Tensor *pk = nullptr, *pb = nullptr;  // null when the skip is identity
};

inline ResidualParamRefs residual_refs(const std::vector<Tensor>& params, std::size_t start,
                                       bool has_proj) {
    ResidualParamRefs r{&params[start], &params[start + 1], &params[start + 2],
                        &params[start + 3]};
    if (has_proj) {
        r.pk = &params[start + 4];
        r.pb = &params[start + 5];
    }
    return r;
}

}  // namespace detail

inline Tensor residual_block_forward(const Tensor& x, const detail::ResidualParamRefs& p,
                                     std::size_t dilation, double dropout_rate, Rng& rng,
                                     Mode mode, LayerCache& cache) {
    cache.x = x;
    cache.preact1 = conv1d_causal_forward(x, *p.k1, *p.b1, dilation);
    Tensor r1 = relu_forward(cache.preact1);
    auto d1 = dropout_forward(r1, dropout_rate, rng, mode);
    cache.mask1 = std::move(d1.mask);
    cache.drop1 = std::move(d1.y);
    cache.preact2 = conv1d_causal_forward(cache.drop1, *p.k2, *p.b2, dilation);
    Tensor r2 = relu_forward(cache.preact2);
    auto d2 = dropout_forward(r2, dropout_rate, rng, mode);
    cache.mask2 = std::move(d2.mask);
    Tensor skip = p.pk ? conv1d_causal_forward(x, *p.pk, *p.pb, 1) : x;
    cache.sum = add(d2.y, skip);
    return relu_forward(cache.sum);
}

struct ResidualGrads {
    Tensor grad_x;
    Tensor gk1, gb1, gk2, gb2;
    std::optional<Tensor> gpk, gpb;
};

inline ResidualGrads residual_block_backward(const detail::ResidualParamRefs& p,
                                             std::size_t dilation, const LayerCache& cache,
                                             const Tensor& grad_y) {
    ResidualGrads out;
    Tensor gsum = relu_backward(cache.sum, grad_y);
    // branch: dropout2 <- relu2 <- conv2 <- dropout1 <- relu1 <- conv1
    Tensor g = dropout_backward(cache.mask2, gsum);
    g = relu_backward(cache.preact2, g);
    ConvGrads c2 = conv1d_causal_backward(cache.drop1, *p.k2, dilation, g);
    out.gk2 = std::move(c2.grad_kernel);
    out.gb2 = std::move(c2.grad_bias);
    g = dropout_backward(cache.mask1, c2.grad_x);
    g = relu_backward(cache.preact1, g);
    ConvGrads c1 = conv1d_causal_backward(cache.x, *p.k1, dilation, g);
    out.gk1 = std::move(c1.grad_kernel);
    out.gb1 = std::move(c1.grad_bias);
    // skip path
    if (p.pk) {
        ConvGrads cp = conv1d_causal_backward(cache.x, *p.pk, 1, gsum);
        out.gpk = std::move(cp.grad_kernel);
        out.gpb = std::move(cp.grad_bias);
        out.grad_x = add(c1.grad_x, cp.grad_x);
    } else {
        out.grad_x = add(c1.grad_x, gsum);
    }
    return out;
}

// Runs the batch through every layer. rng feeds dropout masks and is only
// consumed in train mode.
inline ForwardResult model_forward(const Model& model, const Tensor& batch, Mode mode,
                                   Rng& rng) {
    if (batch.rank() != 3 || batch.extent(1) != model.spec.input_length ||
        batch.extent(2) != model.spec.input_channels) {
        throw DimensionError(
            "model_forward: batch " + batch.shape_str() + " does not match input [Bx" +
            std::to_string(model.spec.input_length) + "x" +
            std::to_string(model.spec.input_channels) + "]");
    }
    ForwardResult result;
    result.caches.resize(model.spec.layers.size());
    Tensor cur = batch;
    walk_spec(model.spec, [&](std::size_t i, const LayerSpec& layer,
                              const detail::FlowShape& in) {
        LayerCache& cache = result.caches[i];
        const std::size_t start = model.layer_param_start[i];
        if (const auto* conv = std::get_if<DilatedCausalConvSpec>(&layer)) {
            cache.x = std::move(cur);
            cur = conv1d_causal_forward(cache.x, model.params[start], model.params[start + 1],
                                        conv->dilation);
        } else if (const auto* block = std::get_if<ResidualBlockSpec>(&layer)) {
            const bool proj = in.channels != block->out_channels;
            auto refs = detail::residual_refs(model.params, start, proj);
            Tensor x = std::move(cur);
            cur = residual_block_forward(x, refs, block->dilation, block->dropout_rate, rng,
                                         mode, cache);
        } else if (std::holds_alternative<ReluSpec>(layer)) {
            cache.x = std::move(cur);
            cur = relu_forward(cache.x);
        } else if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
            auto d = dropout_forward(cur, drop->rate, rng, mode);
            cache.mask1 = std::move(d.mask);
            cur = std::move(d.y);
        } else if (std::holds_alternative<FlattenSpec>(layer)) {
            cache.x = cur;  // only the shape is needed for backward
            cur = flatten(cur);
        } else if (std::get_if<DenseSpec>(&layer)) {
            cache.x = std::move(cur);
            cur = dense_forward(cache.x, model.params[start], model.params[start + 1]);
        }
    });
    result.logits = std::move(cur);
    return result;
}

// Gradients of the mean cross-entropy loss, one tensor per parameter, in
// model.params order.
inline std::vector<Tensor> model_backward(const Model& model, const ForwardResult& fwd,
                                          const std::vector<int>& labels) {
    auto sm = softmax_xent_forward(fwd.logits, labels);
    Tensor grad = softmax_xent_backward(sm.probs, labels);

    std::vector<Tensor> grads;
    grads.reserve(model.params.size());
    for (const Tensor& p : model.params) grads.emplace_back(p.shape());

    // Incoming channel counts per layer, for projection detection.
    std::vector<detail::FlowShape> in_shapes(model.spec.layers.size());
    walk_spec(model.spec, [&](std::size_t i, const LayerSpec&, const detail::FlowShape& in) {
        in_shapes[i] = in;
    });

    for (std::size_t idx = model.spec.layers.size(); idx-- > 0;) {
        const LayerSpec& layer = model.spec.layers[idx];
        const LayerCache& cache = fwd.caches[idx];
        const std::size_t start = model.layer_param_start[idx];
        if (const auto* conv = std::get_if<DilatedCausalConvSpec>(&layer)) {
            ConvGrads g =
                conv1d_causal_backward(cache.x, model.params[start], conv->dilation, grad);
            grads[start] = std::move(g.grad_kernel);
            grads[start + 1] = std::move(g.grad_bias);
            grad = std::move(g.grad_x);
        } else if (const auto* block = std::get_if<ResidualBlockSpec>(&layer)) {
            const bool proj = in_shapes[idx].channels != block->out_channels;
            auto refs = detail::residual_refs(model.params, start, proj);
            ResidualGrads g = residual_block_backward(refs, block->dilation, cache, grad);
            grads[start] = std::move(g.gk1);
            grads[start + 1] = std::move(g.gb1);
            grads[start + 2] = std::move(g.gk2);
            grads[start + 3] = std::move(g.gb2);
            if (proj) {
                grads[start + 4] = std::move(*g.gpk);
                grads[start + 5] = std::move(*g.gpb);
            }
            grad = std::move(g.grad_x);
        } else if (std::holds_alternative<ReluSpec>(layer)) {
            grad = relu_backward(cache.x, grad);
        } else if (std::get_if<DropoutSpec>(&layer)) {
            grad = dropout_backward(cache.mask1, grad);
        } else if (std::holds_alternative<FlattenSpec>(layer)) {
            grad = unflatten(grad, cache.x.shape());
        } else if (std::get_if<DenseSpec>(&layer)) {
            DenseGrads g = dense_backward(cache.x, model.params[start], grad);
            grads[start] = std::move(g.grad_w);
            grads[start + 1] = std::move(g.grad_b);
            grad = std::move(g.grad_x);
        }
    }
    return grads;
}

// Output of the conv stack before the first flatten; used by causality and
// receptive-field probes.
inline Tensor forward_features(const Model& model, const Tensor& batch) {
    Rng rng(0);
    Tensor cur = batch;
    for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
        const LayerSpec& layer = model.spec.layers[i];
        if (std::holds_alternative<FlattenSpec>(layer)) break;
        const std::size_t start = model.layer_param_start[i];
        if (const auto* conv = std::get_if<DilatedCausalConvSpec>(&layer)) {
            cur = conv1d_causal_forward(cur, model.params[start], model.params[start + 1],
                                        conv->dilation);
        } else if (const auto* block = std::get_if<ResidualBlockSpec>(&layer)) {
            const bool proj = model.layer_param_start[i + 1] - start == 6;
            auto refs = detail::residual_refs(model.params, start, proj);
            LayerCache scratch;
            cur = residual_block_forward(cur, refs, block->dilation, block->dropout_rate, rng,
                                         Mode::kInference, scratch);
        } else if (std::holds_alternative<ReluSpec>(layer)) {
            cur = relu_forward(cur);
        }
        // dropout is identity here (inference)
    }
    return cur;
}

// Argmax class per row, dropout off; ties go to the lowest class index.
inline std::vector<int> predict(const Model& model, const Tensor& batch) {
    Rng rng(0);
    ForwardResult fwd = model_forward(model, batch, Mode::kInference, rng);
    const Tensor probs = softmax(fwd.logits);
    const std::size_t B = probs.extent(0), K = probs.extent(1);
    std::vector<int> out(B, 0);
    for (std::size_t i = 0; i < B; ++i) {
        const double* row = probs.data() + i * K;
        std::size_t best = 0;
        for (std::size_t k = 1; k < K; ++k) {
            if (row[k] > row[best]) best = k;
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

// ---------------------------------------------------------------------------
// builders
// ---------------------------------------------------------------------------

struct TcnConfig {
    std::size_t input_length = 92;
    std::size_t input_channels = 1;
    std::size_t num_classes = 15;
    std::size_t channels = 64;
    std::size_t kernel_size = 3;
    std::vector<std::size_t> dilations = {1, 2, 4};
    double block_dropout = 0.1;
    std::size_t head_units = 128;
    double head_dropout = 0.3;
};

inline ModelSpec build_tcn(const TcnConfig& cfg) {
    if (cfg.dilations.empty()) throw ArgumentError("build_tcn: dilations must be non-empty");
    ModelSpec spec;
    spec.input_length = cfg.input_length;
    spec.input_channels = cfg.input_channels;
    spec.num_classes = cfg.num_classes;
    for (std::size_t d : cfg.dilations) {
        spec.layers.push_back(
            ResidualBlockSpec{cfg.channels, cfg.kernel_size, d, cfg.block_dropout});
    }
    spec.layers.push_back(FlattenSpec{});
    spec.layers.push_back(DenseSpec{cfg.head_units});
    spec.layers.push_back(ReluSpec{});
    spec.layers.push_back(DropoutSpec{cfg.head_dropout});
    spec.layers.push_back(DenseSpec{cfg.num_classes});
    validate_spec(spec);
    return spec;
}

struct CnnConfig {
    std::size_t input_length = 92;
    std::size_t input_channels = 1;
    std::size_t num_classes = 15;
    std::size_t channels1 = 32;
    std::size_t channels2 = 64;
    std::size_t kernel_size = 3;
    std::size_t head_units = 128;
    double head_dropout = 0.3;
};

// Plain undilated stack used as the comparison baseline.
inline ModelSpec build_cnn_baseline(const CnnConfig& cfg) {
    ModelSpec spec;
    spec.input_length = cfg.input_length;
    spec.input_channels = cfg.input_channels;
    spec.num_classes = cfg.num_classes;
    spec.layers.push_back(DilatedCausalConvSpec{cfg.channels1, cfg.kernel_size, 1});
    spec.layers.push_back(ReluSpec{});
    spec.layers.push_back(DilatedCausalConvSpec{cfg.channels2, cfg.kernel_size, 1});
    spec.layers.push_back(ReluSpec{});
    spec.layers.push_back(FlattenSpec{});
    spec.layers.push_back(DenseSpec{cfg.head_units});
    spec.layers.push_back(ReluSpec{});
    spec.layers.push_back(DropoutSpec{cfg.head_dropout});
    spec.layers.push_back(DenseSpec{cfg.num_classes});
    validate_spec(spec);
    return spec;
}

}  // namespace tcnids
