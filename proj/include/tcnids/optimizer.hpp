#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcnids/dataset.hpp"
#include "tcnids/model.hpp"

namespace tcnids {

// ---------------------------------------------------------------------------
// adam
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<Tensor> m, v;
    std::size_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-7;
    double learning_rate = 0.001;

    static AdamState init(const std::vector<Tensor>& params, double lr) {
        AdamState s;
        s.learning_rate = lr;
        s.m.reserve(params.size());
        s.v.reserve(params.size());
        for (const Tensor& p : params) {
            s.m.emplace_back(p.shape());
            s.v.emplace_back(p.shape());
        }
        return s;
    }
};

inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                      AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw DimensionError("adam_step: parameter, gradient, and state counts differ");
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t p = 0; p < params.size(); ++p) {
        require_same_shape(params[p], grads[p], "adam_step");
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        Tensor& w = params[p];
        const Tensor& g = grads[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 5;
    double learning_rate = 0.001;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool shuffle = true;
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double seconds = 0.0;
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

namespace detail {

// Copies the selected feature rows into the (batch, steps, channels) layout
// the model consumes. Row-major feature rows are already contiguous, so this
// is a gather.
inline Tensor gather_batch(const Tensor& features, const std::vector<std::size_t>& order,
                           std::size_t lo, std::size_t hi, std::size_t steps,
                           std::size_t channels) {
    const std::size_t dims = features.extent(1);
    Tensor batch({hi - lo, steps, channels});
    for (std::size_t i = lo; i < hi; ++i) {
        const double* src = features.data() + order[i] * dims;
        std::copy(src, src + dims, batch.data() + (i - lo) * dims);
    }
    return batch;
}

inline void check_split_matches_model(const Model& model, const SplitPart& split,
                                      const char* which) {
    if (split.size() == 0) {
        throw ArgumentError(std::string(which) + " split is empty");
    }
    if (split.features.rank() != 2 || split.features.extent(0) != split.labels.size()) {
        throw DimensionError(std::string(which) + " split features " +
                             split.features.shape_str() + " do not match " +
                             std::to_string(split.labels.size()) + " labels");
    }
    const std::size_t want = model.spec.input_length * model.spec.input_channels;
    if (split.features.extent(1) != want) {
        throw DimensionError(std::string(which) + " split has " +
                             std::to_string(split.features.extent(1)) +
                             " features but the model expects " + std::to_string(want));
    }
}

}  // namespace detail

// Inference-mode mean loss and argmax accuracy over the whole split.
inline EvalResult evaluate(const Model& model, const SplitPart& split) {
    detail::check_split_matches_model(model, split, "evaluation");
    const std::size_t n = split.size();
    const std::size_t steps = model.spec.input_length;
    const std::size_t channels = model.spec.input_channels;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    Rng rng(0);  // untouched in inference mode
    double loss_sum = 0.0;
    std::size_t correct = 0;
    const std::size_t chunk = 256;
    for (std::size_t lo = 0; lo < n; lo += chunk) {
        const std::size_t hi = std::min(n, lo + chunk);
        Tensor batch = detail::gather_batch(split.features, order, lo, hi, steps, channels);
        std::vector<int> labels(split.labels.begin() + lo, split.labels.begin() + hi);
        auto fwd = model_forward(model, batch, Mode::kInference, rng);
        auto sm = softmax_xent_forward(fwd.logits, labels);
        loss_sum += sm.loss * static_cast<double>(hi - lo);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const double* row = sm.probs.data() + i * model.spec.num_classes;
            std::size_t best = 0;
            for (std::size_t k = 1; k < model.spec.num_classes; ++k) {
                if (row[k] > row[best]) best = k;
            }
            if (static_cast<int>(best) == labels[i]) ++correct;
        }
    }
    return {loss_sum / static_cast<double>(n), static_cast<double>(correct) / n};
}

// Mini-batch training: per epoch, shuffle, walk batches (final partial batch
// included), forward in train mode, backward, adam step, then log
// inference-mode metrics on both splits. The model is updated in place.
inline std::vector<EpochLog> train(Model& model, const SplitPart& train_split,
                                   const SplitPart& val_split, const TrainConfig& cfg,
                                   Rng& rng) {
    if (cfg.epochs == 0) throw ArgumentError("train: epochs must be >= 1");
    if (cfg.batch_size == 0) throw ArgumentError("train: batch_size must be >= 1");
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw ArgumentError("train: learning_rate must be finite and >= 0");
    }
    detail::check_split_matches_model(model, train_split, "train");
    detail::check_split_matches_model(model, val_split, "validation");

    const std::size_t n = train_split.size();
    const std::size_t steps = model.spec.input_length;
    const std::size_t channels = model.spec.input_channels;
    AdamState state = AdamState::init(model.params, cfg.learning_rate);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochLog> logs;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        if (cfg.shuffle) fisher_yates_shuffle(order, rng);
        std::size_t batch_index = 0;
        for (std::size_t lo = 0; lo < n; lo += cfg.batch_size, ++batch_index) {
            const std::size_t hi = std::min(n, lo + cfg.batch_size);
            Tensor batch =
                detail::gather_batch(train_split.features, order, lo, hi, steps, channels);
            std::vector<int> labels(hi - lo);
            for (std::size_t i = lo; i < hi; ++i) labels[i - lo] = train_split.labels[order[i]];

            auto fwd = model_forward(model, batch, Mode::kTrain, rng);
            auto sm = softmax_xent_forward(fwd.logits, labels);
            if (!std::isfinite(sm.loss)) {
                throw TrainingError("training diverged: non-finite loss at epoch " +
                                    std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
            }
            auto grads = model_backward(model, fwd, labels);
            adam_step(model.params, grads, state);
        }

        EpochLog log;
        log.epoch = epoch;
        EvalResult on_train = evaluate(model, train_split);
        EvalResult on_val = evaluate(model, val_split);
        log.train_loss = on_train.loss;
        log.train_accuracy = on_train.accuracy;
        log.val_loss = on_val.loss;
        log.val_accuracy = on_val.accuracy;
        if (!std::isfinite(log.train_loss) || !std::isfinite(log.val_loss)) {
            throw TrainingError("training diverged: non-finite loss after epoch " +
                                std::to_string(epoch));
        }
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                          .count();
        logs.push_back(log);
    }
    return logs;
}

// One JSON object per line, in epoch order.
inline void write_epoch_logs(const std::vector<EpochLog>& logs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const EpochLog& log : logs) {
        nlohmann::json j;
        j["epoch"] = log.epoch;
        j["train_loss"] = log.train_loss;
        j["train_accuracy"] = log.train_accuracy;
        j["val_loss"] = log.val_loss;
        j["val_accuracy"] = log.val_accuracy;
        j["seconds"] = log.seconds;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace tcnids
