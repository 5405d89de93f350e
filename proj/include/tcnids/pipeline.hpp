#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "tcnids/dataset.hpp"
#include "tcnids/table.hpp"
#include "tcnids/tensor.hpp"

namespace tcnids {

// Numeric matrix with named columns, the working form between encoding and
// model-ready splits.
struct FeatureMatrix {
    Tensor data;  // rows x names.size()
    std::vector<std::string> names;

    std::size_t rows() const { return data.empty() ? 0 : data.extent(0); }
};

// ---------------------------------------------------------------------------
// categorical encoding
// ---------------------------------------------------------------------------

struct ColumnEncoding {
    std::string column;
    // Indicator order: descending frequency in the fitting rows, ties by
    // category string. Everything else lands in the shared rare bucket.
    std::vector<std::string> categories;
};

struct EncodingMap {
    std::vector<ColumnEncoding> encodings;  // one per categorical column, table order

    const ColumnEncoding* find(const std::string& column) const {
        for (const ColumnEncoding& e : encodings) {
            if (e.column == column) return &e;
        }
        return nullptr;
    }
};

// Fits on the given rows only, so a split-aware caller can restrict fitting
// to training rows.
inline EncodingMap fit_encoding(const RawTable& table, const std::vector<std::size_t>& rows,
                                std::size_t max_categories) {
    if (max_categories < 2) {
        throw ArgumentError("fit_encoding: max_categories must be >= 2");
    }
    EncodingMap map;
    for (const Column& col : table.columns) {
        if (col.is_numeric()) continue;
        std::map<std::string, std::size_t> counts;
        for (std::size_t r : rows) ++counts[col.categorical()[r]];
        std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        ColumnEncoding enc;
        enc.column = col.name;
        for (std::size_t i = 0; i < ranked.size() && i < max_categories; ++i) {
            enc.categories.push_back(ranked[i].first);
        }
        map.encodings.push_back(std::move(enc));
    }
    return map;
}

// One-hot expansion: numeric columns pass through under their own names;
// each categorical column becomes one indicator per fitted category, named
// <col>_<k>, plus a <col>_rare bucket that also absorbs unseen categories.
inline FeatureMatrix apply_encoding(const RawTable& table, const EncodingMap& map) {
    std::vector<std::string> names;
    for (const Column& col : table.columns) {
        if (col.is_numeric()) {
            names.push_back(col.name);
        } else {
            const ColumnEncoding* enc = map.find(col.name);
            if (!enc) {
                throw ArgumentError("apply_encoding: no encoding fitted for column '" +
                                    col.name + "'");
            }
            for (std::size_t k = 0; k < enc->categories.size(); ++k) {
                names.push_back(col.name + "_" + std::to_string(k));
            }
            names.push_back(col.name + "_rare");
        }
    }

    FeatureMatrix out;
    out.names = names;
    if (table.rows == 0) {
        out.data = Tensor();
        return out;
    }
    out.data = Tensor({table.rows, names.size()});
    std::size_t offset = 0;
    for (const Column& col : table.columns) {
        if (col.is_numeric()) {
            const auto& values = col.numeric();
            for (std::size_t r = 0; r < table.rows; ++r) out.data(r, offset) = values[r];
            ++offset;
            continue;
        }
        const ColumnEncoding* enc = map.find(col.name);
        std::unordered_map<std::string, std::size_t> index;
        index.reserve(enc->categories.size() * 2);
        for (std::size_t k = 0; k < enc->categories.size(); ++k) {
            index.emplace(enc->categories[k], k);
        }
        const std::size_t rare = enc->categories.size();
        const auto& values = col.categorical();
        for (std::size_t r = 0; r < table.rows; ++r) {
            auto it = index.find(values[r]);
            out.data(r, offset + (it == index.end() ? rare : it->second)) = 1.0;
        }
        offset += rare + 1;
    }
    return out;
}

inline std::pair<FeatureMatrix, EncodingMap> encode_categoricals(const RawTable& table,
                                                                 std::size_t max_categories) {
    std::vector<std::size_t> all(table.rows);
    std::iota(all.begin(), all.end(), 0);
    EncodingMap map = fit_encoding(table, all, max_categories);
    return {apply_encoding(table, map), std::move(map)};
}

// ---------------------------------------------------------------------------
// chi-squared ranking
// ---------------------------------------------------------------------------

struct ChiSquaredRanking {
    // (feature name, statistic), non-increasing by statistic, ties by name.
    std::vector<std::pair<std::string, double>> entries;
};

// Feature-mass formulation: per feature, the observed per-class mass is
// compared against the mass implied by the class priors. Constant features
// are independent of the labels by construction and score exactly 0.
inline ChiSquaredRanking chi2_rank(const FeatureMatrix& X, const std::vector<int>& y,
                                   std::size_t num_classes) {
    const std::size_t n = X.rows();
    const std::size_t f_count = X.names.size();
    if (n != y.size()) {
        throw DimensionError("chi2_rank: " + std::to_string(n) + " rows vs " +
                             std::to_string(y.size()) + " labels");
    }
    std::vector<double> class_counts(num_classes, 0.0);
    for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
            throw LabelError("chi2_rank: label " + std::to_string(label) + " outside [0," +
                             std::to_string(num_classes) + ")");
        }
        class_counts[static_cast<std::size_t>(label)] += 1.0;
    }

    ChiSquaredRanking ranking;
    ranking.entries.reserve(f_count);
    std::vector<double> observed(num_classes);
    for (std::size_t f = 0; f < f_count; ++f) {
        std::fill(observed.begin(), observed.end(), 0.0);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t r = 0; r < n; ++r) {
            const double v = X.data(r, f);
            if (v < 0.0) {
                throw ArgumentError("chi2_rank: negative value in feature '" + X.names[f] +
                                    "' at row " + std::to_string(r));
            }
            observed[static_cast<std::size_t>(y[r])] += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        double statistic = 0.0;
        if (lo != hi) {
            const double total = std::accumulate(observed.begin(), observed.end(), 0.0);
            for (std::size_t c = 0; c < num_classes; ++c) {
                const double expected = class_counts[c] * total / static_cast<double>(n);
                if (expected > 0.0) {
                    const double d = observed[c] - expected;
                    statistic += d * d / expected;
                }
            }
        }
        ranking.entries.emplace_back(X.names[f], statistic);
    }
    std::sort(ranking.entries.begin(), ranking.entries.end(),
              [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
              });
    return ranking;
}

inline std::vector<std::string> select_top_k(const ChiSquaredRanking& ranking, std::size_t k) {
    std::vector<std::string> names;
    const std::size_t take = std::min(k, ranking.entries.size());
    names.reserve(take);
    for (std::size_t i = 0; i < take; ++i) names.push_back(ranking.entries[i].first);
    return names;
}

// Column projection in the order given by names.
inline FeatureMatrix select_features(const FeatureMatrix& X,
                                     const std::vector<std::string>& names) {
    std::vector<std::size_t> indices;
    indices.reserve(names.size());
    for (const std::string& name : names) {
        auto it = std::find(X.names.begin(), X.names.end(), name);
        if (it == X.names.end()) {
            throw ArgumentError("select_features: unknown feature '" + name + "'");
        }
        indices.push_back(static_cast<std::size_t>(it - X.names.begin()));
    }
    FeatureMatrix out;
    out.names = names;
    if (X.rows() == 0) return out;
    out.data = Tensor({X.rows(), names.size()});
    for (std::size_t r = 0; r < X.rows(); ++r) {
        for (std::size_t j = 0; j < indices.size(); ++j) {
            out.data(r, j) = X.data(r, indices[j]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// stratified sampling and splitting
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::size_t>> rows_by_class(const std::vector<int>& labels,
                                                           std::size_t num_classes) {
    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw LabelError("label " + std::to_string(labels[i]) + " outside [0," +
                             std::to_string(num_classes) + ")");
        }
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    return by_class;
}

}  // namespace detail

// Per class c with n_c rows, keeps exactly round(fraction * n_c) rows
// (at least 1), chosen uniformly without replacement. Returned indices are
// ascending, so relative order is preserved.
inline std::vector<std::size_t> stratified_sample_indices(const std::vector<int>& labels,
                                                          std::size_t num_classes,
                                                          double fraction, Rng& rng) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ArgumentError("stratified_sample: fraction must lie in (0,1], got " +
                            std::to_string(fraction));
    }
    auto by_class = detail::rows_by_class(labels, num_classes);
    std::vector<std::size_t> chosen;
    for (auto& rows : by_class) {
        if (rows.empty()) continue;
        std::size_t want = static_cast<std::size_t>(
            std::llround(fraction * static_cast<double>(rows.size())));
        want = std::min(std::max<std::size_t>(want, 1), rows.size());
        // Partial Fisher-Yates: the first `want` slots end up a uniform
        // without-replacement draw.
        for (std::size_t i = 0; i < want; ++i) {
            const std::size_t j = i + rng.below(rows.size() - i);
            std::swap(rows[i], rows[j]);
        }
        chosen.insert(chosen.end(), rows.begin(), rows.begin() + want);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

struct SplitIndices {
    std::vector<std::size_t> train, validation, test;
    std::vector<std::string> warnings;
};

// Largest-remainder allocation per class over (train, validation, test).
// Classes with fewer rows than partitions go entirely to train.
inline SplitIndices stratified_split_indices(const std::vector<int>& labels,
                                             std::size_t num_classes,
                                             const std::array<double, 3>& fractions, Rng& rng) {
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) {
            throw ArgumentError("stratified_split: fractions must be positive");
        }
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
        throw ArgumentError("stratified_split: fractions sum to " + std::to_string(sum) +
                            ", expected 1");
    }

    auto by_class = detail::rows_by_class(labels, num_classes);
    SplitIndices out;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.empty()) continue;
        if (rows.size() < 3) {
            out.warnings.push_back("class " + std::to_string(c) + " has only " +
                                   std::to_string(rows.size()) +
                                   " row(s); all assigned to train");
            out.train.insert(out.train.end(), rows.begin(), rows.end());
            continue;
        }
        fisher_yates_shuffle(rows, rng);

        const double n = static_cast<double>(rows.size());
        std::array<std::size_t, 3> quota;
        std::array<double, 3> remainder;
        std::size_t assigned = 0;
        for (std::size_t p = 0; p < 3; ++p) {
            const double exact = fractions[p] * n;
            quota[p] = static_cast<std::size_t>(std::floor(exact));
            remainder[p] = exact - std::floor(exact);
            assigned += quota[p];
        }
        std::array<std::size_t, 3> order = {0, 1, 2};
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
            return a < b;
        });
        for (std::size_t i = 0; assigned < rows.size(); ++i, ++assigned) {
            ++quota[order[i % 3]];
        }

        std::size_t cursor = 0;
        auto emit = [&](std::vector<std::size_t>& dst, std::size_t count) {
            dst.insert(dst.end(), rows.begin() + cursor, rows.begin() + cursor + count);
            cursor += count;
        };
        emit(out.train, quota[0]);
        emit(out.validation, quota[1]);
        emit(out.test, quota[2]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// ---------------------------------------------------------------------------
// standard scaler
// ---------------------------------------------------------------------------

struct ScalerParams {
    std::vector<std::string> names;
    std::vector<double> means;
    std::vector<double> stds;  // population standard deviation; 0 flags a constant

    std::vector<std::string> constant_features() const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < stds.size(); ++i) {
            if (stds[i] == 0.0) out.push_back(names[i]);
        }
        return out;
    }
};

inline ScalerParams fit_scaler(const FeatureMatrix& X) {
    const std::size_t n = X.rows();
    if (n == 0) throw ArgumentError("fit_scaler: no rows to fit on");
    const std::size_t f_count = X.names.size();
    ScalerParams params;
    params.names = X.names;
    params.means.assign(f_count, 0.0);
    params.stds.assign(f_count, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < f_count; ++f) params.means[f] += X.data(r, f);
    }
    for (double& m : params.means) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t f = 0; f < f_count; ++f) {
            const double d = X.data(r, f) - params.means[f];
            params.stds[f] += d * d;
        }
    }
    for (double& s : params.stds) s = std::sqrt(s / static_cast<double>(n));
    return params;
}

inline FeatureMatrix apply_scaler(const ScalerParams& params, const FeatureMatrix& X) {
    if (params.names != X.names) {
        throw ArgumentError("apply_scaler: feature names do not match the fitted scaler");
    }
    FeatureMatrix out;
    out.names = X.names;
    if (X.rows() == 0) return out;
    out.data = Tensor({X.rows(), X.names.size()});
    for (std::size_t r = 0; r < X.rows(); ++r) {
        for (std::size_t f = 0; f < X.names.size(); ++f) {
            out.data(r, f) =
                params.stds[f] == 0.0 ? 0.0 : (X.data(r, f) - params.means[f]) / params.stds[f];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// synthetic fixture
// ---------------------------------------------------------------------------

struct FixtureConfig {
    std::size_t classes = 15;
    std::size_t per_class = 300;
    std::size_t numeric_features = 32;
    std::size_t categorical_features = 4;
    double separation = 4.0;
};

struct Fixture {
    RawTable table;
    std::vector<int> labels;
    ClassVocabulary vocabulary;
};

// Gaussian numeric features with a class-keyed mean offset plus categorical
// columns whose peak category rotates by class. separation=0 erases every
// class difference.
inline Fixture generate_fixture(const FixtureConfig& cfg, Rng& rng) {
    if (cfg.per_class < 1) throw ArgumentError("generate_fixture: per_class must be >= 1");
    if (cfg.classes < 2 || cfg.classes > edge_iiot_classes().size()) {
        throw ArgumentError("generate_fixture: classes must lie in [2," +
                            std::to_string(edge_iiot_classes().size()) + "]");
    }
    if (cfg.numeric_features == 0) {
        throw ArgumentError("generate_fixture: numeric_features must be >= 1");
    }
    if (cfg.separation < 0.0) {
        throw ArgumentError("generate_fixture: separation must be >= 0");
    }

    Fixture fx;
    const auto& canonical = edge_iiot_classes();
    fx.vocabulary = ClassVocabulary(
        std::vector<std::string>(canonical.begin(), canonical.begin() + cfg.classes));

    const std::size_t n = cfg.classes * cfg.per_class;
    fx.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) fx.labels[i] = static_cast<int>(i / cfg.per_class);
    // Interleave classes so files never depend on generation order.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    fisher_yates_shuffle(order, rng);
    std::vector<int> shuffled(n);
    for (std::size_t i = 0; i < n; ++i) shuffled[i] = fx.labels[order[i]];
    fx.labels = std::move(shuffled);

    fx.table.rows = n;
    // Keeping every value non-negative satisfies the chi-squared
    // precondition; the shift is far enough out that clamping is a formality.
    const double shift = cfg.separation + 8.0;
    for (std::size_t f = 0; f < cfg.numeric_features; ++f) {
        Column col;
        col.name = "feat_" + std::to_string(f);
        NumericColumn data;
        data.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = static_cast<std::size_t>(fx.labels[i]);
            const double mean =
                shift + (f == c % cfg.numeric_features ? cfg.separation : 0.0);
            data.values[i] = std::max(0.0, mean + rng.normal());
        }
        col.data = std::move(data);
        fx.table.columns.push_back(std::move(col));
    }

    const std::size_t vocab_size = 6;
    for (std::size_t j = 0; j < cfg.categorical_features; ++j) {
        Column col;
        col.name = "proto_" + std::to_string(j);
        CategoricalColumn data;
        data.values.resize(n);
        const double alpha = cfg.separation / (cfg.separation + 2.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = static_cast<std::size_t>(fx.labels[i]);
            const std::size_t peak = (c + j) % vocab_size;
            std::size_t pick;
            if (rng.uniform() < alpha) {
                pick = peak;
            } else {
                pick = rng.below(vocab_size);
            }
            data.values[i] = "v" + std::to_string(pick);
        }
        col.data = std::move(data);
        fx.table.columns.push_back(std::move(col));
    }
    return fx;
}

// The fixture as it would arrive from disk: feature columns plus a trailing
// label column.
inline RawTable fixture_table_with_labels(const Fixture& fx,
                                          const std::string& label_column = "Attack_type") {
    RawTable table = fx.table;
    CategoricalColumn labels;
    labels.values.reserve(fx.labels.size());
    for (int l : fx.labels) {
        labels.values.push_back(fx.vocabulary.name(static_cast<std::size_t>(l)));
    }
    Column col;
    col.name = label_column;
    col.data = std::move(labels);
    table.columns.push_back(std::move(col));
    return table;
}

// ---------------------------------------------------------------------------
// end-to-end driver
// ---------------------------------------------------------------------------

inline FeatureMatrix take_feature_rows(const FeatureMatrix& X,
                                       const std::vector<std::size_t>& rows) {
    FeatureMatrix out;
    out.names = X.names;
    if (rows.empty()) return out;
    out.data = Tensor({rows.size(), X.names.size()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t f = 0; f < X.names.size(); ++f) {
            out.data(i, f) = X.data(rows[i], f);
        }
    }
    return out;
}

struct StratifiedSample {
    RawTable table;
    std::vector<int> labels;
};

inline StratifiedSample stratified_sample(const RawTable& table, const std::vector<int>& labels,
                                          std::size_t num_classes, double fraction, Rng& rng) {
    if (table.rows != labels.size()) {
        throw DimensionError("stratified_sample: " + std::to_string(table.rows) + " rows vs " +
                             std::to_string(labels.size()) + " labels");
    }
    const auto keep = stratified_sample_indices(labels, num_classes, fraction, rng);
    StratifiedSample out;
    out.table = take_rows(table, keep);
    out.labels.reserve(keep.size());
    for (std::size_t i : keep) out.labels.push_back(labels[i]);
    return out;
}

// Fields that identify hosts or carry opaque payloads rather than behavior:
// timestamps, addresses, raw protocol blobs.
inline const std::vector<std::string>& default_drop_columns() {
    static const std::vector<std::string> names = {
        "frame.time",       "ip.src_host",          "ip.dst_host",
        "arp.src.proto_ipv4", "arp.dst.proto_ipv4", "icmp.unused",
        "http.file_data",   "http.request.full_uri", "tcp.options",
        "tcp.payload",      "mqtt.msg"};
    return names;
}

struct PipelineConfig {
    std::vector<std::string> drop_list = default_drop_columns();
    std::string label_column = "Attack_type";
    // Secondary label-ish columns that must never leak into features.
    std::vector<std::string> extra_label_columns = {"Attack_label"};
    std::size_t max_categories = 24;
    std::optional<std::size_t> select_k;  // empty keeps every ranked feature
    double reduce_fraction = 0.25;
    std::array<double, 3> split_fractions = {0.7, 0.1, 0.2};
    std::uint64_t seed = 0;
};

struct CleaningReport {
    std::size_t rows_in = 0;
    std::size_t rows_out = 0;
    std::size_t dropped_rows = 0;
    std::vector<std::string> dropped_columns;
    std::size_t imputations = 0;
    std::vector<std::string> warnings;
};

// Everything needed to push new raw rows through the fitted transform.
struct PipelineArtifacts {
    // Union of configured drops, label columns, and dedup casualties; applied
    // (and ignored when absent) before the schema check at inference time.
    std::vector<std::string> removed_columns;
    // Post-removal schema the transform was fitted on, in table order.
    std::vector<std::pair<std::string, ColumnType>> raw_columns;
    EncodingMap encoding;
    ChiSquaredRanking ranking;
    std::vector<std::string> selected;
    ScalerParams scaler;
};

struct PipelineResult {
    DatasetSplit split;
    PipelineArtifacts artifacts;
    CleaningReport report;
    // Per split row, the row index in the loaded table it came from.
    std::vector<std::size_t> train_origin, validation_origin, test_origin;
};

namespace detail {

inline SplitPart gather_part(const FeatureMatrix& X, const std::vector<int>& labels,
                             const std::vector<std::size_t>& rows) {
    SplitPart part;
    part.labels.reserve(rows.size());
    for (std::size_t i : rows) part.labels.push_back(labels[i]);
    if (!rows.empty()) {
        part.features = Tensor({rows.size(), X.names.size()});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t f = 0; f < X.names.size(); ++f) {
                part.features(i, f) = X.data(rows[i], f);
            }
        }
    }
    return part;
}

}  // namespace detail

// Stage order: drop configured columns, dedup rows (labels still attached, so
// equal features with conflicting labels survive), pull labels out, dedup
// feature columns, stratified reduce, then assign split membership. Encoding,
// ranking, and scaling are fitted on the training rows only and applied to
// all three partitions.
inline PipelineResult run_pipeline(const LoadedCsv& loaded, const PipelineConfig& cfg) {
    PipelineResult out;
    CleaningReport& rep = out.report;
    rep.rows_in = loaded.stats.rows_read;
    rep.imputations = loaded.stats.imputations;
    if (loaded.stats.rows_dropped_unlabeled > 0) {
        rep.warnings.push_back(std::to_string(loaded.stats.rows_dropped_unlabeled) +
                               " row(s) without a label were dropped at load time");
    }

    DropResult dropped = drop_columns(loaded.table, cfg.drop_list);
    rep.dropped_columns = dropped.dropped;
    for (const std::string& name : dropped.missing) {
        rep.warnings.push_back("drop-list column '" + name + "' not present");
    }

    RowDedupResult unique_rows = dedup_rows(dropped.table);

    const Column* label_col = unique_rows.table.find(cfg.label_column);
    if (!label_col) {
        throw IngestionError("label column '" + cfg.label_column +
                             "' missing after column drops");
    }
    if (label_col->is_numeric()) {
        throw IngestionError("label column '" + cfg.label_column + "' is not categorical");
    }
    ClassVocabulary vocab = ClassVocabulary::from_labels(label_col->categorical());
    std::vector<int> labels = vocab.encode(label_col->categorical());

    std::vector<std::string> label_names = cfg.extra_label_columns;
    label_names.push_back(cfg.label_column);
    RawTable features = drop_columns(unique_rows.table, label_names).table;

    ColumnDedupResult unique_cols = dedup_columns(features);
    rep.dropped_columns.insert(rep.dropped_columns.end(), unique_cols.dropped.begin(),
                               unique_cols.dropped.end());
    if (unique_cols.table.cols() == 0) {
        throw IngestionError("no feature columns remain after cleaning");
    }

    Rng reduce_rng(derive_seed(cfg.seed, "pipeline-reduce"));
    const auto keep =
        stratified_sample_indices(labels, vocab.size(), cfg.reduce_fraction, reduce_rng);
    RawTable reduced = take_rows(unique_cols.table, keep);
    std::vector<int> reduced_labels;
    reduced_labels.reserve(keep.size());
    for (std::size_t i : keep) reduced_labels.push_back(labels[i]);

    Rng split_rng(derive_seed(cfg.seed, "pipeline-split"));
    SplitIndices parts =
        stratified_split_indices(reduced_labels, vocab.size(), cfg.split_fractions, split_rng);
    rep.warnings.insert(rep.warnings.end(), parts.warnings.begin(), parts.warnings.end());
    if (parts.train.empty()) {
        throw IngestionError("training partition is empty; not enough labeled rows");
    }

    out.artifacts.encoding = fit_encoding(reduced, parts.train, cfg.max_categories);
    FeatureMatrix encoded = apply_encoding(reduced, out.artifacts.encoding);

    std::vector<int> train_labels;
    train_labels.reserve(parts.train.size());
    for (std::size_t i : parts.train) train_labels.push_back(reduced_labels[i]);
    out.artifacts.ranking =
        chi2_rank(take_feature_rows(encoded, parts.train), train_labels, vocab.size());

    std::size_t k = cfg.select_k.value_or(out.artifacts.ranking.entries.size());
    if (k > out.artifacts.ranking.entries.size()) {
        rep.warnings.push_back("requested " + std::to_string(k) + " features, only " +
                               std::to_string(out.artifacts.ranking.entries.size()) +
                               " available");
        k = out.artifacts.ranking.entries.size();
    }
    out.artifacts.selected = select_top_k(out.artifacts.ranking, k);
    if (out.artifacts.selected.empty()) {
        throw ArgumentError("feature selection kept nothing; requested k=" + std::to_string(k));
    }
    FeatureMatrix selected = select_features(encoded, out.artifacts.selected);

    out.artifacts.scaler = fit_scaler(take_feature_rows(selected, parts.train));
    for (const std::string& name : out.artifacts.scaler.constant_features()) {
        rep.warnings.push_back("feature '" + name + "' is constant on train; scaled to 0");
    }
    FeatureMatrix scaled = apply_scaler(out.artifacts.scaler, selected);

    out.split.feature_names = out.artifacts.selected;
    out.split.vocabulary = vocab;
    out.split.train = detail::gather_part(scaled, reduced_labels, parts.train);
    out.split.validation = detail::gather_part(scaled, reduced_labels, parts.validation);
    out.split.test = detail::gather_part(scaled, reduced_labels, parts.test);
    auto origins = [&](const std::vector<std::size_t>& rows) {
        std::vector<std::size_t> o;
        o.reserve(rows.size());
        for (std::size_t i : rows) o.push_back(unique_rows.kept[keep[i]]);
        return o;
    };
    out.train_origin = origins(parts.train);
    out.validation_origin = origins(parts.validation);
    out.test_origin = origins(parts.test);

    out.artifacts.removed_columns = cfg.drop_list;
    out.artifacts.removed_columns.insert(out.artifacts.removed_columns.end(),
                                         label_names.begin(), label_names.end());
    out.artifacts.removed_columns.insert(out.artifacts.removed_columns.end(),
                                         unique_cols.dropped.begin(), unique_cols.dropped.end());
    for (const Column& col : reduced.columns) {
        out.artifacts.raw_columns.emplace_back(
            col.name, col.is_numeric() ? ColumnType::kNumeric : ColumnType::kCategorical);
    }

    rep.rows_out = reduced_labels.size();
    rep.dropped_rows = rep.rows_in - rep.rows_out;
    return out;
}

// Applies the fitted transform to new raw rows: strip removed columns, check
// the remaining schema, encode, select, scale. Row count and order are
// preserved, so outputs line up with the input file.
inline FeatureMatrix transform_for_inference(const RawTable& raw,
                                             const PipelineArtifacts& artifacts) {
    RawTable table = drop_columns(raw, artifacts.removed_columns).table;

    std::map<std::string, ColumnType> want;
    for (const auto& [name, type] : artifacts.raw_columns) want.emplace(name, type);
    std::vector<std::string> problems;
    std::set<std::string> present;
    for (const Column& col : table.columns) {
        present.insert(col.name);
        auto it = want.find(col.name);
        if (it == want.end()) {
            problems.push_back("unexpected column '" + col.name + "'");
        } else if ((it->second == ColumnType::kNumeric) != col.is_numeric()) {
            problems.push_back("column '" + col.name + "' has the wrong type");
        }
    }
    for (const auto& [name, type] : artifacts.raw_columns) {
        if (!present.count(name)) problems.push_back("missing column '" + name + "'");
    }
    if (!problems.empty()) {
        std::string message = "input does not match the preprocessing schema: " + problems[0];
        for (std::size_t i = 1; i < problems.size(); ++i) message += "; " + problems[i];
        throw CompatibilityError(message);
    }

    FeatureMatrix encoded = apply_encoding(table, artifacts.encoding);
    FeatureMatrix selected = select_features(encoded, artifacts.selected);
    return apply_scaler(artifacts.scaler, selected);
}

}  // namespace tcnids
