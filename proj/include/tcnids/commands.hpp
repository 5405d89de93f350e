#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcnids/config.hpp"
#include "tcnids/model_io.hpp"
#include "tcnids/report.hpp"

namespace tcnids {

inline constexpr const char* kDataDirEnv = "TCNIDS_DATA_DIR";
inline constexpr int kSidecarFormatVersion = 1;

inline std::string run_dir(const RunConfig& cfg) {
    return cfg.out_dir + "/" + config_hash(cfg);
}

// Relative data paths fall back to the directory named by TCNIDS_DATA_DIR.
inline std::string resolve_data_path(const std::string& path) {
    namespace fs = std::filesystem;
    if (fs::exists(path)) return path;
    if (fs::path(path).is_relative()) {
        if (const char* base = std::getenv(kDataDirEnv)) {
            const fs::path candidate = fs::path(base) / path;
            if (fs::exists(candidate)) return candidate.string();
        }
    }
    return path;
}

namespace detail {

inline std::string format4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// sidecar: everything preprocess learned, so later commands can reload it
// ---------------------------------------------------------------------------

struct Sidecar {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::map<std::string, std::vector<int>> labels;            // train/validation/test
    std::map<std::string, std::vector<std::size_t>> origins;   // same keys
    PipelineArtifacts artifacts;
};

inline std::string sidecar_path(const std::string& dir) { return dir + "/splits.json"; }

inline void write_sidecar(const std::string& dir, const PipelineResult& result,
                          const std::string& hash, std::uint64_t seed) {
    nlohmann::json j;
    j["format_version"] = kSidecarFormatVersion;
    j["config_hash"] = hash;
    j["seed"] = seed;
    j["feature_names"] = result.split.feature_names;
    j["class_names"] = result.split.vocabulary.names();
    j["labels"] = {{"train", result.split.train.labels},
                   {"validation", result.split.validation.labels},
                   {"test", result.split.test.labels}};
    j["origin_rows"] = {{"train", result.train_origin},
                        {"validation", result.validation_origin},
                        {"test", result.test_origin}};
    j["removed_columns"] = result.artifacts.removed_columns;
    nlohmann::json raw = nlohmann::json::array();
    for (const auto& [name, type] : result.artifacts.raw_columns) {
        raw.push_back({name, type == ColumnType::kNumeric ? "numeric" : "categorical"});
    }
    j["raw_columns"] = raw;
    nlohmann::json enc = nlohmann::json::array();
    for (const ColumnEncoding& e : result.artifacts.encoding.encodings) {
        enc.push_back({{"column", e.column}, {"categories", e.categories}});
    }
    j["encoding"] = enc;
    nlohmann::json rank = nlohmann::json::array();
    for (const auto& [name, stat] : result.artifacts.ranking.entries) {
        rank.push_back({name, stat});
    }
    j["ranking"] = rank;
    j["scaler"] = {{"names", result.artifacts.scaler.names},
                   {"means", result.artifacts.scaler.means},
                   {"stds", result.artifacts.scaler.stds}};
    detail::write_text_file(sidecar_path(dir), j.dump() + "\n");
}

inline Sidecar read_sidecar(const std::string& dir) {
    std::ifstream in(sidecar_path(dir), std::ios::binary);
    if (!in) {
        throw IoError("no preprocessed artifacts under '" + dir +
                      "'; run the preprocess command first");
    }
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("format_version").get<int>() != kSidecarFormatVersion) {
            throw IoError("sidecar '" + sidecar_path(dir) + "' has an unsupported version");
        }
        Sidecar sc;
        sc.config_hash = j.at("config_hash").get<std::string>();
        sc.seed = j.at("seed").get<std::uint64_t>();
        sc.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        sc.class_names = j.at("class_names").get<std::vector<std::string>>();
        for (const char* part : {"train", "validation", "test"}) {
            sc.labels[part] = j.at("labels").at(part).get<std::vector<int>>();
            sc.origins[part] = j.at("origin_rows").at(part).get<std::vector<std::size_t>>();
        }
        sc.artifacts.removed_columns =
            j.at("removed_columns").get<std::vector<std::string>>();
        for (const nlohmann::json& rc : j.at("raw_columns")) {
            sc.artifacts.raw_columns.emplace_back(rc.at(0).get<std::string>(),
                                                  rc.at(1).get<std::string>() == "numeric"
                                                      ? ColumnType::kNumeric
                                                      : ColumnType::kCategorical);
        }
        for (const nlohmann::json& e : j.at("encoding")) {
            ColumnEncoding ce;
            ce.column = e.at("column").get<std::string>();
            ce.categories = e.at("categories").get<std::vector<std::string>>();
            sc.artifacts.encoding.encodings.push_back(std::move(ce));
        }
        for (const nlohmann::json& r : j.at("ranking")) {
            sc.artifacts.ranking.entries.emplace_back(r.at(0).get<std::string>(),
                                                      r.at(1).get<double>());
        }
        sc.artifacts.selected = sc.feature_names;
        sc.artifacts.scaler.names =
            j.at("scaler").at("names").get<std::vector<std::string>>();
        sc.artifacts.scaler.means = j.at("scaler").at("means").get<std::vector<double>>();
        sc.artifacts.scaler.stds = j.at("scaler").at("stds").get<std::vector<double>>();
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("sidecar '" + sidecar_path(dir) + "' is corrupt: " + e.what());
    }
}

inline std::string matrix_path(const std::string& dir, const std::string& part) {
    return dir + "/" + part + ".mat";
}

inline SplitPart load_split_part(const std::string& dir, const Sidecar& sc,
                                 const std::string& part) {
    SplitPart out;
    out.labels = sc.labels.at(part);
    if (!out.labels.empty()) {
        out.features = read_matrix(matrix_path(dir, part));
        if (out.features.extent(0) != out.labels.size()) {
            throw IoError("matrix '" + matrix_path(dir, part) + "' has " +
                          std::to_string(out.features.extent(0)) + " rows but the sidecar " +
                          "lists " + std::to_string(out.labels.size()) + " labels");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// shared model helpers
// ---------------------------------------------------------------------------

inline ModelSpec model_spec_for(const ModelOptions& options, std::size_t feature_count,
                                std::size_t num_classes) {
    if (options.arch == "tcn") {
        TcnConfig cfg;
        cfg.input_length = feature_count;
        cfg.input_channels = 1;
        cfg.num_classes = num_classes;
        cfg.channels = options.channels;
        cfg.kernel_size = options.kernel_size;
        cfg.dilations = options.dilations;
        cfg.block_dropout = options.dropout;
        cfg.head_units = options.head_units;
        cfg.head_dropout = options.head_dropout;
        return build_tcn(cfg);
    }
    if (options.arch == "cnn_baseline") {
        CnnConfig cfg;
        cfg.input_length = feature_count;
        cfg.input_channels = 1;
        cfg.num_classes = num_classes;
        cfg.channels1 = options.cnn_channels1;
        cfg.channels2 = options.cnn_channels2;
        cfg.kernel_size = options.kernel_size;
        cfg.head_units = options.head_units;
        cfg.head_dropout = options.head_dropout;
        return build_cnn_baseline(cfg);
    }
    throw ConfigError("unknown model arch '" + options.arch + "'");
}

inline void check_model_fits(const Model& model, std::size_t feature_count,
                             std::size_t num_classes, const std::string& what) {
    if (model.spec.num_classes != num_classes) {
        throw CompatibilityError("model predicts " + std::to_string(model.spec.num_classes) +
                                 " classes but " + what + " has " +
                                 std::to_string(num_classes));
    }
    if (model.spec.input_length * model.spec.input_channels != feature_count) {
        throw CompatibilityError(
            "model expects " +
            std::to_string(model.spec.input_length * model.spec.input_channels) +
            " features but " + what + " has " + std::to_string(feature_count));
    }
}

struct Prediction {
    int label = 0;
    double probability = 0.0;
};

inline std::vector<Prediction> predict_with_probabilities(const Model& model,
                                                          const Tensor& features) {
    std::vector<Prediction> out;
    if (features.empty()) return out;
    const std::size_t n = features.extent(0);
    out.reserve(n);
    Rng rng(0);  // inference mode never reads it
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t chunk = 256;
    for (std::size_t lo = 0; lo < n; lo += chunk) {
        const std::size_t hi = std::min(n, lo + chunk);
        Tensor batch = detail::gather_batch(features, order, lo, hi,
                                            model.spec.input_length,
                                            model.spec.input_channels);
        ForwardResult fwd = model_forward(model, batch, Mode::kInference, rng);
        Tensor probs = softmax(fwd.logits);
        const std::size_t k = probs.extent(1);
        for (std::size_t b = 0; b < hi - lo; ++b) {
            Prediction p;
            for (std::size_t c = 1; c < k; ++c) {
                if (probs(b, c) > probs(b, static_cast<std::size_t>(p.label))) {
                    p.label = static_cast<int>(c);
                }
            }
            p.probability = probs(b, static_cast<std::size_t>(p.label));
            out.push_back(p);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// fixture
// ---------------------------------------------------------------------------

inline std::string cmd_fixture(const RunConfig& cfg, const std::string& destination,
                               std::ostream& os) {
    if (!cfg.fixture) {
        throw ConfigError("the fixture command needs a [fixture] section in the config");
    }
    Rng rng(derive_seed(cfg.seed, "fixture"));
    Fixture fx = generate_fixture(*cfg.fixture, rng);
    RawTable table = fixture_table_with_labels(fx, cfg.pipeline.label_column);

    std::string path = destination;
    if (path.empty()) path = run_dir(cfg) + "/fixture.csv";
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    write_csv(table, path);

    std::vector<std::size_t> counts(fx.vocabulary.size(), 0);
    for (int l : fx.labels) ++counts[static_cast<std::size_t>(l)];
    os << "wrote " << table.rows << " rows to " << path << "\n";
    for (std::size_t c = 0; c < counts.size(); ++c) {
        os << "  " << fx.vocabulary.name(c) << ": " << counts[c] << "\n";
    }
    return path;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

inline LoadedCsv load_source(const RunConfig& cfg) {
    if (cfg.fixture) {
        Rng rng(derive_seed(cfg.seed, "fixture"));
        Fixture fx = generate_fixture(*cfg.fixture, rng);
        LoadedCsv loaded;
        loaded.table = fixture_table_with_labels(fx, cfg.pipeline.label_column);
        loaded.stats.rows_read = loaded.table.rows;
        return loaded;
    }
    CsvOptions options;
    options.label_column = cfg.pipeline.label_column;
    return load_csv(resolve_data_path(cfg.data), options);
}

inline std::string cmd_preprocess(const RunConfig& cfg, std::ostream& os) {
    validate_run_config(cfg);
    LoadedCsv loaded = load_source(cfg);

    PipelineConfig pcfg = cfg.pipeline;
    pcfg.seed = cfg.seed;
    PipelineResult result = run_pipeline(loaded, pcfg);

    const std::string hash = config_hash(cfg);
    const std::string dir = run_dir(cfg);
    std::filesystem::create_directories(dir);
    if (result.split.train.size()) {
        write_matrix(result.split.train.features, matrix_path(dir, "train"));
    }
    if (result.split.validation.size()) {
        write_matrix(result.split.validation.features, matrix_path(dir, "validation"));
    }
    if (result.split.test.size()) {
        write_matrix(result.split.test.features, matrix_path(dir, "test"));
    }
    write_sidecar(dir, result, hash, cfg.seed);

    const CleaningReport& rep = result.report;
    nlohmann::json cleaning = {{"rows_in", rep.rows_in},
                               {"rows_out", rep.rows_out},
                               {"dropped_rows", rep.dropped_rows},
                               {"dropped_columns", rep.dropped_columns},
                               {"imputations", rep.imputations},
                               {"warnings", rep.warnings}};
    detail::write_text_file(dir + "/cleaning.json", cleaning.dump(2) + "\n");

    os << "read " << rep.rows_in << " rows, kept " << rep.rows_out << " ("
       << rep.imputations << " imputations, " << rep.dropped_columns.size()
       << " columns dropped)\n";
    os << "features: " << result.split.feature_names.size() << "  classes: "
       << result.split.vocabulary.size() << "\n";
    os << "split train/val/test: " << result.split.train.size() << "/"
       << result.split.validation.size() << "/" << result.split.test.size() << "\n";
    for (const std::string& w : rep.warnings) os << "warning: " << w << "\n";
    os << "artifacts: " << dir << "\n";
    return dir;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

inline std::string cmd_train(const RunConfig& cfg, std::ostream& os) {
    validate_run_config(cfg);
    if (!cfg.seed_set) {
        throw ConfigError("training needs an explicit seed (config key or --seed)");
    }
    const std::string dir = run_dir(cfg);
    const std::string hash = config_hash(cfg);
    Sidecar sc = read_sidecar(dir);
    if (sc.config_hash != hash) {
        throw CompatibilityError("sidecar under '" + dir + "' was built from config hash " +
                                 sc.config_hash + ", current config hashes to " + hash);
    }

    SplitPart train_part = load_split_part(dir, sc, "train");
    SplitPart val_part = load_split_part(dir, sc, "validation");
    if (val_part.size() == 0) {
        throw ArgumentError("validation partition is empty; cannot track training");
    }

    ModelSpec spec = model_spec_for(cfg.model, sc.feature_names.size(), sc.class_names.size());
    Model model = init_model(spec, cfg.seed);
    os << cfg.model.arch << ": " << count_parameters(model) << " parameters, "
       << sc.feature_names.size() << " input features\n";

    TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    Rng rng(derive_seed(cfg.seed, "train"));
    std::vector<EpochLog> logs = train(model, train_part, val_part, tcfg, rng);
    for (const EpochLog& log : logs) {
        os << "epoch " << log.epoch << "/" << tcfg.epochs << "  train_loss "
           << detail::format4(log.train_loss) << "  train_acc "
           << detail::format4(log.train_accuracy) << "  val_loss "
           << detail::format4(log.val_loss) << "  val_acc "
           << detail::format4(log.val_accuracy) << "  (" << detail::format4(log.seconds)
           << "s)\n";
    }

    const std::string model_path = dir + "/model_" + cfg.model.arch + ".json";
    save_model(model, model_path,
               {{"arch", cfg.model.arch}, {"config_hash", hash}});
    write_epoch_logs(logs, dir + "/train_log_" + cfg.model.arch + ".jsonl");
    if (!logs.empty()) {
        os << "final validation: accuracy " << detail::format4(logs.back().val_accuracy)
           << ", loss " << detail::format4(logs.back().val_loss) << "\n";
    }
    os << "model: " << model_path << "\n";
    return model_path;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluationRow {
    std::string name;
    double accuracy = 0.0;
    double loss = 0.0;
};

namespace detail {

inline std::string comparison_table(const std::vector<EvaluationRow>& rows) {
    std::size_t width = 5;  // "Model"
    for (const EvaluationRow& r : rows) width = std::max(width, r.name.size());
    std::string out = pad_right("Model", width) + pad_left("Accuracy", 12) +
                      pad_left("Loss", 10) + "\n";
    for (const EvaluationRow& r : rows) {
        out += pad_right(r.name, width) + pad_left(format4(r.accuracy), 12) +
               pad_left(format4(r.loss), 10) + "\n";
    }
    return out;
}

}  // namespace detail

inline std::string canonical_part_name(const std::string& split) {
    if (split == "train") return "train";
    if (split == "val" || split == "validation") return "validation";
    if (split == "test") return "test";
    throw ConfigError("unknown split '" + split + "'; use train, val, or test");
}

// Resolves the artifact directory a model was trained against.
inline std::string dir_for_model(const RunConfig& cfg, const LoadedModel& loaded,
                                 const std::string& model_path) {
    auto it = loaded.overrides.find("config_hash");
    if (it == loaded.overrides.end()) {
        throw CompatibilityError("model '" + model_path +
                                 "' carries no config hash; it was not trained by this tool");
    }
    return cfg.out_dir + "/" + it->second;
}

inline std::vector<EvaluationRow> cmd_evaluate(const RunConfig& cfg,
                                               const std::vector<std::string>& model_paths,
                                               const std::string& split,
                                               const std::string& format, std::ostream& os) {
    if (model_paths.empty()) throw ConfigError("evaluate needs at least one --model");
    if (format != "all" && format != "text" && format != "json" && format != "csv") {
        throw ConfigError("unknown format '" + format + "'; use all, text, json, or csv");
    }
    const std::string part = canonical_part_name(split);
    std::vector<EvaluationRow> rows;
    std::string dir;
    for (const std::string& model_path : model_paths) {
        LoadedModel loaded = load_model(model_path);
        const std::string model_dir = dir_for_model(cfg, loaded, model_path);
        if (dir.empty()) {
            dir = model_dir;
        } else if (dir != model_dir) {
            throw CompatibilityError("models come from different preprocessing runs ('" +
                                     dir + "' vs '" + model_dir +
                                     "'); evaluate them separately");
        }
        Sidecar sc = read_sidecar(model_dir);
        SplitPart data = load_split_part(model_dir, sc, part);
        if (data.size() == 0) {
            throw ArgumentError("the " + part + " partition is empty");
        }
        check_model_fits(loaded.model, sc.feature_names.size(), sc.class_names.size(),
                         "the " + part + " split");

        EvalResult res = evaluate(loaded.model, data);
        std::vector<Prediction> preds =
            predict_with_probabilities(loaded.model, data.features);
        std::vector<int> y_pred;
        y_pred.reserve(preds.size());
        for (const Prediction& p : preds) y_pred.push_back(p.label);
        ConfusionMatrix cm =
            confusion_matrix(data.labels, y_pred, ClassVocabulary(sc.class_names));
        ClassificationReport report = classification_report(cm);

        std::string name = cfg.model.arch;
        auto arch_it = loaded.overrides.find("arch");
        if (arch_it != loaded.overrides.end()) name = arch_it->second;
        for (const EvaluationRow& prior : rows) {
            if (prior.name == name) name += "_" + std::to_string(rows.size());
        }
        const std::string stem = model_dir + "/report_" + name + "_" + part;
        if (format == "all" || format == "text") {
            detail::write_text_file(stem + ".txt",
                                    render_report(report, ReportFormat::kText));
        }
        if (format == "all" || format == "json") {
            detail::write_text_file(stem + ".json",
                                    render_report(report, ReportFormat::kJson));
        }
        if (format == "all" || format == "csv") {
            detail::write_text_file(stem + ".csv", render_report(report, ReportFormat::kCsv));
        }
        const std::string cm_stem = model_dir + "/confusion_" + name + "_" + part;
        detail::write_text_file(cm_stem + ".csv",
                                render_confusion(cm, ConfusionFormat::kCsv));
        if (format == "all") {
            detail::write_text_file(cm_stem + ".svg",
                                    render_confusion(cm, ConfusionFormat::kSvg));
        }
        rows.push_back({name, res.accuracy, res.loss});
    }

    const std::string table = detail::comparison_table(rows);
    os << part << " split:\n" << table;
    if (rows.size() > 1) {
        detail::write_text_file(dir + "/comparison_" + part + ".txt", table);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

inline std::size_t cmd_predict(const RunConfig& cfg, const std::string& model_path,
                               const std::string& csv_path, std::ostream& os) {
    LoadedModel loaded = load_model(model_path);
    const std::string dir = dir_for_model(cfg, loaded, model_path);
    Sidecar sc = read_sidecar(dir);

    CsvOptions options;
    options.label_column = cfg.pipeline.label_column;
    options.require_label = false;
    for (const auto& [name, type] : sc.artifacts.raw_columns) {
        options.forced_types[name] = type;
    }
    LoadedCsv input = load_csv(resolve_data_path(csv_path), options);

    FeatureMatrix features = transform_for_inference(input.table, sc.artifacts);
    check_model_fits(loaded.model, features.names.size(), sc.class_names.size(),
                     "the preprocessing schema");

    std::vector<Prediction> preds =
        predict_with_probabilities(loaded.model, features.data);
    std::string body = "row_index,class_name,probability\n";
    char buf[64];
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::snprintf(buf, sizeof buf, ",%.6f\n", preds[i].probability);
        body += std::to_string(i) + "," +
                sc.class_names.at(static_cast<std::size_t>(preds[i].label)) + buf;
    }
    const std::string out_path = dir + "/predictions.csv";
    detail::write_text_file(out_path, body);
    os << "wrote " << preds.size() << " predictions to " << out_path << "\n";
    return preds.size();
}

}  // namespace tcnids
