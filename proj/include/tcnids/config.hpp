#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tcnids/optimizer.hpp"
#include "tcnids/pipeline.hpp"

namespace tcnids {

// ---------------------------------------------------------------------------
// minimal TOML reader
// ---------------------------------------------------------------------------
// Flat sections, scalar values (string, integer, float, bool) and single-line
// arrays of scalars. That covers the whole run-config surface; anything
// fancier is rejected with the offending line number.

struct TomlValue {
    enum class Kind { kString, kInteger, kFloat, kBool, kArray };
    Kind kind = Kind::kString;
    std::string text;
    std::int64_t integer = 0;
    double real = 0.0;
    bool flag = false;
    std::vector<TomlValue> items;
    int line = 0;
};

using TomlSection = std::map<std::string, TomlValue>;
using TomlDocument = std::map<std::string, TomlSection>;

namespace detail {

inline std::string toml_trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string strip_toml_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline TomlValue parse_toml_scalar(const std::string& raw, int line) {
    TomlValue v;
    v.line = line;
    if (raw.empty()) {
        throw ConfigError("line " + std::to_string(line) + ": missing value");
    }
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') {
            throw ConfigError("line " + std::to_string(line) + ": unterminated string");
        }
        v.kind = TomlValue::Kind::kString;
        for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
            char c = raw[i];
            if (c == '\\') {
                if (i + 2 >= raw.size()) {
                    throw ConfigError("line " + std::to_string(line) +
                                      ": dangling escape in string");
                }
                const char esc = raw[++i];
                switch (esc) {
                    case '"': c = '"'; break;
                    case '\\': c = '\\'; break;
                    case 'n': c = '\n'; break;
                    case 't': c = '\t'; break;
                    default:
                        throw ConfigError("line " + std::to_string(line) +
                                          ": unsupported escape '\\" + std::string(1, esc) +
                                          "'");
                }
            } else if (c == '"') {
                throw ConfigError("line " + std::to_string(line) +
                                  ": unexpected quote inside string");
            }
            v.text += c;
        }
        return v;
    }
    if (raw == "true" || raw == "false") {
        v.kind = TomlValue::Kind::kBool;
        v.flag = raw == "true";
        return v;
    }
    {
        std::int64_t i = 0;
        auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), i);
        if (ec == std::errc() && p == raw.data() + raw.size()) {
            v.kind = TomlValue::Kind::kInteger;
            v.integer = i;
            v.real = static_cast<double>(i);
            return v;
        }
    }
    {
        double d = 0.0;
        auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), d);
        if (ec == std::errc() && p == raw.data() + raw.size()) {
            v.kind = TomlValue::Kind::kFloat;
            v.real = d;
            return v;
        }
    }
    throw ConfigError("line " + std::to_string(line) + ": cannot parse value '" + raw + "'");
}

inline TomlValue parse_toml_value(const std::string& raw, int line) {
    if (!raw.empty() && raw.front() == '[') {
        if (raw.back() != ']') {
            throw ConfigError("line " + std::to_string(line) +
                              ": arrays must open and close on one line");
        }
        TomlValue v;
        v.kind = TomlValue::Kind::kArray;
        v.line = line;
        const std::string body = toml_trim(raw.substr(1, raw.size() - 2));
        if (body.empty()) return v;
        std::string item;
        bool in_string = false;
        for (std::size_t i = 0; i <= body.size(); ++i) {
            const bool at_end = i == body.size();
            const char c = at_end ? ',' : body[i];
            if (c == '"' && (i == 0 || body[i - 1] != '\\')) in_string = !in_string;
            if (c == ',' && !in_string) {
                v.items.push_back(parse_toml_scalar(toml_trim(item), line));
                item.clear();
            } else {
                item += c;
            }
        }
        return v;
    }
    return parse_toml_scalar(raw, line);
}

}  // namespace detail

inline TomlDocument parse_toml(const std::string& text) {
    TomlDocument doc;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string body = detail::toml_trim(detail::strip_toml_comment(line));
        if (body.empty()) continue;
        if (body.front() == '[') {
            if (body.back() != ']' || body.size() < 3) {
                throw ConfigError("line " + std::to_string(number) + ": malformed section '" +
                                  body + "'");
            }
            section = detail::toml_trim(body.substr(1, body.size() - 2));
            if (section.empty() || section.find('[') != std::string::npos) {
                throw ConfigError("line " + std::to_string(number) + ": malformed section '" +
                                  body + "'");
            }
            doc[section];
            continue;
        }
        const std::size_t eq = [&] {
            bool in_string = false;
            for (std::size_t i = 0; i < body.size(); ++i) {
                if (body[i] == '"') in_string = !in_string;
                if (body[i] == '=' && !in_string) return i;
            }
            return std::string::npos;
        }();
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(number) + ": expected key = value");
        }
        const std::string key = detail::toml_trim(body.substr(0, eq));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(number) + ": empty key");
        }
        if (doc[section].count(key)) {
            throw ConfigError("line " + std::to_string(number) + ": duplicate key '" + key +
                              "'");
        }
        doc[section][key] =
            detail::parse_toml_value(detail::toml_trim(body.substr(eq + 1)), number);
    }
    return doc;
}

inline TomlDocument parse_toml_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_toml(buffer.str());
}

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

struct ModelOptions {
    std::string arch = "tcn";  // or "cnn_baseline"
    std::size_t channels = 64;
    std::size_t kernel_size = 3;
    std::vector<std::size_t> dilations = {1, 2, 4};
    double dropout = 0.1;
    std::size_t head_units = 128;
    double head_dropout = 0.3;
    std::size_t cnn_channels1 = 32;
    std::size_t cnn_channels2 = 64;
};

struct RunConfig {
    std::string data;  // CSV path; empty when the fixture is the source
    std::optional<FixtureConfig> fixture;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    PipelineConfig pipeline;
    ModelOptions model;
    TrainConfig train;
};

namespace detail {

inline const char* kind_name(TomlValue::Kind kind) {
    switch (kind) {
        case TomlValue::Kind::kString: return "string";
        case TomlValue::Kind::kInteger: return "integer";
        case TomlValue::Kind::kFloat: return "float";
        case TomlValue::Kind::kBool: return "bool";
        case TomlValue::Kind::kArray: return "array";
    }
    return "?";
}

[[noreturn]] inline void bad_type(const TomlValue& v, const std::string& key,
                                  const char* wanted) {
    throw ConfigError("line " + std::to_string(v.line) + ": key '" + key + "' must be " +
                      wanted + ", got " + kind_name(v.kind));
}

inline std::string as_string(const TomlValue& v, const std::string& key) {
    if (v.kind != TomlValue::Kind::kString) bad_type(v, key, "a string");
    return v.text;
}

inline bool as_bool(const TomlValue& v, const std::string& key) {
    if (v.kind != TomlValue::Kind::kBool) bad_type(v, key, "true or false");
    return v.flag;
}

inline std::uint64_t as_count(const TomlValue& v, const std::string& key) {
    if (v.kind != TomlValue::Kind::kInteger || v.integer < 0) {
        bad_type(v, key, "a non-negative integer");
    }
    return static_cast<std::uint64_t>(v.integer);
}

inline double as_double(const TomlValue& v, const std::string& key) {
    if (v.kind != TomlValue::Kind::kFloat && v.kind != TomlValue::Kind::kInteger) {
        bad_type(v, key, "a number");
    }
    return v.real;
}

inline std::vector<std::string> as_string_array(const TomlValue& v, const std::string& key) {
    if (v.kind != TomlValue::Kind::kArray) bad_type(v, key, "an array of strings");
    std::vector<std::string> out;
    for (const TomlValue& item : v.items) out.push_back(as_string(item, key));
    return out;
}

inline std::vector<std::size_t> as_count_array(const TomlValue& v, const std::string& key) {
    if (v.kind != TomlValue::Kind::kArray) bad_type(v, key, "an array of integers");
    std::vector<std::size_t> out;
    for (const TomlValue& item : v.items) {
        out.push_back(static_cast<std::size_t>(as_count(item, key)));
    }
    return out;
}

inline std::vector<double> as_double_array(const TomlValue& v, const std::string& key) {
    if (v.kind != TomlValue::Kind::kArray) bad_type(v, key, "an array of numbers");
    std::vector<double> out;
    for (const TomlValue& item : v.items) out.push_back(as_double(item, key));
    return out;
}

}  // namespace detail

inline RunConfig run_config_from_toml(const TomlDocument& doc) {
    RunConfig cfg;
    for (const auto& [section, entries] : doc) {
        if (section.empty()) {
            for (const auto& [key, value] : entries) {
                if (key == "data") {
                    cfg.data = detail::as_string(value, key);
                } else if (key == "out") {
                    cfg.out_dir = detail::as_string(value, key);
                } else if (key == "seed") {
                    cfg.seed = detail::as_count(value, key);
                    cfg.seed_set = true;
                } else {
                    throw ConfigError("line " + std::to_string(value.line) +
                                      ": unknown top-level key '" + key + "'");
                }
            }
        } else if (section == "fixture") {
            FixtureConfig fx;
            for (const auto& [key, value] : entries) {
                if (key == "classes") {
                    fx.classes = detail::as_count(value, key);
                } else if (key == "per_class") {
                    fx.per_class = detail::as_count(value, key);
                } else if (key == "numeric_features") {
                    fx.numeric_features = detail::as_count(value, key);
                } else if (key == "categorical_features") {
                    fx.categorical_features = detail::as_count(value, key);
                } else if (key == "separation") {
                    fx.separation = detail::as_double(value, key);
                } else {
                    throw ConfigError("line " + std::to_string(value.line) +
                                      ": unknown key '" + key + "' in [fixture]");
                }
            }
            cfg.fixture = fx;
        } else if (section == "pipeline") {
            for (const auto& [key, value] : entries) {
                if (key == "drop") {
                    cfg.pipeline.drop_list = detail::as_string_array(value, key);
                } else if (key == "label_column") {
                    cfg.pipeline.label_column = detail::as_string(value, key);
                } else if (key == "extra_label_columns") {
                    cfg.pipeline.extra_label_columns = detail::as_string_array(value, key);
                } else if (key == "max_categories") {
                    cfg.pipeline.max_categories = detail::as_count(value, key);
                } else if (key == "reduce_fraction") {
                    cfg.pipeline.reduce_fraction = detail::as_double(value, key);
                } else if (key == "split_fractions") {
                    const auto f = detail::as_double_array(value, key);
                    if (f.size() != 3) {
                        throw ConfigError("line " + std::to_string(value.line) +
                                          ": split_fractions needs exactly 3 entries");
                    }
                    cfg.pipeline.split_fractions = {f[0], f[1], f[2]};
                } else if (key == "select_k") {
                    cfg.pipeline.select_k = detail::as_count(value, key);
                } else {
                    throw ConfigError("line " + std::to_string(value.line) +
                                      ": unknown key '" + key + "' in [pipeline]");
                }
            }
        } else if (section == "model") {
            for (const auto& [key, value] : entries) {
                if (key == "arch") {
                    cfg.model.arch = detail::as_string(value, key);
                } else if (key == "channels") {
                    cfg.model.channels = detail::as_count(value, key);
                } else if (key == "kernel_size") {
                    cfg.model.kernel_size = detail::as_count(value, key);
                } else if (key == "dilations") {
                    cfg.model.dilations = detail::as_count_array(value, key);
                } else if (key == "dropout") {
                    cfg.model.dropout = detail::as_double(value, key);
                } else if (key == "head_units") {
                    cfg.model.head_units = detail::as_count(value, key);
                } else if (key == "head_dropout") {
                    cfg.model.head_dropout = detail::as_double(value, key);
                } else if (key == "cnn_channels1") {
                    cfg.model.cnn_channels1 = detail::as_count(value, key);
                } else if (key == "cnn_channels2") {
                    cfg.model.cnn_channels2 = detail::as_count(value, key);
                } else {
                    throw ConfigError("line " + std::to_string(value.line) +
                                      ": unknown key '" + key + "' in [model]");
                }
            }
        } else if (section == "train") {
            for (const auto& [key, value] : entries) {
                if (key == "epochs") {
                    cfg.train.epochs = detail::as_count(value, key);
                } else if (key == "learning_rate") {
                    cfg.train.learning_rate = detail::as_double(value, key);
                } else if (key == "batch_size") {
                    cfg.train.batch_size = detail::as_count(value, key);
                } else if (key == "shuffle") {
                    cfg.train.shuffle = detail::as_bool(value, key);
                } else {
                    throw ConfigError("line " + std::to_string(value.line) +
                                      ": unknown key '" + key + "' in [train]");
                }
            }
        } else {
            throw ConfigError("unknown section [" + section + "]");
        }
    }
    return cfg;
}

inline RunConfig run_config_from_toml_file(const std::string& path) {
    try {
        return run_config_from_toml(parse_toml_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void validate_run_config(const RunConfig& cfg) {
    const bool has_file = !cfg.data.empty();
    const bool has_fixture = cfg.fixture.has_value();
    if (has_file == has_fixture) {
        throw ConfigError(has_file
                              ? "both 'data' and [fixture] are set; pick one data source"
                              : "no data source: set 'data' or a [fixture] section");
    }
    if (cfg.model.arch != "tcn" && cfg.model.arch != "cnn_baseline") {
        throw ConfigError("model arch must be 'tcn' or 'cnn_baseline', got '" +
                          cfg.model.arch + "'");
    }
    if (!(cfg.pipeline.reduce_fraction > 0.0) || cfg.pipeline.reduce_fraction > 1.0) {
        throw ConfigError("pipeline reduce_fraction must lie in (0,1]");
    }
}

// Hash of everything that shapes the preprocessed artifacts. Model and train
// settings stay out so several models can share one set of splits.
inline std::string config_hash(const RunConfig& cfg) {
    std::string canon = "v1";
    char buf[40];
    auto put_double = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        canon += buf;
    };
    canon += "|data=";
    canon += cfg.data;
    canon += "|fixture=";
    if (cfg.fixture) {
        const FixtureConfig& fx = *cfg.fixture;
        canon += std::to_string(fx.classes) + "," + std::to_string(fx.per_class) + "," +
                 std::to_string(fx.numeric_features) + "," +
                 std::to_string(fx.categorical_features) + ",";
        put_double(fx.separation);
    }
    canon += "|drop=";
    for (const std::string& name : cfg.pipeline.drop_list) canon += name + ";";
    canon += "|label=" + cfg.pipeline.label_column;
    canon += "|extra=";
    for (const std::string& name : cfg.pipeline.extra_label_columns) canon += name + ";";
    canon += "|maxcat=" + std::to_string(cfg.pipeline.max_categories);
    canon += "|reduce=";
    put_double(cfg.pipeline.reduce_fraction);
    canon += "|split=";
    for (double f : cfg.pipeline.split_fractions) {
        put_double(f);
        canon += ",";
    }
    canon += "|k=";
    canon += cfg.pipeline.select_k ? std::to_string(*cfg.pipeline.select_k) : "all";
    canon += "|seed=" + std::to_string(cfg.seed);
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canon)));
    return buf;
}

}  // namespace tcnids
