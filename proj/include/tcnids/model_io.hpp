#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcnids/model.hpp"

namespace tcnids {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline const char* kBase64Chars =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 3 <= bytes.size()) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kBase64Chars[(v >> 18) & 63];
        out += kBase64Chars[(v >> 12) & 63];
        out += kBase64Chars[(v >> 6) & 63];
        out += kBase64Chars[v & 63];
        i += 3;
    }
    const std::size_t rest = bytes.size() - i;
    if (rest == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out += kBase64Chars[(v >> 18) & 63];
        out += kBase64Chars[(v >> 12) & 63];
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kBase64Chars[(v >> 18) & 63];
        out += kBase64Chars[(v >> 12) & 63];
        out += kBase64Chars[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

inline int base64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) {
        throw ModelCorruptError("parameter payload length is not a multiple of 4");
    }
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pads = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) {
                    throw ModelCorruptError("misplaced padding in parameter payload");
                }
                vals[j] = 0;
                ++pads;
            } else {
                vals[j] = base64_value(c);
                if (vals[j] < 0 || pads > 0) {
                    throw ModelCorruptError("invalid character in parameter payload");
                }
            }
        }
        const std::uint32_t v = (static_cast<std::uint32_t>(vals[0]) << 18) |
                                (static_cast<std::uint32_t>(vals[1]) << 12) |
                                (static_cast<std::uint32_t>(vals[2]) << 6) |
                                static_cast<std::uint32_t>(vals[3]);
        out.push_back((v >> 16) & 0xFF);
        if (pads < 2) out.push_back((v >> 8) & 0xFF);
        if (pads < 1) out.push_back(v & 0xFF);
    }
    return out;
}

// Doubles serialize as explicit little-endian byte sequences so files move
// across hosts unchanged.
inline std::vector<std::uint8_t> doubles_to_bytes(const std::vector<double>& values) {
    std::vector<std::uint8_t> bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint64_t u = std::bit_cast<std::uint64_t>(values[i]);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = (u >> (8 * b)) & 0xFF;
    }
    return bytes;
}

inline std::vector<double> bytes_to_doubles(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() % 8 != 0) {
        throw ModelCorruptError("parameter payload is not a whole number of values");
    }
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b) {
            u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        }
        values[i] = std::bit_cast<double>(u);
    }
    return values;
}

inline nlohmann::json layer_to_json(const LayerSpec& layer) {
    nlohmann::json j;
    if (const auto* conv = std::get_if<DilatedCausalConvSpec>(&layer)) {
        j["type"] = "conv";
        j["out_channels"] = conv->out_channels;
        j["kernel_size"] = conv->kernel_size;
        j["dilation"] = conv->dilation;
    } else if (const auto* block = std::get_if<ResidualBlockSpec>(&layer)) {
        j["type"] = "residual_block";
        j["out_channels"] = block->out_channels;
        j["kernel_size"] = block->kernel_size;
        j["dilation"] = block->dilation;
        j["dropout_rate"] = block->dropout_rate;
    } else if (const auto* dense = std::get_if<DenseSpec>(&layer)) {
        j["type"] = "dense";
        j["units"] = dense->units;
    } else if (const auto* drop = std::get_if<DropoutSpec>(&layer)) {
        j["type"] = "dropout";
        j["rate"] = drop->rate;
    } else if (std::holds_alternative<FlattenSpec>(layer)) {
        j["type"] = "flatten";
    } else {
        j["type"] = "relu";
    }
    return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "conv") {
        return DilatedCausalConvSpec{j.at("out_channels").get<std::size_t>(),
                                     j.at("kernel_size").get<std::size_t>(),
                                     j.at("dilation").get<std::size_t>()};
    }
    if (type == "residual_block") {
        return ResidualBlockSpec{
            j.at("out_channels").get<std::size_t>(), j.at("kernel_size").get<std::size_t>(),
            j.at("dilation").get<std::size_t>(), j.at("dropout_rate").get<double>()};
    }
    if (type == "dense") return DenseSpec{j.at("units").get<std::size_t>()};
    if (type == "dropout") return DropoutSpec{j.at("rate").get<double>()};
    if (type == "flatten") return FlattenSpec{};
    if (type == "relu") return ReluSpec{};
    throw ModelCorruptError("unknown layer type '" + type + "'");
}

}  // namespace detail

inline nlohmann::json spec_to_json(const ModelSpec& spec) {
    nlohmann::json j;
    j["input_length"] = spec.input_length;
    j["input_channels"] = spec.input_channels;
    j["num_classes"] = spec.num_classes;
    j["layers"] = nlohmann::json::array();
    for (const LayerSpec& layer : spec.layers) j["layers"].push_back(detail::layer_to_json(layer));
    return j;
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    spec.input_length = j.at("input_length").get<std::size_t>();
    spec.input_channels = j.at("input_channels").get<std::size_t>();
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    for (const nlohmann::json& lj : j.at("layers")) {
        spec.layers.push_back(detail::layer_from_json(lj));
    }
    return spec;
}

// One-line JSON manifest followed by one base64 line per parameter, in spec
// order. The manifest repeats every parameter name and shape so a loader can
// reject mismatches before touching the payload.
inline void save_model(const Model& model, const std::string& path,
                       const std::map<std::string, std::string>& overrides = {}) {
    nlohmann::json manifest;
    manifest["format_version"] = kModelFormatVersion;
    manifest["spec"] = spec_to_json(model.spec);
    manifest["rng_seed"] = model.init_seed;
    manifest["overrides"] = overrides;
    manifest["parameters"] = nlohmann::json::array();
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        nlohmann::json p;
        p["name"] = model.param_names[i];
        p["shape"] = model.params[i].shape();
        manifest["parameters"].push_back(p);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << manifest.dump() << "\n";
    for (const Tensor& p : model.params) {
        out << detail::base64_encode(detail::doubles_to_bytes(p.values())) << "\n";
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

struct LoadedModel {
    Model model;
    std::map<std::string, std::string> overrides;
};

inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ModelCorruptError("model file '" + path + "' is empty");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ModelCorruptError("model manifest is not valid JSON: " + std::string(e.what()));
    }

    LoadedModel out;
    try {
        const int version = manifest.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw ModelVersionError("model format version " + std::to_string(version) +
                                    " is not supported (expected " +
                                    std::to_string(kModelFormatVersion) + ")");
        }
        const ModelSpec spec = spec_from_json(manifest.at("spec"));
        const std::uint64_t seed = manifest.at("rng_seed").get<std::uint64_t>();
        // Rebuild the skeleton from the spec; this re-derives the expected
        // parameter names and shapes independently of the manifest.
        out.model = init_model(spec, seed);
        if (manifest.contains("overrides")) {
            out.overrides =
                manifest.at("overrides").get<std::map<std::string, std::string>>();
        }

        const nlohmann::json& plist = manifest.at("parameters");
        if (plist.size() != out.model.params.size()) {
            throw ModelShapeError("manifest lists " + std::to_string(plist.size()) +
                                  " parameters, spec implies " +
                                  std::to_string(out.model.params.size()));
        }
        for (std::size_t i = 0; i < plist.size(); ++i) {
            const std::string name = plist[i].at("name").get<std::string>();
            const auto shape = plist[i].at("shape").get<std::vector<std::size_t>>();
            if (name != out.model.param_names[i] || shape != out.model.params[i].shape()) {
                throw ModelShapeError("parameter " + std::to_string(i) + " ('" + name +
                                      "') does not match spec-derived layout");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ModelCorruptError("model manifest is missing fields: " + std::string(e.what()));
    }

    for (std::size_t i = 0; i < out.model.params.size(); ++i) {
        if (!std::getline(in, line)) {
            throw ModelCorruptError("model file truncated at parameter " + std::to_string(i) +
                                    " ('" + out.model.param_names[i] + "')");
        }
        std::vector<double> values = detail::bytes_to_doubles(detail::base64_decode(line));
        if (values.size() != out.model.params[i].size()) {
            throw ModelShapeError("parameter '" + out.model.param_names[i] + "' holds " +
                                  std::to_string(values.size()) + " values, expected " +
                                  std::to_string(out.model.params[i].size()));
        }
        out.model.params[i] = Tensor(out.model.params[i].shape(), std::move(values));
        if (!out.model.params[i].all_finite()) {
            throw ModelCorruptError("parameter '" + out.model.param_names[i] +
                                    "' contains non-finite values");
        }
    }
    return out;
}

}  // namespace tcnids
