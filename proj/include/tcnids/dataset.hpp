#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "tcnids/tensor.hpp"

namespace tcnids {

// Canonical label set of the 15-class intrusion detection task, in the fixed
// published order. Index == class id everywhere in this library.
inline const std::vector<std::string>& edge_iiot_classes() {
    static const std::vector<std::string> names = {
        "Normal",        "DDoS_UDP",       "DDoS_ICMP", "SQL_injection",
        "DDoS_TCP",      "Vulnerability_scanner",       "Password",
        "DDoS_HTTP",     "Uploading",      "Backdoor",  "Port_Scanning",
        "XSS",           "Ransomware",     "Fingerprinting",
        "MITM"};
    return names;
}

class ClassVocabulary {
public:
    ClassVocabulary() = default;

    explicit ClassVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
        if (names_.empty()) throw ArgumentError("ClassVocabulary: no class names");
        std::set<std::string> unique(names_.begin(), names_.end());
        if (unique.size() != names_.size()) {
            throw ArgumentError("ClassVocabulary: duplicate class names");
        }
    }

    // Canonical order when the observed set is exactly the known label set,
    // lexicographic otherwise, so indices never depend on row order.
    static ClassVocabulary from_labels(const std::vector<std::string>& labels) {
        std::set<std::string> seen(labels.begin(), labels.end());
        const auto& canonical = edge_iiot_classes();
        if (seen == std::set<std::string>(canonical.begin(), canonical.end())) {
            return ClassVocabulary(canonical);
        }
        return ClassVocabulary(std::vector<std::string>(seen.begin(), seen.end()));
    }

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t index) const { return names_.at(index); }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == name) return static_cast<int>(i);
        }
        throw LabelError("unknown class label '" + name + "'");
    }

    std::vector<int> encode(const std::vector<std::string>& labels) const {
        std::vector<int> out;
        out.reserve(labels.size());
        for (const std::string& l : labels) out.push_back(index_of(l));
        return out;
    }

private:
    std::vector<std::string> names_;
};

// One partition of a dataset: standardized features plus integer labels.
struct SplitPart {
    Tensor features;  // rows x feature count
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
};

struct DatasetSplit {
    SplitPart train, validation, test;
    std::vector<std::string> feature_names;
    ClassVocabulary vocabulary;
};

// ---------------------------------------------------------------------------
// binary matrix file
// ---------------------------------------------------------------------------

inline constexpr char kMatrixMagic[8] = {'T', 'C', 'N', 'I', 'D', 'S', 'M', 'X'};
inline constexpr std::uint32_t kMatrixFormatVersion = 1;

namespace detail {

template <typename T>
void write_le(std::ofstream& out, T value) {
    std::array<char, sizeof(T)> bytes;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::ifstream& in) {
    std::array<char, sizeof(T)> bytes;
    in.read(bytes.data(), bytes.size());
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
    }
    return static_cast<T>(v);
}

}  // namespace detail

// Header: 8-byte magic, u32 version, u64 rows, u64 cols, then row-major
// little-endian doubles. Labels travel in the JSON sidecar, not here.
inline void write_matrix(const Tensor& matrix, const std::string& path) {
    if (matrix.rank() != 2) {
        throw ArgumentError("write_matrix: expected rank-2 tensor, got " + matrix.shape_str());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(kMatrixMagic, 8);
    detail::write_le<std::uint32_t>(out, kMatrixFormatVersion);
    detail::write_le<std::uint64_t>(out, matrix.extent(0));
    detail::write_le<std::uint64_t>(out, matrix.extent(1));
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        detail::write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(matrix[i]));
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline Tensor read_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open matrix file '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || !std::equal(magic, magic + 8, kMatrixMagic)) {
        throw IoError("'" + path + "' is not a matrix file");
    }
    const auto version = detail::read_le<std::uint32_t>(in);
    if (version != kMatrixFormatVersion) {
        throw IoError("matrix file version " + std::to_string(version) + " not supported");
    }
    const auto rows = detail::read_le<std::uint64_t>(in);
    const auto cols = detail::read_le<std::uint64_t>(in);
    if (!in) throw IoError("matrix file '" + path + "' has a truncated header");
    Tensor matrix({static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        matrix[i] = std::bit_cast<double>(detail::read_le<std::uint64_t>(in));
        if (!in) throw IoError("matrix file '" + path + "' is truncated");
    }
    return matrix;
}

}  // namespace tcnids
