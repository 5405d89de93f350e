#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "tcnids/tensor.hpp"

namespace tcnids {

// ---------------------------------------------------------------------------
// raw table
// ---------------------------------------------------------------------------

struct NumericColumn {
    std::vector<double> values;
};

struct CategoricalColumn {
    std::vector<std::string> values;
};

struct Column {
    std::string name;
    std::variant<NumericColumn, CategoricalColumn> data;

    bool is_numeric() const { return std::holds_alternative<NumericColumn>(data); }
    const std::vector<double>& numeric() const { return std::get<NumericColumn>(data).values; }
    const std::vector<std::string>& categorical() const {
        return std::get<CategoricalColumn>(data).values;
    }
    std::size_t size() const {
        return is_numeric() ? numeric().size() : categorical().size();
    }
};

struct RawTable {
    std::vector<Column> columns;
    std::size_t rows = 0;

    std::size_t cols() const { return columns.size(); }

    const Column* find(const std::string& name) const {
        for (const Column& c : columns) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i].name == name) return static_cast<int>(i);
        }
        return -1;
    }
};

inline RawTable take_rows(const RawTable& table, const std::vector<std::size_t>& indices) {
    RawTable out;
    out.rows = indices.size();
    out.columns.reserve(table.columns.size());
    for (const Column& col : table.columns) {
        Column nc;
        nc.name = col.name;
        if (col.is_numeric()) {
            NumericColumn data;
            data.values.reserve(indices.size());
            for (std::size_t i : indices) data.values.push_back(col.numeric()[i]);
            nc.data = std::move(data);
        } else {
            CategoricalColumn data;
            data.values.reserve(indices.size());
            for (std::size_t i : indices) data.values.push_back(col.categorical()[i]);
            nc.data = std::move(data);
        }
        out.columns.push_back(std::move(nc));
    }
    return out;
}

// ---------------------------------------------------------------------------
// csv
// ---------------------------------------------------------------------------

namespace detail {

// Reads one CSV record, honoring quoted fields with embedded commas,
// newlines, and doubled quotes. Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    int c = in.get();
    if (c == EOF) return false;
    std::string field;
    bool in_quotes = false;
    while (true) {
        if (c == EOF) {
            fields.push_back(std::move(field));
            return true;
        }
        if (in_quotes) {
            if (c == '"') {
                const int next = in.get();
                if (next == '"') {
                    field += '"';
                } else {
                    in_quotes = false;
                    c = next;
                    continue;
                }
            } else {
                field += static_cast<char>(c);
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            fields.push_back(std::move(field));
            return true;
        } else if (c == '\r') {
            const int next = in.get();
            if (next != '\n' && next != EOF) in.unget();
            fields.push_back(std::move(field));
            return true;
        } else {
            field += static_cast<char>(c);
        }
        c = in.get();
    }
}

inline bool parse_double(const std::string& text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
    if (begin == end) return false;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

inline bool is_missing_token(const std::string& text) {
    if (text.empty()) return true;
    std::string lower;
    lower.reserve(text.size());
    for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return lower == "nan" || lower == "inf" || lower == "-inf" || lower == "null" ||
           lower == "na";
}

}  // namespace detail

enum class ColumnType { kNumeric, kCategorical };

struct CsvOptions {
    // Rows whose label cell is empty are dropped at load time.
    std::string label_column = "Attack_type";
    // Inference inputs may omit the label column entirely; with this off an
    // absent label column is fine and no rows are dropped.
    bool require_label = true;
    // Optional per-column overrides; everything else is inferred.
    std::map<std::string, ColumnType> forced_types;
};

struct LoadStats {
    std::size_t rows_read = 0;
    std::size_t rows_dropped_unlabeled = 0;
    std::size_t imputations = 0;
};

struct LoadedCsv {
    RawTable table;
    LoadStats stats;
};

// Two passes: the first infers a type per column (numeric unless any
// non-missing cell fails to parse), the second builds typed columns. Missing
// numeric cells become 0 and are counted as imputations.
inline LoadedCsv load_csv(const std::string& path, const CsvOptions& options = {}) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IngestionError("cannot open CSV file '" + path + "'");

    std::vector<std::string> header;
    if (!detail::read_csv_record(probe, header) || header.empty() ||
        (header.size() == 1 && header[0].empty())) {
        throw IngestionError("CSV file '" + path + "' has no header row");
    }
    {
        std::set<std::string> names(header.begin(), header.end());
        if (names.size() != header.size()) {
            throw IngestionError("CSV file '" + path + "' repeats a column name");
        }
    }
    const int label_idx = [&] {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == options.label_column) return static_cast<int>(i);
        }
        return -1;
    }();
    if (label_idx < 0 && options.require_label) {
        throw IngestionError("CSV file '" + path + "' lacks the label column '" +
                             options.label_column + "'");
    }

    // Pass 1: type inference.
    std::vector<bool> numeric(header.size(), true);
    for (std::size_t i = 0; i < header.size(); ++i) {
        auto forced = options.forced_types.find(header[i]);
        if (forced != options.forced_types.end()) {
            numeric[i] = forced->second == ColumnType::kNumeric;
        }
    }
    {
        std::vector<std::string> fields;
        std::vector<bool> saw_value(header.size(), false);
        while (detail::read_csv_record(probe, fields)) {
            if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
            if (fields.size() != header.size()) {
                throw IngestionError("CSV file '" + path + "' row has " +
                                     std::to_string(fields.size()) + " fields, header has " +
                                     std::to_string(header.size()));
            }
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (!numeric[i] || options.forced_types.count(header[i])) continue;
                if (detail::is_missing_token(fields[i])) continue;
                double value;
                if (!detail::parse_double(fields[i], value)) {
                    numeric[i] = false;
                } else {
                    saw_value[i] = true;
                }
            }
        }
        // A column with no parseable content at all stays categorical rather
        // than becoming silently all-zero.
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (numeric[i] && !saw_value[i] && !options.forced_types.count(header[i])) {
                numeric[i] = false;
            }
        }
    }
    if (label_idx >= 0) numeric[static_cast<std::size_t>(label_idx)] = false;  // labels are names

    // Pass 2: build typed columns.
    LoadedCsv out;
    out.table.columns.resize(header.size());
    for (std::size_t i = 0; i < header.size(); ++i) {
        out.table.columns[i].name = header[i];
        if (numeric[i]) {
            out.table.columns[i].data = NumericColumn{};
        } else {
            out.table.columns[i].data = CategoricalColumn{};
        }
    }

    std::ifstream in(path, std::ios::binary);
    std::vector<std::string> fields;
    detail::read_csv_record(in, fields);  // skip header
    while (detail::read_csv_record(in, fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;
        ++out.stats.rows_read;
        if (options.require_label && fields[static_cast<std::size_t>(label_idx)].empty()) {
            ++out.stats.rows_dropped_unlabeled;
            continue;
        }
        for (std::size_t i = 0; i < fields.size(); ++i) {
            Column& col = out.table.columns[i];
            if (numeric[i]) {
                double value = 0.0;
                if (detail::is_missing_token(fields[i]) ||
                    !detail::parse_double(fields[i], value)) {
                    value = 0.0;
                    ++out.stats.imputations;
                }
                std::get<NumericColumn>(col.data).values.push_back(value);
            } else {
                std::get<CategoricalColumn>(col.data).values.push_back(std::move(fields[i]));
            }
        }
        ++out.table.rows;
    }
    return out;
}

namespace detail {

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string quoted = "\"";
    for (char c : field) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

}  // namespace detail

// Numeric cells use %.17g so a write/load cycle reproduces doubles exactly.
inline void write_csv(const RawTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < table.cols(); ++i) {
        if (i) out << ',';
        out << detail::csv_escape(table.columns[i].name);
    }
    out << '\n';
    char buf[40];
    for (std::size_t row = 0; row < table.rows; ++row) {
        for (std::size_t i = 0; i < table.cols(); ++i) {
            if (i) out << ',';
            const Column& col = table.columns[i];
            if (col.is_numeric()) {
                std::snprintf(buf, sizeof buf, "%.17g", col.numeric()[row]);
                out << buf;
            } else {
                out << detail::csv_escape(col.categorical()[row]);
            }
        }
        out << '\n';
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// column dropping
// ---------------------------------------------------------------------------

struct DropResult {
    RawTable table;
    std::vector<std::string> dropped;
    std::vector<std::string> missing;  // requested but absent
};

inline DropResult drop_columns(const RawTable& table, const std::vector<std::string>& names) {
    DropResult out;
    const std::set<std::string> requested(names.begin(), names.end());
    std::set<std::string> present;
    out.table.rows = table.rows;
    for (const Column& col : table.columns) {
        if (requested.count(col.name)) {
            out.dropped.push_back(col.name);
            present.insert(col.name);
        } else {
            out.table.columns.push_back(col);
        }
    }
    for (const std::string& name : names) {
        if (!present.count(name)) out.missing.push_back(name);
    }
    return out;
}

// ---------------------------------------------------------------------------
// deduplication
// ---------------------------------------------------------------------------

namespace detail {

inline void hash_mix(std::uint64_t& h, const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
}

inline std::uint64_t hash_cell_numeric(double v) {
    if (v == 0.0) v = 0.0;  // merge signed zeros
    return std::bit_cast<std::uint64_t>(v);
}

inline std::uint64_t row_hash(const RawTable& table, std::size_t row) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const Column& col : table.columns) {
        if (col.is_numeric()) {
            const std::uint64_t bits = hash_cell_numeric(col.numeric()[row]);
            hash_mix(h, &bits, 8);
        } else {
            const std::string& s = col.categorical()[row];
            hash_mix(h, s.data(), s.size());
        }
        const char sep = 0x1F;
        hash_mix(h, &sep, 1);
    }
    return h;
}

inline bool rows_equal(const RawTable& table, std::size_t a, std::size_t b) {
    for (const Column& col : table.columns) {
        if (col.is_numeric()) {
            if (col.numeric()[a] != col.numeric()[b]) return false;
        } else {
            if (col.categorical()[a] != col.categorical()[b]) return false;
        }
    }
    return true;
}

}  // namespace detail

struct RowDedupResult {
    RawTable table;
    std::size_t removed = 0;
    std::vector<std::size_t> kept;  // original row indices, ascending
};

// First occurrence wins; candidates bucket by hash and confirm with a full
// comparison, so collisions cannot drop distinct rows.
inline RowDedupResult dedup_rows(const RawTable& table) {
    RowDedupResult out;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    buckets.reserve(table.rows * 2);
    out.kept.reserve(table.rows);
    for (std::size_t row = 0; row < table.rows; ++row) {
        const std::uint64_t h = detail::row_hash(table, row);
        auto& bucket = buckets[h];
        bool duplicate = false;
        for (std::size_t prior : bucket) {
            if (detail::rows_equal(table, prior, row)) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) {
            ++out.removed;
        } else {
            bucket.push_back(row);
            out.kept.push_back(row);
        }
    }
    out.table = take_rows(table, out.kept);
    return out;
}

struct ColumnDedupResult {
    RawTable table;
    std::vector<std::string> dropped;
};

// Leftmost of each content-identical group survives. Identity requires both
// equal type and equal values; hashes only narrow the candidate set.
inline ColumnDedupResult dedup_columns(const RawTable& table) {
    const std::size_t n = table.cols();
    std::vector<std::uint64_t> hashes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Column& col = table.columns[i];
        std::uint64_t h = 1469598103934665603ULL;
        if (col.is_numeric()) {
            const char tag = 'n';
            detail::hash_mix(h, &tag, 1);
            for (double v : col.numeric()) {
                const std::uint64_t bits = detail::hash_cell_numeric(v);
                detail::hash_mix(h, &bits, 8);
            }
        } else {
            const char tag = 'c';
            detail::hash_mix(h, &tag, 1);
            for (const std::string& s : col.categorical()) {
                detail::hash_mix(h, s.data(), s.size());
                const char sep = 0x1F;
                detail::hash_mix(h, &sep, 1);
            }
        }
        hashes[i] = h;
    }

    auto columns_equal = [&](std::size_t a, std::size_t b) {
        const Column& ca = table.columns[a];
        const Column& cb = table.columns[b];
        if (ca.is_numeric() != cb.is_numeric()) return false;
        if (ca.is_numeric()) return ca.numeric() == cb.numeric();
        return ca.categorical() == cb.categorical();
    };

    ColumnDedupResult out;
    out.table.rows = table.rows;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n; ++i) {
        bool duplicate = false;
        for (std::size_t j : kept) {
            if (hashes[j] == hashes[i] && columns_equal(j, i)) {
                duplicate = true;
                break;
            }
        }
        if (duplicate) {
            out.dropped.push_back(table.columns[i].name);
        } else {
            kept.push_back(i);
            out.table.columns.push_back(table.columns[i]);
        }
    }
    return out;
}

}  // namespace tcnids
