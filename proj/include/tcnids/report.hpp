#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tcnids/dataset.hpp"

namespace tcnids {

// Entry [i][j] counts samples of true class i predicted as class j.
struct ConfusionMatrix {
    ClassVocabulary vocabulary;
    std::vector<std::uint64_t> counts;  // K*K row-major

    std::size_t classes() const { return vocabulary.size(); }
    std::uint64_t at(std::size_t t, std::size_t p) const {
        return counts[t * classes() + p];
    }
    std::uint64_t total() const {
        std::uint64_t sum = 0;
        for (std::uint64_t c : counts) sum += c;
        return sum;
    }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& y_true,
                                        const std::vector<int>& y_pred,
                                        const ClassVocabulary& vocabulary) {
    if (y_true.size() != y_pred.size()) {
        throw DimensionError("confusion_matrix: " + std::to_string(y_true.size()) +
                             " true labels vs " + std::to_string(y_pred.size()) +
                             " predictions");
    }
    const std::size_t k = vocabulary.size();
    ConfusionMatrix cm;
    cm.vocabulary = vocabulary;
    cm.counts.assign(k * k, 0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        for (int label : {y_true[i], y_pred[i]}) {
            if (label < 0 || static_cast<std::size_t>(label) >= k) {
                throw LabelError("confusion_matrix: label " + std::to_string(label) +
                                 " at index " + std::to_string(i) + " outside [0," +
                                 std::to_string(k) + ")");
            }
        }
        ++cm.counts[static_cast<std::size_t>(y_true[i]) * k +
                    static_cast<std::size_t>(y_pred[i])];
    }
    return cm;
}

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
    // One-vs-rest counts the fractions derive from.
    std::uint64_t tp = 0, fp = 0, fn = 0;
};

inline std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& cm) {
    const std::size_t k = cm.classes();
    std::vector<ClassMetrics> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        ClassMetrics& m = out[c];
        m.tp = cm.at(c, c);
        for (std::size_t i = 0; i < k; ++i) {
            if (i == c) continue;
            m.fp += cm.at(i, c);
            m.fn += cm.at(c, i);
        }
        m.support = m.tp + m.fn;
        m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) /
                                          static_cast<double>(m.tp + m.fp)
                                    : 0.0;
        m.recall = (m.tp + m.fn) ? static_cast<double>(m.tp) /
                                       static_cast<double>(m.tp + m.fn)
                                 : 0.0;
        m.f1 = (m.precision + m.recall > 0.0)
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
    }
    return out;
}

inline double accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw ArgumentError("accuracy: confusion matrix is empty");
    std::uint64_t trace = 0;
    for (std::size_t c = 0; c < cm.classes(); ++c) trace += cm.at(c, c);
    return static_cast<double>(trace) / static_cast<double>(total);
}

struct AggregateMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct Aggregates {
    AggregateMetrics macro;
    AggregateMetrics weighted;
};

// Macro skips zero-support classes (their recall is undefined); weighted
// recall is computed in pooled form so it matches accuracy exactly.
inline Aggregates aggregate(const std::vector<ClassMetrics>& per_class) {
    Aggregates out;
    std::size_t macro_classes = 0;
    std::uint64_t total_support = 0, total_tp = 0;
    double wp = 0.0, wf = 0.0;
    for (const ClassMetrics& m : per_class) {
        if (m.support > 0) {
            ++macro_classes;
            out.macro.precision += m.precision;
            out.macro.recall += m.recall;
            out.macro.f1 += m.f1;
        }
        total_support += m.support;
        total_tp += m.tp;
        wp += static_cast<double>(m.support) * m.precision;
        wf += static_cast<double>(m.support) * m.f1;
    }
    if (macro_classes > 0) {
        out.macro.precision /= static_cast<double>(macro_classes);
        out.macro.recall /= static_cast<double>(macro_classes);
        out.macro.f1 /= static_cast<double>(macro_classes);
    }
    if (total_support > 0) {
        out.weighted.precision = wp / static_cast<double>(total_support);
        out.weighted.recall =
            static_cast<double>(total_tp) / static_cast<double>(total_support);
        out.weighted.f1 = wf / static_cast<double>(total_support);
    }
    return out;
}

struct ClassificationReport {
    std::vector<std::string> class_names;
    std::vector<ClassMetrics> per_class;
    double accuracy = 0.0;
    Aggregates averages;
    std::uint64_t total_support = 0;
    std::vector<std::string> notes;
};

inline ClassificationReport classification_report(const ConfusionMatrix& cm) {
    ClassificationReport report;
    report.class_names = cm.vocabulary.names();
    report.per_class = per_class_metrics(cm);
    report.accuracy = accuracy(cm);
    report.averages = aggregate(report.per_class);
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const ClassMetrics& m = report.per_class[c];
        report.total_support += m.support;
        if (m.support == 0) {
            report.notes.push_back("class '" + report.class_names[c] +
                                   "' has no test samples; excluded from the macro average");
        } else if (m.tp + m.fp == 0) {
            report.notes.push_back("class '" + report.class_names[c] +
                                   "' was never predicted; precision reported as 0");
        }
    }
    return report;
}

enum class ReportFormat { kText, kJson, kCsv };
enum class ConfusionFormat { kCsv, kSvg };

namespace detail {

inline std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

}  // namespace detail

inline std::string render_report_text(const ClassificationReport& report) {
    std::size_t name_width = 12;
    for (const std::string& n : report.class_names) name_width = std::max(name_width, n.size());
    const std::size_t col = 10;

    std::string out;
    out += detail::pad_left("", name_width) + detail::pad_left("precision", col) +
           detail::pad_left("recall", col) + detail::pad_left("f1-score", col) +
           detail::pad_left("support", col) + "\n\n";
    for (std::size_t c = 0; c < report.class_names.size(); ++c) {
        const ClassMetrics& m = report.per_class[c];
        out += detail::pad_left(report.class_names[c], name_width) +
               detail::pad_left(detail::fixed2(m.precision), col) +
               detail::pad_left(detail::fixed2(m.recall), col) +
               detail::pad_left(detail::fixed2(m.f1), col) +
               detail::pad_left(std::to_string(m.support), col) + "\n";
    }
    out += "\n";
    out += detail::pad_left("accuracy", name_width) + detail::pad_left("", col) +
           detail::pad_left("", col) + detail::pad_left(detail::fixed2(report.accuracy), col) +
           detail::pad_left(std::to_string(report.total_support), col) + "\n";
    out += detail::pad_left("macro avg", name_width) +
           detail::pad_left(detail::fixed2(report.averages.macro.precision), col) +
           detail::pad_left(detail::fixed2(report.averages.macro.recall), col) +
           detail::pad_left(detail::fixed2(report.averages.macro.f1), col) +
           detail::pad_left(std::to_string(report.total_support), col) + "\n";
    out += detail::pad_left("weighted avg", name_width) +
           detail::pad_left(detail::fixed2(report.averages.weighted.precision), col) +
           detail::pad_left(detail::fixed2(report.averages.weighted.recall), col) +
           detail::pad_left(detail::fixed2(report.averages.weighted.f1), col) +
           detail::pad_left(std::to_string(report.total_support), col) + "\n";
    for (const std::string& note : report.notes) out += "note: " + note + "\n";
    return out;
}

inline nlohmann::json report_to_json(const ClassificationReport& report) {
    nlohmann::json classes = nlohmann::json::object();
    for (std::size_t c = 0; c < report.class_names.size(); ++c) {
        const ClassMetrics& m = report.per_class[c];
        classes[report.class_names[c]] = {{"precision", m.precision},
                                          {"recall", m.recall},
                                          {"f1", m.f1},
                                          {"support", m.support}};
    }
    auto avg = [](const AggregateMetrics& a) {
        return nlohmann::json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
    };
    return nlohmann::json{{"classes", classes},
                          {"class_order", report.class_names},
                          {"accuracy", report.accuracy},
                          {"macro_avg", avg(report.averages.macro)},
                          {"weighted_avg", avg(report.averages.weighted)},
                          {"total_support", report.total_support},
                          {"notes", report.notes}};
}

inline ClassificationReport report_from_json(const nlohmann::json& j) {
    ClassificationReport report;
    report.class_names = j.at("class_order").get<std::vector<std::string>>();
    for (const std::string& name : report.class_names) {
        const nlohmann::json& m = j.at("classes").at(name);
        ClassMetrics metrics;
        metrics.precision = m.at("precision").get<double>();
        metrics.recall = m.at("recall").get<double>();
        metrics.f1 = m.at("f1").get<double>();
        metrics.support = m.at("support").get<std::uint64_t>();
        report.per_class.push_back(metrics);
    }
    report.accuracy = j.at("accuracy").get<double>();
    auto avg = [](const nlohmann::json& a) {
        AggregateMetrics m;
        m.precision = a.at("precision").get<double>();
        m.recall = a.at("recall").get<double>();
        m.f1 = a.at("f1").get<double>();
        return m;
    };
    report.averages.macro = avg(j.at("macro_avg"));
    report.averages.weighted = avg(j.at("weighted_avg"));
    report.total_support = j.at("total_support").get<std::uint64_t>();
    report.notes = j.at("notes").get<std::vector<std::string>>();
    return report;
}

inline std::string render_report_csv(const ClassificationReport& report) {
    std::string out = "class,precision,recall,f1,support\n";
    char buf[96];
    for (std::size_t c = 0; c < report.class_names.size(); ++c) {
        const ClassMetrics& m = report.per_class[c];
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%llu\n", m.precision, m.recall,
                      m.f1, static_cast<unsigned long long>(m.support));
        out += detail::csv_field(report.class_names[c]);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "accuracy,,,%.17g,%llu\n", report.accuracy,
                  static_cast<unsigned long long>(report.total_support));
    out += buf;
    std::snprintf(buf, sizeof buf, "macro avg,%.17g,%.17g,%.17g,%llu\n",
                  report.averages.macro.precision, report.averages.macro.recall,
                  report.averages.macro.f1,
                  static_cast<unsigned long long>(report.total_support));
    out += buf;
    std::snprintf(buf, sizeof buf, "weighted avg,%.17g,%.17g,%.17g,%llu\n",
                  report.averages.weighted.precision, report.averages.weighted.recall,
                  report.averages.weighted.f1,
                  static_cast<unsigned long long>(report.total_support));
    out += buf;
    return out;
}

inline std::string render_report(const ClassificationReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::kText: return render_report_text(report);
        case ReportFormat::kJson: return report_to_json(report).dump(2) + "\n";
        case ReportFormat::kCsv: return render_report_csv(report);
    }
    throw ArgumentError("render_report: unknown format");
}

inline std::string render_confusion_csv(const ConfusionMatrix& cm) {
    std::string out = "class";
    for (const std::string& name : cm.vocabulary.names()) {
        out += "," + detail::csv_field(name);
    }
    out += "\n";
    for (std::size_t t = 0; t < cm.classes(); ++t) {
        out += detail::csv_field(cm.vocabulary.name(t));
        for (std::size_t p = 0; p < cm.classes(); ++p) {
            out += "," + std::to_string(cm.at(t, p));
        }
        out += "\n";
    }
    return out;
}

// Heatmap on a log scale: cell color runs from white at zero to a deep blue
// at the max count, so the huge majority class cannot wash out the rest.
inline std::string render_confusion_svg(const ConfusionMatrix& cm) {
    const std::size_t k = cm.classes();
    const int cell = 44;
    const int left = 150, top = 120, legend = 40;
    const int width = left + cell * static_cast<int>(k) + 20;
    const int height = top + cell * static_cast<int>(k) + legend;

    std::uint64_t max_count = 0;
    for (std::uint64_t c : cm.counts) max_count = std::max(max_count, c);
    const double denom = std::log1p(static_cast<double>(max_count));

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" font-family=\"sans-serif\">\n";
    svg += "  <rect width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" fill=\"white\"/>\n";
    svg += "  <text x=\"" + std::to_string(left + cell * static_cast<int>(k) / 2) +
           "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">predicted class</text>\n";

    for (std::size_t p = 0; p < k; ++p) {
        const int x = left + static_cast<int>(p) * cell + cell / 2;
        svg += "  <text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(top - 8) +
               "\" font-size=\"10\" text-anchor=\"start\" transform=\"rotate(-45 " +
               std::to_string(x) + " " + std::to_string(top - 8) + ")\">" +
               detail::xml_escape(cm.vocabulary.name(p)) + "</text>\n";
    }
    for (std::size_t t = 0; t < k; ++t) {
        const int y = top + static_cast<int>(t) * cell + cell / 2 + 4;
        svg += "  <text x=\"" + std::to_string(left - 6) + "\" y=\"" + std::to_string(y) +
               "\" font-size=\"10\" text-anchor=\"end\">" +
               detail::xml_escape(cm.vocabulary.name(t)) + "</text>\n";
    }

    for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t p = 0; p < k; ++p) {
            const std::uint64_t count = cm.at(t, p);
            const double scale =
                denom > 0.0 ? std::log1p(static_cast<double>(count)) / denom : 0.0;
            const int r = static_cast<int>(std::lround(255.0 + (8.0 - 255.0) * scale));
            const int g = static_cast<int>(std::lround(255.0 + (48.0 - 255.0) * scale));
            const int b = static_cast<int>(std::lround(255.0 + (107.0 - 255.0) * scale));
            const int x = left + static_cast<int>(p) * cell;
            const int y = top + static_cast<int>(t) * cell;
            svg += "  <rect class=\"cell\" data-count=\"" + std::to_string(count) +
                   "\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(cell) + "\" height=\"" +
                   std::to_string(cell) + "\" fill=\"rgb(" + std::to_string(r) + "," +
                   std::to_string(g) + "," + std::to_string(b) +
                   ")\" stroke=\"#cccccc\"/>\n";
            const char* text_fill = scale > 0.55 ? "white" : "black";
            svg += "  <text x=\"" + std::to_string(x + cell / 2) + "\" y=\"" +
                   std::to_string(y + cell / 2 + 4) +
                   "\" font-size=\"10\" text-anchor=\"middle\" fill=\"" + text_fill + "\">" +
                   std::to_string(count) + "</text>\n";
        }
    }
    svg += "  <text x=\"" + std::to_string(left - 110) + "\" y=\"" +
           std::to_string(top + cell * static_cast<int>(k) / 2) +
           "\" font-size=\"16\" transform=\"rotate(-90 " + std::to_string(left - 110) + " " +
           std::to_string(top + cell * static_cast<int>(k) / 2) +
           ")\" text-anchor=\"middle\">true class</text>\n";
    svg += "</svg>\n";
    return svg;
}

inline std::string render_confusion(const ConfusionMatrix& cm, ConfusionFormat format) {
    switch (format) {
        case ConfusionFormat::kCsv: return render_confusion_csv(cm);
        case ConfusionFormat::kSvg: return render_confusion_svg(cm);
    }
    throw ArgumentError("render_confusion: unknown format");
}

}  // namespace tcnids
