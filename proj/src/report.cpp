#include <algorithm>
#include <charconv>
#include <cstdio>
#include <string>
#include <vector>

#include "facerec/error.hpp"
#include "facerec/pipeline.hpp"

namespace facerec {

namespace {

constexpr const char* kHeader = "dataset,aggregator,classifier,threads,accuracy_pct,train_s,test_s,config_hash";

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    return fields;
}

template <typename T>
T parse_field(const std::string& text, std::size_t line) {
    T value{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ParseError("report line " + std::to_string(line) + ": bad number '" + text + "'");
    }
    return value;
}

}  // namespace

std::string emit_report(std::span<const EvaluationRow> rows, ReportFormat format) {
    if (rows.empty()) throw ParameterError("emit_report: no rows");

    if (format == ReportFormat::csv) {
        std::string out = std::string(kHeader) + "\n";
        for (const auto& r : rows) {
            out += csv_field(r.dataset) + "," + csv_field(r.aggregator) + "," + csv_field(r.classifier) + "," +
                   std::to_string(r.threads) + "," + fixed(r.accuracy * 100.0, 2) + "," +
                   fixed(r.train_seconds, 6) + "," + fixed(r.test_seconds, 6) + "," +
                   csv_field(r.config_hash) + "\n";
        }
        return out;
    }

    // Rows grouped by dataset, then aggregator, in first-seen order.
    std::vector<const EvaluationRow*> ordered;
    for (const auto& r : rows) ordered.push_back(&r);
    std::vector<std::string> datasets;
    for (const auto& r : rows) {
        if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) datasets.push_back(r.dataset);
    }
    std::stable_sort(ordered.begin(), ordered.end(), [&](const EvaluationRow* a, const EvaluationRow* b) {
        const auto ia = std::find(datasets.begin(), datasets.end(), a->dataset) - datasets.begin();
        const auto ib = std::find(datasets.begin(), datasets.end(), b->dataset) - datasets.begin();
        if (ia != ib) return ia < ib;
        return a->aggregator < b->aggregator;
    });

    const std::vector<std::string> head = {"Dataset", "Aggregator", "Classifier", "Threads",
                                           "Accuracy (%)", "Train (s)", "Test (s)", "Config"};
    std::vector<std::vector<std::string>> cells;
    for (const auto* r : ordered) {
        cells.push_back({r->dataset, r->aggregator, r->classifier, std::to_string(r->threads),
                         fixed(r->accuracy * 100.0, 2), fixed(r->train_seconds, 3), fixed(r->test_seconds, 3),
                         r->config_hash});
    }
    std::vector<std::size_t> width(head.size());
    for (std::size_t c = 0; c < head.size(); ++c) {
        width[c] = head[c].size();
        for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
    }
    auto rule = [&] {
        std::string s = "+";
        for (auto w : width) s += std::string(w + 2, '-') + "+";
        return s + "\n";
    };
    auto line = [&](const std::vector<std::string>& row, bool blank_dataset) {
        std::string s = "|";
        for (std::size_t c = 0; c < row.size(); ++c) {
            const std::string text = c == 0 && blank_dataset ? "" : row[c];
            const bool numeric = c >= 3 && c <= 6;
            const std::string pad(width[c] - text.size(), ' ');
            s += " " + (numeric ? pad + text : text + pad) + " |";
        }
        return s + "\n";
    };
    std::string out = rule() + line(head, false) + rule();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const bool same = i > 0 && cells[i][0] == cells[i - 1][0];
        if (i > 0 && !same) out += rule();
        out += line(cells[i], same);
    }
    return out + rule();
}

std::vector<EvaluationRow> parse_report_csv(std::string_view csv) {
    std::vector<EvaluationRow> rows;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (!csv.empty()) {
        const auto nl = csv.find('\n');
        std::string_view line = csv.substr(0, nl);
        csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kHeader) throw ParseError("report: unexpected header '" + std::string(line) + "'");
            header_seen = true;
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != 8) {
            throw ParseError("report line " + std::to_string(line_no) + ": expected 8 fields, got " +
                             std::to_string(f.size()));
        }
        EvaluationRow r;
        r.dataset = f[0];
        r.aggregator = f[1];
        r.classifier = f[2];
        r.threads = parse_field<unsigned>(f[3], line_no);
        r.accuracy = parse_field<double>(f[4], line_no) / 100.0;
        r.train_seconds = parse_field<double>(f[5], line_no);
        r.test_seconds = parse_field<double>(f[6], line_no);
        r.config_hash = f[7];
        rows.push_back(std::move(r));
    }
    if (!header_seen) throw ParseError("report: missing header");
    return rows;
}

}  // namespace facerec
