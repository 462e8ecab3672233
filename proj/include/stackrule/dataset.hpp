#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stackrule/errors.hpp"
#include "stackrule/matrix.hpp"
#include "stackrule/rng.hpp"

namespace stackrule {

enum class ColumnKind { continuous, binary };

struct Dataset {
    Matrix features;                      // n x p
    std::vector<int> labels;              // n values in {0,1}
    std::vector<ColumnKind> column_kinds; // p
    std::vector<std::string> column_names;

    std::size_t n() const { return features.rows(); }
    std::size_t p() const { return features.cols(); }

    bool has_both_classes() const {
        bool seen0 = false, seen1 = false;
        for (int y : labels) (y == 1 ? seen1 : seen0) = true;
        return seen0 && seen1;
    }

    Dataset subset(const std::vector<std::size_t>& rows) const {
        Dataset out;
        out.features = Matrix(rows.size(), p());
        out.labels.resize(rows.size());
        out.column_kinds = column_kinds;
        out.column_names = column_names;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t c = 0; c < p(); ++c) out.features(i, c) = features(rows[i], c);
            out.labels[i] = labels[rows[i]];
        }
        return out;
    }
};

// Partition of {0..n-1} into D validation folds, stratified by label.
struct FoldPlan {
    std::vector<std::size_t> assignments; // fold index in [0, D) per row
    std::size_t fold_count = 0;

    std::vector<std::size_t> validation_rows(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> training_rows(std::size_t fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignments.size(); ++i)
            if (assignments[i] != fold) out.push_back(i);
        return out;
    }
};

struct ColumnParams {
    ColumnKind kind = ColumnKind::continuous;
    double mean = 0.0;
    double sd = 1.0;
    double level_low = 0.0;  // original value mapped to -1
    double level_high = 1.0; // original value mapped to +1
};

struct StandardizationParams {
    std::vector<ColumnParams> columns;
};

namespace detail {

inline bool parse_cell(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    const char* begin = cell.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    if (end == begin) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0' && std::isfinite(out);
}

inline bool is_missing_cell(std::string cell) {
    // Trim and lowercase; the usual spellings of "absent".
    cell.erase(std::remove_if(cell.begin(), cell.end(),
                              [](char c) { return c == ' ' || c == '\t' || c == '\r'; }),
               cell.end());
    std::transform(cell.begin(), cell.end(), cell.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return cell.empty() || cell == "na" || cell == "nan" || cell == "?";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

struct CsvOptions {
    // Original label value mapped to 1. Empty = lexicographically larger one.
    std::string positive_level;
    // Replace missing cells with 0 and append a <name>_missing indicator
    // column; otherwise missing cells are rejected.
    bool impute_indicator = false;
    std::vector<std::string> drop_columns;
};

// Read a headered numeric CSV into a Dataset. The label column must hold
// exactly two distinct values; feature columns with <= 2 distinct numeric
// values are marked binary, single-valued feature columns are rejected.
inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const CsvOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);

    std::string line;
    if (!std::getline(in, line)) throw LabelNotBinaryError("file has no header row");
    const std::vector<std::string> header = detail::split_csv_line(line);

    std::size_t label_idx = header.size();
    std::vector<bool> keep(header.size(), true);
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == label_column) label_idx = c;
        for (const auto& dropped : opts.drop_columns)
            if (header[c] == dropped) keep[c] = false;
    }
    if (label_idx == header.size())
        throw LabelNotBinaryError("label column '" + label_column + "' not in header");
    keep[label_idx] = false;

    std::vector<std::string> raw_labels;
    std::vector<std::vector<double>> columns;   // per feature column
    std::vector<std::vector<bool>> missing;     // per feature column
    std::vector<std::string> names;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (keep[c]) names.push_back(header[c]);
    columns.resize(names.size());
    missing.resize(names.size());

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw NonNumericCellError(row, "<row>", "expected " + std::to_string(header.size()) +
                                                        " cells, got " + std::to_string(cells.size()));
        std::size_t f = 0;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c == label_idx) {
                raw_labels.push_back(cells[c]);
                continue;
            }
            if (!keep[c]) continue;
            double value = 0.0;
            if (detail::parse_cell(cells[c], value)) {
                columns[f].push_back(value);
                missing[f].push_back(false);
            } else if (opts.impute_indicator && detail::is_missing_cell(cells[c])) {
                columns[f].push_back(0.0);
                missing[f].push_back(true);
            } else {
                throw NonNumericCellError(row, header[c], cells[c]);
            }
            ++f;
        }
        ++row;
    }
    const std::size_t n = raw_labels.size();
    if (n < 2) throw LabelNotBinaryError("need at least two data rows");

    // Label mapping.
    std::set<std::string> levels(raw_labels.begin(), raw_labels.end());
    if (levels.size() != 2)
        throw LabelNotBinaryError(std::to_string(levels.size()) + " distinct values found");
    std::string positive = *levels.rbegin();
    if (!opts.positive_level.empty()) {
        if (!levels.count(opts.positive_level))
            throw LabelNotBinaryError("positive level '" + opts.positive_level +
                                      "' not among observed values");
        positive = opts.positive_level;
    }

    // Missing indicators only for columns that actually had gaps.
    std::vector<std::vector<double>> extra_columns;
    std::vector<std::string> extra_names;
    for (std::size_t f = 0; f < columns.size(); ++f) {
        if (std::none_of(missing[f].begin(), missing[f].end(), [](bool m) { return m; })) continue;
        std::vector<double> indicator(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) indicator[i] = missing[f][i] ? 1.0 : 0.0;
        extra_columns.push_back(std::move(indicator));
        extra_names.push_back(names[f] + "_missing");
    }
    for (std::size_t e = 0; e < extra_columns.size(); ++e) {
        columns.push_back(std::move(extra_columns[e]));
        names.push_back(extra_names[e]);
    }

    Dataset out;
    out.features = Matrix(n, columns.size());
    out.labels.resize(n);
    out.column_names = names;
    out.column_kinds.resize(columns.size());
    for (std::size_t i = 0; i < n; ++i) out.labels[i] = raw_labels[i] == positive ? 1 : 0;
    for (std::size_t f = 0; f < columns.size(); ++f) {
        std::set<double> distinct(columns[f].begin(), columns[f].end());
        if (distinct.size() < 2) throw ConstantColumnError(names[f]);
        out.column_kinds[f] = distinct.size() == 2 ? ColumnKind::binary : ColumnKind::continuous;
        for (std::size_t i = 0; i < n; ++i) out.features(i, f) = columns[f][i];
    }
    return out;
}

// Apply already-fitted standardization to a feature matrix. Binary cells off
// the two training levels snap to the nearer one.
inline Matrix apply_standardization(const StandardizationParams& params, const Matrix& features) {
    if (features.cols() != params.columns.size())
        throw ShapeMismatchError(features.cols(), params.columns.size());
    Matrix out(features.rows(), features.cols());
    for (std::size_t c = 0; c < features.cols(); ++c) {
        const ColumnParams& col = params.columns[c];
        for (std::size_t r = 0; r < features.rows(); ++r) {
            const double v = features(r, c);
            if (col.kind == ColumnKind::continuous) {
                out(r, c) = (v - col.mean) / col.sd;
            } else {
                const double midpoint = 0.5 * (col.level_low + col.level_high);
                out(r, c) = v >= midpoint ? 1.0 : -1.0;
            }
        }
    }
    return out;
}

inline Matrix invert_standardization(const StandardizationParams& params, const Matrix& features) {
    if (features.cols() != params.columns.size())
        throw ShapeMismatchError(features.cols(), params.columns.size());
    Matrix out(features.rows(), features.cols());
    for (std::size_t c = 0; c < features.cols(); ++c) {
        const ColumnParams& col = params.columns[c];
        for (std::size_t r = 0; r < features.rows(); ++r) {
            const double v = features(r, c);
            out(r, c) = col.kind == ColumnKind::continuous
                            ? v * col.sd + col.mean
                            : (v >= 0.0 ? col.level_high : col.level_low);
        }
    }
    return out;
}

// Continuous columns to mean 0 / sd 1 (n-1 denominator), binary columns to
// {-1, +1} with the smaller original level at -1.
inline std::pair<Dataset, StandardizationParams> standardize(const Dataset& d) {
    StandardizationParams params;
    params.columns.resize(d.p());
    for (std::size_t c = 0; c < d.p(); ++c) {
        ColumnParams& col = params.columns[c];
        col.kind = d.column_kinds[c];
        const std::vector<double> values = d.features.column(c);
        if (col.kind == ColumnKind::continuous) {
            col.mean = mean(values);
            col.sd = sample_sd(values);
            if (!(col.sd > 0.0)) throw ZeroVarianceError(d.column_names.empty()
                                                             ? std::to_string(c)
                                                             : d.column_names[c]);
        } else {
            const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
            if (*lo == *hi) throw ZeroVarianceError(d.column_names.empty()
                                                        ? std::to_string(c)
                                                        : d.column_names[c]);
            col.level_low = *lo;
            col.level_high = *hi;
        }
    }
    Dataset out = d;
    out.features = apply_standardization(params, d.features);
    return {std::move(out), std::move(params)};
}

// Label-stratified fold assignment, deterministic in the seed. Each class is
// shuffled and dealt round-robin, negatives continuing where positives left
// off, so fold sizes differ by at most one and per-fold positive counts
// differ by at most one.
inline FoldPlan make_folds(std::size_t n, std::size_t fold_count, const std::vector<int>& labels,
                           std::uint64_t seed) {
    if (fold_count < 2 || fold_count > n) throw TooManyFoldsError(fold_count, n);
    if (labels.size() != n) throw LengthMismatchError(labels.size(), n);

    std::vector<std::size_t> positives, negatives;
    for (std::size_t i = 0; i < n; ++i) (labels[i] == 1 ? positives : negatives).push_back(i);

    Rng rng(derive_seed(seed, "folds"));
    auto shuffle = [&rng](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng.uniform_int(i)]);
    };
    shuffle(positives);
    shuffle(negatives);

    FoldPlan plan;
    plan.fold_count = fold_count;
    plan.assignments.assign(n, 0);
    std::size_t next = 0;
    for (std::size_t idx : positives) plan.assignments[idx] = next++ % fold_count;
    for (std::size_t idx : negatives) plan.assignments[idx] = next++ % fold_count;
    return plan;
}

}  // namespace stackrule
