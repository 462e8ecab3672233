#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "stackrule/crs2.hpp"
#include "stackrule/errors.hpp"
#include "stackrule/learners.hpp"
#include "stackrule/loss.hpp"
#include "stackrule/nnls.hpp"
#include "stackrule/stacking.hpp"
#include "stackrule/threshold.hpp"

namespace stackrule {

enum class Method { conditional, two_step, crs };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::conditional: return "conditional";
        case Method::two_step: return "two_step";
        case Method::crs: return "crs";
    }
    return "?";
}

inline Method method_from_string(const std::string& name) {
    for (Method m : {Method::conditional, Method::two_step, Method::crs})
        if (name == to_string(m)) return m;
    throw ConfigParseError("unknown method '" + name + "'");
}

// A deployable classifier: convex library weights, a threshold on the
// combined score, and the identity of the library that produced the scores.
struct EnsembleRule {
    std::vector<double> alpha;        // nonnegative, sums to one
    double threshold = 0.0;
    std::vector<std::string> library; // learner ids, in score-column order
    Method method = Method::two_step;
    double lambda = 0.5;              // loss weight the rule was derived under
    double training_objective = 0.0;  // empirical risk at the solution
};

namespace detail {

inline std::vector<double> labels_as_double(const std::vector<int>& labels) {
    std::vector<double> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out[i] = static_cast<double>(labels[i]);
    return out;
}

// NNLS weights normalized onto the simplex; the zero vector is fatal since
// it means no learner improves on predicting nothing.
inline std::vector<double> simplex_weights(const ScoreMatrix& z, const std::vector<int>& labels) {
    const NnlsSolution sol = nnls(z.values, labels_as_double(labels));
    if (sol.all_zero) throw AllZeroAlphaError();
    double total = 0.0;
    for (double v : sol.coefficients) total += v;
    std::vector<double> alpha = sol.coefficients;
    for (double& v : alpha) v /= total;
    return alpha;
}

inline std::vector<std::string> library_ids(const ScoreMatrix& z) {
    std::vector<std::string> out;
    out.reserve(z.learner_ids.size());
    for (const LearnerSpec& spec : z.learner_ids) out.push_back(spec.id());
    return out;
}

inline void check_same_library(const ScoreMatrix& a, const ScoreMatrix& b) {
    if (a.k() != b.k() || a.n() != b.n())
        throw LibraryMismatchError("score matrices differ in shape");
    for (std::size_t k = 0; k < a.learner_ids.size(); ++k)
        if (a.learner_ids[k].id() != b.learner_ids[k].id())
            throw LibraryMismatchError("column " + std::to_string(k) + " identity differs");
}

}  // namespace detail

// Weights from cross-validated scores, threshold from the full-data SL score.
inline EnsembleRule conditional_thresholding(const ScoreMatrix& z, const ScoreMatrix& full,
                                             const std::vector<int>& labels,
                                             const LossSpec& spec) {
    if (z.provenance != ScoreProvenance::cross_validated ||
        full.provenance != ScoreProvenance::full_data)
        throw LibraryMismatchError("conditional thresholding needs (cross_validated, full_data)");
    detail::check_same_library(z, full);

    EnsembleRule rule;
    rule.alpha = detail::simplex_weights(z, labels);
    const ThresholdResult found = threshold_line_search(full.combine(rule.alpha), labels, spec);
    rule.threshold = found.threshold;
    rule.training_objective = found.risk;
    rule.library = detail::library_ids(z);
    rule.method = Method::conditional;
    rule.lambda = spec.lambda;
    return rule;
}

// Weights from cross-validated scores, threshold from the same cross-validated
// combined score. Shares alpha with conditional thresholding by construction.
inline EnsembleRule two_step(const ScoreMatrix& z, const std::vector<int>& labels,
                             const LossSpec& spec) {
    if (z.provenance != ScoreProvenance::cross_validated)
        throw LibraryMismatchError("two_step needs cross-validated scores");
    EnsembleRule rule;
    rule.alpha = detail::simplex_weights(z, labels);
    const ThresholdResult found = threshold_line_search(z.combine(rule.alpha), labels, spec);
    rule.threshold = found.threshold;
    rule.training_objective = found.risk;
    rule.library = detail::library_ids(z);
    rule.method = Method::two_step;
    rule.lambda = spec.lambda;
    return rule;
}

// Joint minimization of the empirical weighted risk over weights and
// threshold together, by controlled random search over a scale-relaxed box.
// The search runs on (c*, a*) with the weight of the initially-largest NNLS
// coefficient rescaled to 1 and the box widened to [0,5]^K; the winner is
// normalized back onto the simplex, which cannot change the classification.
// If the search fails to beat the two-step solution it is discarded for it.
inline EnsembleRule crs_joint(const ScoreMatrix& z, const std::vector<int>& labels,
                              const LossSpec& spec, const CrsOptions& opts = {}) {
    if (z.provenance != ScoreProvenance::cross_validated)
        throw LibraryMismatchError("crs_joint needs cross-validated scores");
    const std::size_t n = z.n();
    const std::size_t K = z.k();

    const std::vector<double> alpha_nnls = detail::simplex_weights(z, labels);
    ThresholdResult ts = threshold_line_search(z.combine(alpha_nnls), labels, spec);

    EnsembleRule fallback;
    fallback.alpha = alpha_nnls;
    fallback.threshold = ts.threshold;
    fallback.training_objective = ts.risk;
    fallback.library = detail::library_ids(z);
    fallback.method = Method::crs;
    fallback.lambda = spec.lambda;

    // Column order with the largest NNLS weight first.
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t largest = static_cast<std::size_t>(
        std::max_element(alpha_nnls.begin(), alpha_nnls.end()) - alpha_nnls.begin());
    std::swap(order[0], order[largest]);

    Matrix zp(n, K);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < K; ++k) zp(i, k) = z.values(i, order[k]);

    std::vector<double> start_alpha(K);
    for (std::size_t k = 0; k < K; ++k)
        start_alpha[k] = alpha_nnls[order[k]] / alpha_nnls[largest];
    const std::vector<double> start_score = matvec(zp, start_alpha);
    const double start_c = threshold_line_search(start_score, labels, spec).threshold;

    const auto [score_min, score_max] =
        std::minmax_element(start_score.begin(), start_score.end());
    std::vector<double> lower(K + 1, 0.0), upper(K + 1, 5.0);
    lower[0] = *score_min - 0.5;
    upper[0] = *score_max + 0.5;

    const double lambda = spec.lambda;
    std::vector<double> combined(n);
    const auto objective = [&](const std::vector<double>& t) {
        std::size_t fn = 0, fp = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = zp.row_ptr(i);
            double s = 0.0;
            for (std::size_t k = 0; k < K; ++k) s += row[k] * t[k + 1];
            const bool positive = s >= t[0];
            if (labels[i] == 1) {
                if (!positive) ++fn;
            } else if (positive) {
                ++fp;
            }
        }
        return (lambda * static_cast<double>(fn) + (1.0 - lambda) * static_cast<double>(fp)) /
               static_cast<double>(n);
    };

    CrsOptions crs_opts = opts;
    std::vector<double> start(K + 1);
    start[0] = start_c;
    for (std::size_t k = 0; k < K; ++k) start[k + 1] = start_alpha[k];
    crs_opts.initial_point = start;

    const OptimResult found = crs2_minimize(objective, lower, upper, crs_opts);

    double weight_sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) weight_sum += found.point[k + 1];
    if (!(weight_sum > 1e-12)) return fallback;

    EnsembleRule rule = fallback;
    rule.alpha.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k)
        rule.alpha[order[k]] = found.point[k + 1] / weight_sum;
    rule.threshold = found.point[0] / weight_sum;
    rule.training_objective =
        empirical_risk(labels, z.combine(rule.alpha), rule.threshold, spec).risk;

    // Monotone safeguard: joint search must never end up worse than two-step.
    if (rule.training_objective > fallback.training_objective) return fallback;
    return rule;
}

inline std::vector<double> rule_scores(const EnsembleRule& rule,
                                       const std::vector<FittedModel>& models,
                                       const Matrix& features) {
    if (models.size() != rule.alpha.size())
        throw LibraryMismatchError("model count " + std::to_string(models.size()) + " vs alpha " +
                                   std::to_string(rule.alpha.size()));
    for (std::size_t k = 0; k < models.size(); ++k)
        if (models[k].spec.id() != rule.library[k])
            throw LibraryMismatchError("model " + std::to_string(k) + " is " +
                                       models[k].spec.id() + ", rule expects " + rule.library[k]);
    std::vector<double> scores(features.rows(), 0.0);
    for (std::size_t k = 0; k < models.size(); ++k) {
        if (rule.alpha[k] == 0.0) continue;
        const std::vector<double> preds = predict(models[k], features);
        for (std::size_t i = 0; i < scores.size(); ++i) scores[i] += rule.alpha[k] * preds[i];
    }
    return scores;
}

inline std::vector<int> apply_rule(const EnsembleRule& rule,
                                   const std::vector<FittedModel>& models,
                                   const Matrix& features) {
    const std::vector<double> scores = rule_scores(rule, models, features);
    std::vector<int> actions(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        actions[i] = scores[i] >= rule.threshold ? 1 : 0;
    return actions;
}

// ---------------------------------------------------------------------
// plain-text persistence
// ---------------------------------------------------------------------

namespace detail {

// Shortest decimal string that parses back to the same double.
inline std::string full_precision(double v) {
    char buf[40];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

}  // namespace detail

inline std::string serialize_rule(const EnsembleRule& rule) {
    std::ostringstream out;
    out << "method=" << to_string(rule.method) << '\n';
    out << "lambda=" << detail::full_precision(rule.lambda) << '\n';
    out << "library=";
    for (std::size_t k = 0; k < rule.library.size(); ++k)
        out << (k ? "," : "") << rule.library[k];
    out << '\n';
    out << "alpha=";
    for (std::size_t k = 0; k < rule.alpha.size(); ++k)
        out << (k ? "," : "") << detail::full_precision(rule.alpha[k]);
    out << '\n';
    out << "threshold=" << detail::full_precision(rule.threshold) << '\n';
    out << "training_objective=" << detail::full_precision(rule.training_objective) << '\n';
    return out.str();
}

inline void write_rule(const EnsembleRule& rule, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MissingFileError(path);
    out << serialize_rule(rule);
}

inline EnsembleRule parse_rule(std::istream& in) {
    EnsembleRule rule;
    std::string line;
    bool saw_method = false, saw_alpha = false, saw_threshold = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigParseError("bad rule line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        std::stringstream items(value);
        std::string item;
        if (key == "method") {
            rule.method = method_from_string(value);
            saw_method = true;
        } else if (key == "lambda") {
            rule.lambda = std::stod(value);
        } else if (key == "library") {
            while (std::getline(items, item, ',')) rule.library.push_back(item);
        } else if (key == "alpha") {
            while (std::getline(items, item, ',')) rule.alpha.push_back(std::stod(item));
            saw_alpha = true;
        } else if (key == "threshold") {
            rule.threshold = std::stod(value);
            saw_threshold = true;
        } else if (key == "training_objective") {
            rule.training_objective = std::stod(value);
        } else {
            throw ConfigParseError("unknown rule key: " + key);
        }
    }
    if (!saw_method || !saw_alpha || !saw_threshold)
        throw ConfigParseError("rule file missing method/alpha/threshold");
    if (rule.library.size() != rule.alpha.size())
        throw ConfigParseError("rule library and alpha lengths differ");
    return rule;
}

inline EnsembleRule read_rule(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);
    return parse_rule(in);
}

}  // namespace stackrule
