#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stackrule/combiner.hpp"
#include "stackrule/crs2.hpp"
#include "stackrule/dataset.hpp"
#include "stackrule/errors.hpp"
#include "stackrule/loss.hpp"
#include "stackrule/stacking.hpp"
#include "stackrule/threshold.hpp"

namespace stackrule {

// ---------------------------------------------------------------------
// training pipeline shared by the CLI, the outer CV, and the experiments
// ---------------------------------------------------------------------

struct PipelineConfig {
    std::vector<LearnerSpec> library;
    std::size_t inner_folds = 10;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    CrsOptions crs;
};

// Everything produced by standardizing a training set and running the
// stacking step once; rules for any (method, lambda) derive from this.
struct TrainedStack {
    StandardizationParams standardization;
    ScoreMatrix z;    // cross-validated
    ScoreMatrix full; // full-data
    std::vector<FittedModel> models;
    std::vector<int> labels;
    FoldPlan inner_plan;
};

inline TrainedStack run_stacking(const Dataset& raw_train, const PipelineConfig& cfg) {
    auto [train, params] = standardize(raw_train);
    // Learner randomness hangs off the pipeline seed and the learner id, so
    // identical specs get identical columns and refits are reproducible.
    std::vector<LearnerSpec> library = cfg.library;
    for (LearnerSpec& spec : library)
        spec.seed = derive_seed(cfg.seed, "learner." + spec.id(), spec.seed);

    TrainedStack stack;
    stack.standardization = std::move(params);
    stack.labels = train.labels;
    stack.inner_plan = make_folds(train.n(), cfg.inner_folds, train.labels,
                                  derive_seed(cfg.seed, "inner-folds"));
    auto [full, models] = full_predictions(library, train, cfg.workers);
    stack.full = std::move(full);
    stack.models = std::move(models);
    stack.z = cv_predictions(library, train, stack.inner_plan, cfg.workers);
    return stack;
}

inline EnsembleRule derive_rule(const TrainedStack& stack, Method method, const LossSpec& spec,
                                const CrsOptions& crs_opts) {
    switch (method) {
        case Method::conditional:
            return conditional_thresholding(stack.z, stack.full, stack.labels, spec);
        case Method::two_step:
            return two_step(stack.z, stack.labels, spec);
        case Method::crs:
            return crs_joint(stack.z, stack.labels, spec, crs_opts);
    }
    throw ConfigParseError("unreachable method");
}

// ---------------------------------------------------------------------
// evaluation protocols
// ---------------------------------------------------------------------

// Risk of a trained rule on held-out data. The caller owns disjointness and
// must pass features on the same (standardized) scale the models saw.
inline double out_of_sample_eval(const EnsembleRule& rule, const std::vector<FittedModel>& models,
                                 const Dataset& test, const LossSpec& spec) {
    const std::vector<int> actions = apply_rule(rule, models, test.features);
    return empirical_risk_of_actions(test.labels, actions, spec);
}

// Outer D-fold cross-validated risk of the full pipeline: per fold the whole
// machine (standardization, inner-CV stacking, rule derivation) reruns on the
// training split and classifies the held-out split; losses are pooled over
// all n points. Outer and inner folds use independently derived seeds. The
// batch form evaluates a methods x lambdas grid off one stacking pass per
// fold; per-cell results are identical to single calls because every stage
// is seeded independently of the requested grid.
inline std::vector<std::vector<double>> cv_risk_grid(
    const std::vector<Method>& methods, const std::vector<double>& lambdas,
    const std::vector<LearnerSpec>& library, const Dataset& d, std::size_t outer_folds,
    std::uint64_t seed, std::size_t inner_folds = 10, std::size_t workers = 1,
    const CrsOptions& crs_template = {}) {
    const FoldPlan outer = make_folds(d.n(), outer_folds, d.labels, derive_seed(seed, "outer-folds"));
    std::vector<std::vector<std::size_t>> fn(methods.size(),
                                             std::vector<std::size_t>(lambdas.size(), 0));
    std::vector<std::vector<std::size_t>> fp = fn;

    for (std::size_t f = 0; f < outer_folds; ++f) {
        const Dataset train = d.subset(outer.training_rows(f));
        if (!train.has_both_classes()) throw FoldMissingClassError(f);
        const Dataset valid = d.subset(outer.validation_rows(f));

        PipelineConfig cfg;
        cfg.library = library;
        cfg.inner_folds = inner_folds;
        cfg.seed = derive_seed(seed, "outer-fold", f);
        cfg.workers = workers;
        const TrainedStack stack = run_stacking(train, cfg);
        const Matrix valid_std = apply_standardization(stack.standardization, valid.features);

        for (std::size_t m = 0; m < methods.size(); ++m) {
            for (std::size_t l = 0; l < lambdas.size(); ++l) {
                const LossSpec spec(lambdas[l]);
                CrsOptions crs_opts = crs_template;
                crs_opts.seed = derive_seed(cfg.seed, "crs");
                const EnsembleRule rule = derive_rule(stack, methods[m], spec, crs_opts);
                const std::vector<int> actions = apply_rule(rule, stack.models, valid_std);
                for (std::size_t i = 0; i < actions.size(); ++i) {
                    if (valid.labels[i] == 1 && actions[i] == 0) ++fn[m][l];
                    if (valid.labels[i] == 0 && actions[i] == 1) ++fp[m][l];
                }
            }
        }
    }

    std::vector<std::vector<double>> risks(methods.size(),
                                           std::vector<double>(lambdas.size(), 0.0));
    for (std::size_t m = 0; m < methods.size(); ++m)
        for (std::size_t l = 0; l < lambdas.size(); ++l)
            risks[m][l] = (lambdas[l] * static_cast<double>(fn[m][l]) +
                           (1.0 - lambdas[l]) * static_cast<double>(fp[m][l])) /
                          static_cast<double>(d.n());
    return risks;
}

inline double cv_risk(Method method, const std::vector<LearnerSpec>& library, const Dataset& d,
                      const LossSpec& spec, std::size_t outer_folds, std::uint64_t seed,
                      std::size_t inner_folds = 10, std::size_t workers = 1,
                      const CrsOptions& crs_template = {}) {
    return cv_risk_grid({method}, {spec.lambda}, library, d, outer_folds, seed, inner_folds,
                        workers, crs_template)[0][0];
}

// Exhaustive minimum of the joint objective over a simplex grid of weights
// crossed with every achievable threshold, next to the CRS value. Stands in
// as a finite-sample check that the random search lands near the oracle.
inline std::pair<double, double> grid_selector_check(const ScoreMatrix& z,
                                                     const std::vector<int>& labels,
                                                     const LossSpec& spec, double grid_step,
                                                     const CrsOptions& crs_opts = {}) {
    const std::size_t K = z.k();
    if (K > 3) throw GridTooLargeError("simplex grid supports K <= 3, got " + std::to_string(K));
    if (!(grid_step > 0.0 && grid_step <= 1.0))
        throw GridTooLargeError("grid step must lie in (0, 1]");
    const std::size_t m = static_cast<std::size_t>(std::lround(1.0 / grid_step));
    if (m < 1 || m > 2000) throw GridTooLargeError("grid step too fine");

    double grid_min = std::numeric_limits<double>::infinity();
    std::vector<double> alpha(K);
    const auto consider = [&](const std::vector<std::size_t>& parts) {
        for (std::size_t k = 0; k < K; ++k)
            alpha[k] = static_cast<double>(parts[k]) / static_cast<double>(m);
        const double risk = threshold_line_search(z.combine(alpha), labels, spec).risk;
        if (risk < grid_min) grid_min = risk;
    };

    std::vector<std::size_t> parts(K, 0);
    if (K == 1) {
        parts[0] = m;
        consider(parts);
    } else if (K == 2) {
        for (std::size_t a = 0; a <= m; ++a) {
            parts[0] = a;
            parts[1] = m - a;
            consider(parts);
        }
    } else {
        for (std::size_t a = 0; a <= m; ++a) {
            for (std::size_t b = 0; a + b <= m; ++b) {
                parts[0] = a;
                parts[1] = b;
                parts[2] = m - a - b;
                consider(parts);
            }
        }
    }

    const double crs_value = crs_joint(z, labels, spec, crs_opts).training_objective;
    return {grid_min, crs_value};
}

// ---------------------------------------------------------------------
// experiment report
// ---------------------------------------------------------------------

struct ReportRow {
    std::string method;
    double lambda = 0.5;
    std::size_t library_size = 0;
    double risk = 0.0;
    std::optional<double> rel_diff;
    double threshold = 0.0;
    std::vector<double> alpha;
    std::uint64_t seed = 0;
    double runtime_s = 0.0;
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
};

inline std::string alpha_as_json(const std::vector<double>& alpha) {
    std::string out = "[";
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        if (k) out += ',';
        out += detail::full_precision(alpha[k]);
    }
    out += ']';
    return out;
}

inline void write_report_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MissingFileError(path);
    out << "method,lambda,K,risk,rel_diff,threshold,alpha_json_free_text,seed,runtime_s\n";
    for (const ReportRow& row : report.rows) {
        out << row.method << ',' << detail::full_precision(row.lambda) << ',' << row.library_size
            << ',' << detail::full_precision(row.risk) << ',';
        if (row.rel_diff) out << detail::full_precision(*row.rel_diff);
        out << ',' << detail::full_precision(row.threshold) << ',' << '"'
            << alpha_as_json(row.alpha) << '"' << ',' << row.seed << ','
            << detail::full_precision(row.runtime_s) << '\n';
    }
}

// ---------------------------------------------------------------------
// score-density dump (distribution comparison behind the method gap)
// ---------------------------------------------------------------------

// Per observation: the in-sample SL score, the cross-validated SL score
// (whole pipeline refit per fold), and the combined cross-validated library
// score Z.alpha; a sidecar records the threshold each score type selects.
inline void dump_densities(const Dataset& raw, const PipelineConfig& cfg, const LossSpec& spec,
                           const std::string& scores_path, const std::string& thresholds_path) {
    const TrainedStack stack = run_stacking(raw, cfg);
    const std::vector<double> alpha = detail::simplex_weights(stack.z, stack.labels);
    const std::vector<double> sl_score = stack.full.combine(alpha);
    const std::vector<double> z_alpha_score = stack.z.combine(alpha);

    // Cross-validate the entire SL: refit library and weights per fold.
    auto [train, params] = standardize(raw);
    const FoldPlan plan = make_folds(train.n(), cfg.inner_folds, train.labels,
                                     derive_seed(cfg.seed, "cv-sl-folds"));
    std::vector<double> cv_sl_score(train.n(), 0.0);
    for (std::size_t f = 0; f < plan.fold_count; ++f) {
        const auto valid_rows = plan.validation_rows(f);
        const Dataset fold_train = train.subset(plan.training_rows(f));
        if (!fold_train.has_both_classes()) throw FoldMissingClassError(f);
        PipelineConfig fold_cfg = cfg;
        fold_cfg.seed = derive_seed(cfg.seed, "cv-sl-fold", f);
        auto [fold_full, fold_models] = full_predictions(cfg.library, fold_train, cfg.workers);
        const FoldPlan fold_plan =
            make_folds(fold_train.n(), cfg.inner_folds, fold_train.labels,
                       derive_seed(fold_cfg.seed, "inner-folds"));
        const ScoreMatrix fold_z = cv_predictions(cfg.library, fold_train, fold_plan, cfg.workers);
        const std::vector<double> fold_alpha = detail::simplex_weights(fold_z, fold_train.labels);
        const Dataset valid = train.subset(valid_rows);
        std::vector<double> combined(valid.n(), 0.0);
        for (std::size_t k = 0; k < fold_models.size(); ++k) {
            if (fold_alpha[k] == 0.0) continue;
            const std::vector<double> preds = predict(fold_models[k], valid.features);
            for (std::size_t i = 0; i < preds.size(); ++i) combined[i] += fold_alpha[k] * preds[i];
        }
        for (std::size_t i = 0; i < valid_rows.size(); ++i) cv_sl_score[valid_rows[i]] = combined[i];
    }

    std::ofstream out(scores_path);
    if (!out) throw MissingFileError(scores_path);
    out << "sl_score,cv_sl_score,z_alpha_score\n";
    for (std::size_t i = 0; i < sl_score.size(); ++i)
        out << detail::full_precision(sl_score[i]) << ',' << detail::full_precision(cv_sl_score[i])
            << ',' << detail::full_precision(z_alpha_score[i]) << '\n';

    std::ofstream sidecar(thresholds_path);
    if (!sidecar) throw MissingFileError(thresholds_path);
    sidecar << "sl_threshold="
            << detail::full_precision(
                   threshold_line_search(sl_score, stack.labels, spec).threshold)
            << '\n'
            << "cv_sl_threshold="
            << detail::full_precision(
                   threshold_line_search(cv_sl_score, stack.labels, spec).threshold)
            << '\n'
            << "z_alpha_threshold="
            << detail::full_precision(
                   threshold_line_search(z_alpha_score, stack.labels, spec).threshold)
            << '\n';
}

}  // namespace stackrule
