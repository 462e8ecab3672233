#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "stackrule/dataset.hpp"
#include "stackrule/errors.hpp"
#include "stackrule/learners.hpp"
#include "stackrule/matrix.hpp"
#include "stackrule/parallel.hpp"

namespace stackrule {

enum class ScoreProvenance { full_data, cross_validated };

// n x K matrix of library scores: either in-sample predictions of models fit
// on the whole data, or the cross-validated matrix where entry (i, k) comes
// from a model whose training folds excluded row i.
struct ScoreMatrix {
    Matrix values;
    std::vector<LearnerSpec> learner_ids;
    ScoreProvenance provenance = ScoreProvenance::full_data;
    std::optional<FoldPlan> plan; // set iff cross_validated

    std::size_t n() const { return values.rows(); }
    std::size_t k() const { return values.cols(); }

    std::vector<double> combine(const std::vector<double>& alpha) const {
        return matvec(values, alpha);
    }
};

namespace detail {

inline void require_finite(const ScoreMatrix& scores) {
    for (double v : scores.values.data())
        if (!std::isfinite(v))
            throw NumericalFailureError("score matrix contains a non-finite entry");
}

}  // namespace detail

// Fit every library learner on the full data; returns both the in-sample
// score matrix and the fitted models for deploying a rule later.
inline std::pair<ScoreMatrix, std::vector<FittedModel>> full_predictions(
    const std::vector<LearnerSpec>& library, const Dataset& d, std::size_t workers = 1) {
    if (library.empty()) throw EmptyInputError();
    if (!d.has_both_classes()) throw SingleClassError();

    std::vector<FittedModel> models(library.size());
    std::vector<std::vector<double>> columns(library.size());
    parallel_for(library.size(), workers, [&](std::size_t k) {
        try {
            models[k] = fit(library[k], d);
            columns[k] = predict(models[k], d.features);
        } catch (const Error& e) {
            throw LearnerFitError(k, e.what());
        }
    });

    ScoreMatrix scores;
    scores.values = Matrix(d.n(), library.size());
    scores.learner_ids = library;
    scores.provenance = ScoreProvenance::full_data;
    for (std::size_t k = 0; k < library.size(); ++k)
        for (std::size_t i = 0; i < d.n(); ++i) scores.values(i, k) = columns[k][i];
    detail::require_finite(scores);
    return {std::move(scores), std::move(models)};
}

// Assemble the cross-validated prediction matrix: for each fold, fit every
// learner on the training split and predict the held-out rows, reassembled
// in original row order.
inline ScoreMatrix cv_predictions(const std::vector<LearnerSpec>& library, const Dataset& d,
                                  const FoldPlan& plan, std::size_t workers = 1) {
    if (library.empty()) throw EmptyInputError();
    const std::size_t folds = plan.fold_count;
    const std::size_t K = library.size();

    // Materialize splits once; the (fold x learner) fit jobs share them.
    std::vector<Dataset> train_split(folds), valid_split(folds);
    std::vector<std::vector<std::size_t>> valid_rows(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        train_split[f] = d.subset(plan.training_rows(f));
        valid_rows[f] = plan.validation_rows(f);
        valid_split[f] = d.subset(valid_rows[f]);
        if (!train_split[f].has_both_classes()) throw FoldMissingClassError(f);
    }

    ScoreMatrix scores;
    scores.values = Matrix(d.n(), K);
    scores.learner_ids = library;
    scores.provenance = ScoreProvenance::cross_validated;
    scores.plan = plan;

    parallel_for(folds * K, workers, [&](std::size_t job) {
        const std::size_t f = job / K;
        const std::size_t k = job % K;
        try {
            const FittedModel model = fit(library[k], train_split[f]);
            const std::vector<double> preds = predict(model, valid_split[f].features);
            for (std::size_t i = 0; i < valid_rows[f].size(); ++i)
                scores.values(valid_rows[f][i], k) = preds[i];
        } catch (const FoldMissingClassError&) {
            throw;
        } catch (const Error& e) {
            throw LearnerFitError(k, std::string(e.what()) + " (fold " + std::to_string(f) + ")");
        }
    });
    detail::require_finite(scores);
    return scores;
}

// CSV dump of Z with labels, for external inspection of score densities.
inline void dump_score_matrix(const ScoreMatrix& scores, const std::vector<int>& labels,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MissingFileError(path);
    out << "row";
    for (std::size_t k = 0; k < scores.k(); ++k) out << ",learner_" << (k + 1);
    out << ",label\n";
    out.precision(17);
    for (std::size_t i = 0; i < scores.n(); ++i) {
        out << i;
        for (std::size_t k = 0; k < scores.k(); ++k) out << ',' << scores.values(i, k);
        out << ',' << labels[i] << '\n';
    }
}

}  // namespace stackrule
