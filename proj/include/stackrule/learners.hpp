#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "stackrule/dataset.hpp"
#include "stackrule/errors.hpp"
#include "stackrule/matrix.hpp"
#include "stackrule/rng.hpp"
#include "stackrule/tree.hpp"

namespace stackrule {

enum class LearnerKind {
    logistic,
    quad_additive,
    cart,
    random_forest,
    knn,
    boosted_stumps,
    linear_svm,
    bagged_trees,
};

inline const char* to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::logistic: return "logistic";
        case LearnerKind::quad_additive: return "quad_additive";
        case LearnerKind::cart: return "cart";
        case LearnerKind::random_forest: return "random_forest";
        case LearnerKind::knn: return "knn";
        case LearnerKind::boosted_stumps: return "boosted_stumps";
        case LearnerKind::linear_svm: return "linear_svm";
        case LearnerKind::bagged_trees: return "bagged_trees";
    }
    return "?";
}

inline LearnerKind learner_kind_from_string(const std::string& name) {
    for (LearnerKind k :
         {LearnerKind::logistic, LearnerKind::quad_additive, LearnerKind::cart,
          LearnerKind::random_forest, LearnerKind::knn, LearnerKind::boosted_stumps,
          LearnerKind::linear_svm, LearnerKind::bagged_trees}) {
        if (name == to_string(k)) return k;
    }
    throw BadLearnerSpecError("unknown learner '" + name + "'");
}

struct LearnerSpec {
    LearnerKind kind = LearnerKind::logistic;
    std::map<std::string, double> hyper; // overrides of the defaults below
    std::uint64_t seed = 0;

    std::string id() const { return to_string(kind); }

    double get(const std::string& key, double fallback) const {
        const auto it = hyper.find(key);
        return it == hyper.end() ? fallback : it->second;
    }
    std::size_t get_count(const std::string& key, std::size_t fallback) const {
        const double v = get(key, static_cast<double>(fallback));
        if (!(v >= 1.0)) throw BadLearnerSpecError(id() + ": '" + key + "' must be >= 1");
        return static_cast<std::size_t>(v);
    }
};

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// ---------------------------------------------------------------------
// learned-state payloads
// ---------------------------------------------------------------------

struct LinearCoefficients {
    std::vector<double> beta; // beta[0] = intercept
};

// Fixed-knot expansion backing the quadratic-spline learner: each continuous
// feature contributes x, x^2 and truncated-quadratic hinges at its three
// training quartiles; binary features stay linear.
struct QuadBasis {
    std::vector<ColumnKind> kinds;
    std::vector<std::array<double, 3>> knots; // per column, unused for binary

    std::size_t width() const {
        std::size_t w = 0;
        for (ColumnKind k : kinds) w += k == ColumnKind::continuous ? 5 : 1;
        return w;
    }

    void expand_row(const double* row, double* out) const {
        std::size_t at = 0;
        for (std::size_t c = 0; c < kinds.size(); ++c) {
            const double v = row[c];
            out[at++] = v;
            if (kinds[c] != ColumnKind::continuous) continue;
            out[at++] = v * v;
            for (double q : knots[c]) {
                const double h = v > q ? v - q : 0.0;
                out[at++] = h * h;
            }
        }
    }

    Matrix expand(const Matrix& x) const {
        Matrix out(x.rows(), width());
        for (std::size_t r = 0; r < x.rows(); ++r) expand_row(x.row_ptr(r), out.row_ptr(r));
        return out;
    }
};

struct QuadAdditiveState {
    QuadBasis basis;
    LinearCoefficients coef;
};

struct TreeState {
    DecisionTree tree;
};

struct ForestState {
    std::vector<DecisionTree> trees;
};

struct KnnState {
    Matrix train_x;
    std::vector<int> train_y;
    std::size_t k = 10;
};

struct BoostState {
    struct Stump {
        std::int32_t feature = -1;
        double threshold = 0.0;
        double left = 0.0;
        double right = 0.0;
    };
    double intercept = 0.0;
    double shrinkage = 0.1;
    std::vector<Stump> stumps;
};

struct SvmState {
    std::vector<double> weights;
    double bias = 0.0;
};

struct FittedModel {
    LearnerSpec spec;
    std::size_t feature_count = 0;
    bool convergence_warning = false;
    std::variant<LinearCoefficients, QuadAdditiveState, TreeState, ForestState, KnnState,
                 BoostState, SvmState>
        state;
};

// ---------------------------------------------------------------------
// logistic regression by iteratively reweighted least squares
// ---------------------------------------------------------------------

namespace detail {

// Penalized deviance: -2 log-likelihood plus the ridge term on slopes.
inline double logistic_deviance(const Matrix& x, const std::vector<int>& y,
                                const std::vector<double>& beta, double ridge) {
    double dev = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double eta = beta[0];
        const double* row = x.row_ptr(i);
        for (std::size_t c = 0; c < x.cols(); ++c) eta += row[c] * beta[c + 1];
        // log(1 + exp(eta)) - y*eta, computed stably.
        const double softplus = eta > 30.0 ? eta : std::log1p(std::exp(eta));
        dev += 2.0 * (softplus - (y[i] == 1 ? eta : 0.0));
    }
    for (std::size_t c = 1; c < beta.size(); ++c) dev += ridge * beta[c] * beta[c];
    return dev;
}

struct IrlsResult {
    std::vector<double> beta;
    bool converged = false;
};

inline IrlsResult fit_logistic_irls(const Matrix& x, const std::vector<int>& y,
                                    std::size_t max_iter = 100, double tol = 1e-8,
                                    double ridge = 1e-8) {
    const std::size_t n = x.rows();
    const std::size_t p1 = x.cols() + 1;
    std::vector<double> beta(p1, 0.0);
    double best_dev = logistic_deviance(x, y, beta, ridge);
    std::vector<double> best_beta = beta;
    bool converged = false;

    std::vector<double> eta(n), mu(n);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double e = beta[0];
            const double* row = x.row_ptr(i);
            for (std::size_t c = 0; c + 1 < p1; ++c) e += row[c] * beta[c + 1];
            eta[i] = e;
            mu[i] = sigmoid(e);
        }
        // Gradient of the penalized log-likelihood and Newton step.
        std::vector<double> grad(p1, 0.0);
        Matrix hess(p1, p1);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = static_cast<double>(y[i]) - mu[i];
            const double w = std::max(mu[i] * (1.0 - mu[i]), 1e-10);
            const double* row = x.row_ptr(i);
            grad[0] += r;
            hess(0, 0) += w;
            for (std::size_t c = 1; c < p1; ++c) {
                grad[c] += r * row[c - 1];
                hess(0, c) += w * row[c - 1];
                for (std::size_t c2 = c; c2 < p1; ++c2)
                    hess(c, c2) += w * row[c - 1] * row[c2 - 1];
            }
        }
        for (std::size_t c = 1; c < p1; ++c) {
            grad[c] -= ridge * beta[c];
            hess(c, c) += ridge;
        }
        for (std::size_t c = 0; c < p1; ++c)
            for (std::size_t c2 = 0; c2 < c; ++c2) hess(c, c2) = hess(c2, c);

        double gnorm = 0.0;
        for (double g : grad) gnorm = std::max(gnorm, std::fabs(g));
        if (gnorm <= tol) {
            converged = true;
            break;
        }

        std::vector<double> step = solve_dense(std::move(hess), std::move(grad));
        // Backtrack if the Newton step overshoots.
        double scale = 1.0;
        bool accepted = false;
        for (int half = 0; half < 25; ++half) {
            std::vector<double> trial = beta;
            for (std::size_t c = 0; c < p1; ++c) trial[c] += scale * step[c];
            const double dev = logistic_deviance(x, y, trial, ridge);
            if (dev <= best_dev + 1e-12) {
                beta = std::move(trial);
                if (dev < best_dev) {
                    best_dev = dev;
                    best_beta = beta;
                }
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break; // cannot improve further in this direction
    }
    IrlsResult out;
    out.beta = best_beta;
    out.converged = converged;
    return out;
}

inline std::vector<double> predict_linear_logit(const Matrix& x, const std::vector<double>& beta) {
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double eta = beta[0];
        const double* row = x.row_ptr(i);
        for (std::size_t c = 0; c + 1 < beta.size(); ++c) eta += row[c] * beta[c + 1];
        out[i] = sigmoid(eta);
    }
    return out;
}

// Depth-1 regression stump minimizing squared error against the gradient;
// leaf values are Newton steps (sum of residuals over sum of hessians).
inline BoostState::Stump fit_stump(const Matrix& x, const std::vector<double>& residual,
                                   const std::vector<double>& hessian,
                                   std::vector<std::pair<double, std::uint32_t>>& scratch) {
    const std::size_t n = x.rows();
    double total_r = 0.0, total_h = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total_r += residual[i];
        total_h += hessian[i];
    }
    BoostState::Stump best;
    double best_gain = 0.0;
    for (std::size_t f = 0; f < x.cols(); ++f) {
        for (std::size_t i = 0; i < n; ++i) scratch[i] = {x(i, f), static_cast<std::uint32_t>(i)};
        std::sort(scratch.begin(), scratch.begin() + n);
        double left_r = 0.0, left_h = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const std::size_t row = scratch[i].second;
            left_r += residual[row];
            left_h += hessian[row];
            if (scratch[i].first == scratch[i + 1].first) continue;
            const double right_r = total_r - left_r;
            const double right_h = total_h - left_h;
            if (left_h < 1e-12 || right_h < 1e-12) continue;
            const double gain = left_r * left_r / left_h + right_r * right_r / right_h;
            if (gain > best_gain + 1e-12) {
                best_gain = gain;
                best.feature = static_cast<std::int32_t>(f);
                double thr = 0.5 * (scratch[i].first + scratch[i + 1].first);
                if (thr <= scratch[i].first)
                    thr = std::nextafter(scratch[i].first,
                                         std::numeric_limits<double>::infinity());
                best.threshold = thr;
                best.left = left_r / left_h;
                best.right = right_r / right_h;
            }
        }
    }
    if (best.feature < 0 && total_h > 1e-12) {
        // No usable split: act as a single-leaf adjustment.
        best.left = best.right = total_r / total_h;
        best.feature = 0;
        best.threshold = -std::numeric_limits<double>::infinity();
    }
    return best;
}

inline std::vector<std::uint32_t> bootstrap_rows(std::size_t n, Rng& rng) {
    std::vector<std::uint32_t> rows(n);
    for (auto& r : rows) r = static_cast<std::uint32_t>(rng.uniform_int(n));
    return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------
// fit / predict
// ---------------------------------------------------------------------

inline FittedModel fit(const LearnerSpec& spec, const Dataset& d) {
    if (!d.has_both_classes()) throw SingleClassError();
    const Matrix& x = d.features;
    const std::vector<int>& y = d.labels;
    const std::size_t n = d.n();
    const std::size_t p = d.p();

    FittedModel model;
    model.spec = spec;
    model.feature_count = p;

    switch (spec.kind) {
        case LearnerKind::logistic: {
            auto irls = detail::fit_logistic_irls(x, y, spec.get_count("max_iter", 100),
                                                  spec.get("tol", 1e-8), spec.get("ridge", 1e-8));
            model.convergence_warning = !irls.converged;
            model.state = LinearCoefficients{std::move(irls.beta)};
            break;
        }
        case LearnerKind::quad_additive: {
            QuadAdditiveState state;
            state.basis.kinds = d.column_kinds;
            state.basis.knots.resize(p);
            for (std::size_t c = 0; c < p; ++c) {
                if (d.column_kinds[c] != ColumnKind::continuous) continue;
                const std::vector<double> col = x.column(c);
                state.basis.knots[c] = {quantile(col, 0.25), quantile(col, 0.5),
                                        quantile(col, 0.75)};
            }
            const Matrix expanded = state.basis.expand(x);
            auto irls = detail::fit_logistic_irls(expanded, y, spec.get_count("max_iter", 100),
                                                  spec.get("tol", 1e-8), spec.get("ridge", 1e-8));
            model.convergence_warning = !irls.converged;
            state.coef.beta = std::move(irls.beta);
            model.state = std::move(state);
            break;
        }
        case LearnerKind::cart: {
            TreeConfig cfg;
            cfg.max_depth = spec.get_count("max_depth", 10);
            cfg.min_leaf = spec.get_count("min_leaf", 5);
            cfg.mtry = 0;
            Rng rng(derive_seed(spec.seed, "cart"));
            std::vector<std::uint32_t> rows(n);
            std::iota(rows.begin(), rows.end(), std::uint32_t{0});
            TreeState state;
            state.tree.fit(x, y, std::move(rows), cfg, rng);
            model.state = std::move(state);
            break;
        }
        case LearnerKind::random_forest:
        case LearnerKind::bagged_trees: {
            const bool forest = spec.kind == LearnerKind::random_forest;
            TreeConfig cfg;
            // Forest trees grow to (near) purity, classification-style;
            // bagged trees reuse the cart defaults.
            cfg.max_depth = spec.get_count("max_depth", forest ? 25 : 10);
            cfg.min_leaf = spec.get_count("min_leaf", forest ? 1 : 5);
            const std::size_t default_mtry =
                forest ? std::max<std::size_t>(1, static_cast<std::size_t>(
                                                      std::lround(std::sqrt(double(p)))))
                       : 0;
            cfg.mtry = forest ? spec.get_count("mtry", default_mtry) : 0;
            const std::size_t trees = spec.get_count("trees", forest ? 500 : 100);
            const char* tag = forest ? "forest.tree" : "bagging.tree";
            ForestState state;
            state.trees.resize(trees);
            for (std::size_t t = 0; t < trees; ++t) {
                Rng rng(derive_seed(spec.seed, tag, t));
                state.trees[t].fit(x, y, detail::bootstrap_rows(n, rng), cfg, rng);
            }
            model.state = std::move(state);
            break;
        }
        case LearnerKind::knn: {
            KnnState state;
            state.k = spec.get_count("k", 10);
            state.train_x = x;
            state.train_y = y;
            model.state = std::move(state);
            break;
        }
        case LearnerKind::boosted_stumps: {
            BoostState state;
            state.shrinkage = spec.get("shrinkage", 0.1);
            if (!(state.shrinkage > 0.0))
                throw BadLearnerSpecError("boosted_stumps: shrinkage must be positive");
            const std::size_t rounds = spec.get_count("rounds", 200);
            double pos = 0.0;
            for (int v : y) pos += v;
            const double prior = pos / static_cast<double>(n);
            state.intercept = std::log(prior / (1.0 - prior));
            std::vector<double> score(n, state.intercept);
            std::vector<double> residual(n), hessian(n);
            std::vector<std::pair<double, std::uint32_t>> scratch(n);
            state.stumps.reserve(rounds);
            for (std::size_t round = 0; round < rounds; ++round) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double prob = sigmoid(score[i]);
                    residual[i] = static_cast<double>(y[i]) - prob;
                    hessian[i] = std::max(prob * (1.0 - prob), 1e-12);
                }
                BoostState::Stump stump = detail::fit_stump(x, residual, hessian, scratch);
                if (stump.feature < 0) break;
                for (std::size_t i = 0; i < n; ++i) {
                    const double leaf =
                        x(i, stump.feature) < stump.threshold ? stump.left : stump.right;
                    score[i] += state.shrinkage * leaf;
                }
                state.stumps.push_back(stump);
            }
            model.state = std::move(state);
            break;
        }
        case LearnerKind::linear_svm: {
            // Full-batch projected subgradient on the hinge objective
            //   reg/2 ||w||^2 + (1/n) sum max(0, 1 - z_i (w.x_i + b)),
            // reg = 1/(C n). Damped Pegasos steps with ball projection; the
            // best iterate by objective value is kept.
            const double c_param = spec.get("c", 1.0);
            if (!(c_param > 0.0)) throw BadLearnerSpecError("linear_svm: c must be positive");
            const std::size_t iterations = spec.get_count("iterations", 1000);
            const double reg = 1.0 / (c_param * static_cast<double>(n));
            const double inv_n = 1.0 / static_cast<double>(n);
            const double radius = 1.0 / std::sqrt(reg);

            SvmState state;
            state.weights.assign(p, 0.0);
            std::vector<double> w(p, 0.0);
            double bias = 0.0;
            double best_objective = std::numeric_limits<double>::infinity();
            std::vector<double> grad(p);
            for (std::size_t t = 1; t <= iterations; ++t) {
                std::fill(grad.begin(), grad.end(), 0.0);
                double grad_b = 0.0, hinge = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double z = y[i] == 1 ? 1.0 : -1.0;
                    const double* row = x.row_ptr(i);
                    double margin = bias;
                    for (std::size_t c = 0; c < p; ++c) margin += row[c] * w[c];
                    const double slack = 1.0 - z * margin;
                    if (slack > 0.0) {
                        hinge += slack;
                        for (std::size_t c = 0; c < p; ++c) grad[c] -= z * row[c];
                        grad_b -= z;
                    }
                }
                double wnorm2 = 0.0;
                for (double v : w) wnorm2 += v * v;
                const double objective = 0.5 * reg * wnorm2 + hinge * inv_n;
                if (objective < best_objective) {
                    best_objective = objective;
                    state.weights = w;
                    state.bias = bias;
                }
                const double step = 1.0 / (reg * (static_cast<double>(t) + 10.0));
                for (std::size_t c = 0; c < p; ++c)
                    w[c] -= step * (reg * w[c] + grad[c] * inv_n);
                bias -= step * grad_b * inv_n;
                double norm = 0.0;
                for (double v : w) norm += v * v;
                norm = std::sqrt(norm);
                if (norm > radius) {
                    const double shrink = radius / norm;
                    for (double& v : w) v *= shrink;
                }
            }
            model.state = std::move(state);
            break;
        }
    }
    return model;
}

inline std::vector<double> predict(const FittedModel& model, const Matrix& features) {
    if (features.rows() > 0 && features.cols() != model.feature_count)
        throw ShapeMismatchError(features.cols(), model.feature_count);
    const std::size_t n = features.rows();
    std::vector<double> out(n, 0.0);

    if (const auto* lin = std::get_if<LinearCoefficients>(&model.state)) {
        return detail::predict_linear_logit(features, lin->beta);
    }
    if (const auto* quad = std::get_if<QuadAdditiveState>(&model.state)) {
        std::vector<double> row(quad->basis.width());
        for (std::size_t i = 0; i < n; ++i) {
            quad->basis.expand_row(features.row_ptr(i), row.data());
            double eta = quad->coef.beta[0];
            for (std::size_t c = 0; c < row.size(); ++c) eta += row[c] * quad->coef.beta[c + 1];
            out[i] = sigmoid(eta);
        }
        return out;
    }
    if (const auto* tree = std::get_if<TreeState>(&model.state)) {
        for (std::size_t i = 0; i < n; ++i) out[i] = tree->tree.predict_row(features.row_ptr(i));
        return out;
    }
    if (const auto* forest = std::get_if<ForestState>(&model.state)) {
        const double inv = 1.0 / static_cast<double>(forest->trees.size());
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (const DecisionTree& tree : forest->trees)
                acc += tree.predict_row(features.row_ptr(i));
            out[i] = acc * inv;
        }
        return out;
    }
    if (const auto* knn = std::get_if<KnnState>(&model.state)) {
        const std::size_t train_n = knn->train_x.rows();
        const std::size_t k = std::min(knn->k, train_n);
        std::vector<std::pair<double, std::size_t>> dist(train_n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* q = features.row_ptr(i);
            for (std::size_t j = 0; j < train_n; ++j) {
                const double* t = knn->train_x.row_ptr(j);
                double acc = 0.0;
                for (std::size_t c = 0; c < features.cols(); ++c) {
                    const double diff = q[c] - t[c];
                    acc += diff * diff;
                }
                dist[j] = {acc, j};
            }
            std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
            const double kth = dist[k - 1].first;
            // Average over everything tied with the k-th distance so the
            // result cannot depend on training row order.
            std::size_t used = 0, positives = 0;
            for (std::size_t j = 0; j < train_n; ++j) {
                if (dist[j].first <= kth) {
                    ++used;
                    positives += static_cast<std::size_t>(knn->train_y[dist[j].second]);
                }
            }
            out[i] = static_cast<double>(positives) / static_cast<double>(used);
        }
        return out;
    }
    if (const auto* boost = std::get_if<BoostState>(&model.state)) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = features.row_ptr(i);
            double score = boost->intercept;
            for (const auto& stump : boost->stumps)
                score += boost->shrinkage *
                         (row[stump.feature] < stump.threshold ? stump.left : stump.right);
            out[i] = sigmoid(score);
        }
        return out;
    }
    if (const auto* svm = std::get_if<SvmState>(&model.state)) {
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = features.row_ptr(i);
            double margin = svm->bias;
            for (std::size_t c = 0; c < features.cols(); ++c)
                margin += row[c] * svm->weights[c];
            out[i] = sigmoid(margin);
        }
        return out;
    }
    return out;
}

}  // namespace stackrule
