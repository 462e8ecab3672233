#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "stackrule/learners.hpp"
#include "stackrule/loss.hpp"
#include "stackrule/rng.hpp"

using namespace stackrule;

namespace {

Dataset toy_dataset(std::size_t n, std::size_t p, std::uint64_t seed,
                    double (*score)(const double*)) {
    Dataset d;
    d.features = Matrix(n, p);
    d.labels.resize(n);
    d.column_kinds.assign(p, ColumnKind::continuous);
    d.column_names.resize(p);
    for (std::size_t c = 0; c < p; ++c) d.column_names[c] = "f" + std::to_string(c);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < p; ++c) d.features(i, c) = rng.uniform(-1.0, 1.0);
        d.labels[i] = score(d.features.row_ptr(i)) > 0.0 ? 1 : 0;
    }
    // Guarantee both classes.
    d.labels[0] = 0;
    d.labels[n - 1] = 1;
    return d;
}

double train_accuracy(const FittedModel& model, const Dataset& d, double threshold = 0.5) {
    const std::vector<double> scores = predict(model, d.features);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < d.n(); ++i)
        if ((scores[i] >= threshold ? 1 : 0) == d.labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(d.n());
}

LearnerSpec spec_of(LearnerKind kind, std::uint64_t seed = 0) {
    LearnerSpec spec;
    spec.kind = kind;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("logistic separates separable data", "[learners]") {
    Dataset d;
    d.features = Matrix(20, 2);
    d.labels.resize(20);
    d.column_kinds = {ColumnKind::continuous, ColumnKind::continuous};
    d.column_names = {"a", "b"};
    Rng rng(11);
    for (std::size_t i = 0; i < 20; ++i) {
        const double margin = i < 10 ? -1.0 : 1.0;
        d.features(i, 0) = margin + 0.3 * rng.uniform();
        d.features(i, 1) = rng.uniform(-1.0, 1.0);
        d.labels[i] = margin > 0.0 ? 1 : 0;
    }
    const FittedModel model = fit(spec_of(LearnerKind::logistic), d);
    CHECK(train_accuracy(model, d) == 1.0);
}

TEST_CASE("logistic gradient vanishes at the fitted coefficients", "[learners]") {
    const Dataset d = toy_dataset(200, 2, 5, [](const double* x) { return x[0] + 0.5 * x[1]; });
    const FittedModel model = fit(spec_of(LearnerKind::logistic), d);
    const auto& beta = std::get<LinearCoefficients>(model.state).beta;
    // Penalized log-likelihood gradient at the solution.
    std::vector<double> grad(beta.size(), 0.0);
    for (std::size_t i = 0; i < d.n(); ++i) {
        double eta = beta[0];
        for (std::size_t c = 0; c < d.p(); ++c) eta += d.features(i, c) * beta[c + 1];
        const double r = static_cast<double>(d.labels[i]) - sigmoid(eta);
        grad[0] += r;
        for (std::size_t c = 0; c < d.p(); ++c) grad[c + 1] += r * d.features(i, c);
    }
    for (std::size_t c = 1; c < beta.size(); ++c) grad[c] -= 1e-8 * beta[c];
    double norm = 0.0;
    for (double g : grad) norm = std::max(norm, std::fabs(g));
    CHECK(norm <= 1e-6);
    CHECK_FALSE(model.convergence_warning);
}

TEST_CASE("quadratic-spline learner captures a curved boundary", "[learners]") {
    // Label depends on x^2; a linear logit cannot separate, the quadratic
    // basis can.
    const Dataset d = toy_dataset(300, 1, 9, [](const double* x) { return x[0] * x[0] - 0.4; });
    const FittedModel quad = fit(spec_of(LearnerKind::quad_additive), d);
    const FittedModel lin = fit(spec_of(LearnerKind::logistic), d);
    CHECK(train_accuracy(quad, d) > 0.95);
    CHECK(train_accuracy(quad, d) > train_accuracy(lin, d) + 0.2);
}

TEST_CASE("quadratic basis leaves binary columns linear", "[learners]") {
    Dataset d;
    d.features = Matrix(40, 2);
    d.labels.resize(40);
    d.column_kinds = {ColumnKind::continuous, ColumnKind::binary};
    d.column_names = {"c", "b"};
    Rng rng(4);
    for (std::size_t i = 0; i < 40; ++i) {
        d.features(i, 0) = rng.uniform(-1, 1);
        d.features(i, 1) = rng.uniform() < 0.5 ? -1.0 : 1.0;
        d.labels[i] = rng.uniform() < 0.5 ? 1 : 0;
    }
    d.labels[0] = 0;
    d.labels[1] = 1;
    const FittedModel model = fit(spec_of(LearnerKind::quad_additive), d);
    const auto& state = std::get<QuadAdditiveState>(model.state);
    CHECK(state.basis.width() == 6); // 5 terms for the continuous column + 1 linear
}

TEST_CASE("cart finds the single separating split", "[learners]") {
    const Dataset d = toy_dataset(60, 2, 21, [](const double* x) { return x[0]; });
    const FittedModel model = fit(spec_of(LearnerKind::cart), d);
    const auto& tree = std::get<TreeState>(model.state).tree;

    REQUIRE(tree.nodes().size() >= 3);
    CHECK(tree.nodes()[0].feature == 0);
    CHECK(train_accuracy(model, d) == 1.0);

    // Brute-force oracle: no (feature, threshold) beats a split on x0 at the
    // sign boundary in Gini score.
    double best_score = -1.0;
    std::size_t best_feature = 99;
    for (std::size_t f = 0; f < 2; ++f) {
        std::vector<double> values = d.features.column(f);
        std::sort(values.begin(), values.end());
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
            const double thr = 0.5 * (values[i] + values[i + 1]);
            double lp = 0, ln = 0, rp = 0, rn = 0;
            for (std::size_t r = 0; r < d.n(); ++r) {
                const bool left = d.features(r, f) < thr;
                if (left)
                    (d.labels[r] ? lp : ln) += 1.0;
                else
                    (d.labels[r] ? rp : rn) += 1.0;
            }
            if (lp + ln < 5 || rp + rn < 5) continue;
            const double score = (lp * lp + ln * ln) / (lp + ln) + (rp * rp + rn * rn) / (rp + rn);
            if (score > best_score) {
                best_score = score;
                best_feature = f;
            }
        }
    }
    CHECK(best_feature == 0);
}

TEST_CASE("cart with min_leaf = n degenerates to the prevalence", "[learners]") {
    const Dataset d = toy_dataset(30, 2, 33, [](const double* x) { return x[0]; });
    LearnerSpec spec = spec_of(LearnerKind::cart);
    spec.hyper["min_leaf"] = 30.0;
    const FittedModel model = fit(spec, d);
    double prevalence = 0.0;
    for (int y : d.labels) prevalence += y;
    prevalence /= static_cast<double>(d.n());
    const std::vector<double> scores = predict(model, d.features);
    for (double s : scores) CHECK(s == prevalence);
}

TEST_CASE("knn scores are neighbor fractions", "[learners]") {
    SECTION("k=1 on its own training points echoes the labels") {
        const Dataset d = toy_dataset(50, 2, 77, [](const double* x) { return x[0] - x[1]; });
        LearnerSpec spec = spec_of(LearnerKind::knn);
        spec.hyper["k"] = 1.0;
        const FittedModel model = fit(spec, d);
        const std::vector<double> scores = predict(model, d.features);
        for (std::size_t i = 0; i < d.n(); ++i)
            REQUIRE(scores[i] == static_cast<double>(d.labels[i]));
    }
    SECTION("k=10 fraction of positives") {
        // Ten training points at distance ~1 from the origin, 7 positive;
        // the query at the origin must score 0.7.
        Dataset d;
        d.features = Matrix(10, 2);
        d.labels.resize(10);
        d.column_kinds.assign(2, ColumnKind::continuous);
        d.column_names = {"a", "b"};
        for (std::size_t i = 0; i < 10; ++i) {
            const double angle = 0.62831853 * static_cast<double>(i);
            d.features(i, 0) = std::cos(angle);
            d.features(i, 1) = std::sin(angle);
            d.labels[i] = i < 7 ? 1 : 0;
        }
        const FittedModel model = fit(spec_of(LearnerKind::knn), d);
        Matrix query(1, 2, 0.0);
        CHECK(predict(model, query)[0] == Approx(0.7));
    }
}

TEST_CASE("forest scores pure regions with the training label", "[learners]") {
    // Two well-separated blobs: every training point sits in a pure region.
    Dataset d;
    d.features = Matrix(40, 2);
    d.labels.resize(40);
    d.column_kinds.assign(2, ColumnKind::continuous);
    d.column_names = {"a", "b"};
    Rng rng(3);
    for (std::size_t i = 0; i < 40; ++i) {
        const double center = i < 20 ? -5.0 : 5.0;
        d.features(i, 0) = center + rng.uniform(-0.5, 0.5);
        d.features(i, 1) = center + rng.uniform(-0.5, 0.5);
        d.labels[i] = i < 20 ? 0 : 1;
    }
    LearnerSpec spec = spec_of(LearnerKind::random_forest, 8);
    spec.hyper["trees"] = 50.0;
    spec.hyper["min_leaf"] = 1.0;
    const FittedModel model = fit(spec, d);
    const std::vector<double> scores = predict(model, d.features);
    for (std::size_t i = 0; i < d.n(); ++i)
        REQUIRE(scores[i] == static_cast<double>(d.labels[i]));
}

TEST_CASE("boosted stumps and svm separate separable data", "[learners]") {
    // Margin of ~1 between the classes; at C = 1 the regularizer no longer
    // trades away boundary points.
    Dataset d;
    d.features = Matrix(100, 2);
    d.labels.resize(100);
    d.column_kinds.assign(2, ColumnKind::continuous);
    d.column_names = {"a", "b"};
    Rng rng(13);
    for (std::size_t i = 0; i < 100; ++i) {
        const double shift = i < 50 ? -1.0 : 1.0;
        d.features(i, 0) = shift + rng.uniform(-0.45, 0.45);
        d.features(i, 1) = shift + rng.uniform(-0.45, 0.45);
        d.labels[i] = shift > 0.0 ? 1 : 0;
    }
    for (LearnerKind kind : {LearnerKind::boosted_stumps, LearnerKind::linear_svm}) {
        const FittedModel model = fit(spec_of(kind, 2), d);
        CHECK(train_accuracy(model, d) >= 0.99);
    }
}

TEST_CASE("scores are finite and inside [0,1] for every learner", "[learners]") {
    const Dataset d = toy_dataset(80, 3, 1234, [](const double* x) { return x[0] * x[1] + x[2]; });
    for (LearnerKind kind :
         {LearnerKind::logistic, LearnerKind::quad_additive, LearnerKind::cart,
          LearnerKind::random_forest, LearnerKind::knn, LearnerKind::boosted_stumps,
          LearnerKind::linear_svm, LearnerKind::bagged_trees}) {
        LearnerSpec spec = spec_of(kind, 5);
        if (kind == LearnerKind::random_forest || kind == LearnerKind::bagged_trees)
            spec.hyper["trees"] = 25.0;
        const FittedModel model = fit(spec, d);
        for (double s : predict(model, d.features)) {
            REQUIRE(std::isfinite(s));
            REQUIRE(s >= 0.0);
            REQUIRE(s <= 1.0);
        }
    }
}

TEST_CASE("fit and predict are deterministic given the seed", "[learners]") {
    const Dataset d = toy_dataset(60, 2, 42, [](const double* x) { return x[0] - 0.2 * x[1]; });
    for (LearnerKind kind : {LearnerKind::random_forest, LearnerKind::bagged_trees,
                             LearnerKind::boosted_stumps, LearnerKind::cart}) {
        LearnerSpec spec = spec_of(kind, 77);
        spec.hyper["trees"] = 20.0;
        const std::vector<double> a = predict(fit(spec, d), d.features);
        const std::vector<double> b = predict(fit(spec, d), d.features);
        REQUIRE(a == b);
    }
}

TEST_CASE("row permutation leaves deterministic learners unchanged", "[learners]") {
    const Dataset d = toy_dataset(50, 2, 66, [](const double* x) { return x[0] + x[1]; });
    std::vector<std::size_t> perm(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) perm[i] = d.n() - 1 - i;
    const Dataset shuffled = d.subset(perm);

    Matrix probe(7, 2);
    Rng rng(2);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t c = 0; c < 2; ++c) probe(i, c) = rng.uniform(-1, 1);

    for (LearnerKind kind :
         {LearnerKind::logistic, LearnerKind::quad_additive, LearnerKind::knn}) {
        const std::vector<double> a = predict(fit(spec_of(kind), d), probe);
        const std::vector<double> b = predict(fit(spec_of(kind), shuffled), probe);
        for (std::size_t i = 0; i < 7; ++i) REQUIRE(a[i] == Approx(b[i]).margin(1e-10));
    }
}

TEST_CASE("logistic flags non-convergence and keeps the best iterate", "[learners]") {
    const Dataset d = toy_dataset(80, 2, 3, [](const double* x) { return x[0]; });
    LearnerSpec starved = spec_of(LearnerKind::logistic);
    starved.hyper["max_iter"] = 1.0;
    const FittedModel model = fit(starved, d);
    CHECK(model.convergence_warning);
    // The single Newton step still beats the null model on accuracy.
    CHECK(train_accuracy(model, d) > 0.8);
}

TEST_CASE("learner error paths", "[learners]") {
    Dataset single;
    single.features = Matrix(4, 1);
    for (int i = 0; i < 4; ++i) single.features(i, 0) = i;
    single.labels = {1, 1, 1, 1};
    single.column_kinds = {ColumnKind::continuous};
    single.column_names = {"x"};
    CHECK_THROWS_AS(fit(spec_of(LearnerKind::logistic), single), SingleClassError);

    const Dataset d = toy_dataset(20, 2, 1, [](const double* x) { return x[0]; });
    const FittedModel model = fit(spec_of(LearnerKind::cart), d);
    Matrix wrong(3, 5, 0.0);
    CHECK_THROWS_AS(predict(model, wrong), ShapeMismatchError);

    Matrix empty(0, 2);
    CHECK(predict(model, empty).empty());

    LearnerSpec bad = spec_of(LearnerKind::knn);
    bad.hyper["k"] = 0.0;
    CHECK_THROWS_AS(fit(bad, d), BadLearnerSpecError);
    LearnerSpec bad_trees = spec_of(LearnerKind::random_forest);
    bad_trees.hyper["trees"] = 0.0;
    CHECK_THROWS_AS(fit(bad_trees, d), BadLearnerSpecError);
}
