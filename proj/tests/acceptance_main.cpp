// Acceptance suite: one pass/fail line per criterion. Everything is
// deterministic; seeds 1..5 are the suite's standard replication seeds.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stackrule/config.hpp"
#include "stackrule/evaluation.hpp"
#include "stackrule/experiment.hpp"
#include "stackrule/nnls.hpp"
#include "stackrule/simulation.hpp"

using namespace stackrule;

namespace {

struct Check {
    int id = 0;
    std::string title;
    bool pass = true;
    std::string detail;
};

std::string g_cli_path;
std::vector<std::pair<double, double>> g_objective_pairs; // (crs, two_step)

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

const std::string kWdbc = std::string(STACKRULE_DATA_DIR) + "/wdbc.csv";

PipelineConfig sim_pipeline(std::uint64_t seed) {
    PipelineConfig cfg;
    cfg.library = build_library("four", ConfigMap());
    cfg.inner_folds = 10;
    cfg.seed = seed;
    cfg.workers = 2;
    return cfg;
}

struct SimRunResult {
    std::map<std::string, std::map<double, double>> rel_diff; // method -> lambda -> value
};

// One simulated train/test replication: rules from the training draw,
// risks on the test draw, relative differences against the Bayes rule.
SimRunResult sim_compare_once(SimSetting setting, std::uint64_t seed,
                              const std::vector<double>& lambdas) {
    SimConfig sim;
    sim.n = 10000;
    sim.setting = setting;
    sim.seed = seed;
    sim.stream = "d1";
    const SimSample train = generate(sim);
    sim.stream = "d2";
    const SimSample test = generate(sim);

    const PipelineConfig cfg = sim_pipeline(seed);
    const TrainedStack stack = run_stacking(train.dataset, cfg);
    Dataset test_std = test.dataset;
    test_std.features = apply_standardization(stack.standardization, test.dataset.features);

    SimRunResult out;
    for (double lambda : lambdas) {
        const LossSpec spec(lambda);
        const double bayes = bayes_rule_risk(test, spec);
        CrsOptions crs_opts;
        crs_opts.seed = derive_seed(seed, "crs");
        const EnsembleRule cond = derive_rule(stack, Method::conditional, spec, crs_opts);
        const EnsembleRule ts = derive_rule(stack, Method::two_step, spec, crs_opts);
        const EnsembleRule crs = derive_rule(stack, Method::crs, spec, crs_opts);
        g_objective_pairs.emplace_back(crs.training_objective, ts.training_objective);
        out.rel_diff["conditional"][lambda] =
            relative_difference(out_of_sample_eval(cond, stack.models, test_std, spec), bayes);
        out.rel_diff["two_step"][lambda] =
            relative_difference(out_of_sample_eval(ts, stack.models, test_std, spec), bayes);
        out.rel_diff["crs"][lambda] =
            relative_difference(out_of_sample_eval(crs, stack.models, test_std, spec), bayes);
    }
    return out;
}

// ---------------------------------------------------------------- 1
Check criterion1() {
    Check c{1, "Bayes baseline risks 6.1/14.8/12.9% (+-0.7pp, 5-seed mean)"};
    const std::vector<double> lambdas = {0.2, 0.5, 0.8};
    const std::vector<double> expected = {0.061, 0.148, 0.129};
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        double acc = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            SimConfig sim;
            sim.n = 10000;
            sim.seed = seed;
            sim.setting = SimSetting::observed_u;
            sim.stream = "d2";
            acc += bayes_rule_risk(generate(sim), LossSpec(lambdas[j]));
        }
        const double mean_risk = acc / 5.0;
        c.detail += (j ? " " : "") + fmt(mean_risk * 100.0) + "%";
        if (std::fabs(mean_risk - expected[j]) > 0.007) c.pass = false;
    }
    return c;
}

// ---------------------------------------------------------------- 2
Check criterion2() {
    Check c{2, "Simulation 1 parity: all methods within 5% of Bayes (5-seed mean)"};
    const std::vector<double> lambdas = {0.2, 0.5, 0.8};
    std::map<std::string, std::map<double, double>> mean;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SimRunResult r = sim_compare_once(SimSetting::observed_u, seed, lambdas);
        for (const auto& [method, by_lambda] : r.rel_diff)
            for (const auto& [lambda, value] : by_lambda) mean[method][lambda] += value / 5.0;
    }
    double worst = 0.0;
    for (const auto& [method, by_lambda] : mean)
        for (const auto& [lambda, value] : by_lambda) worst = std::max(worst, value);
    c.detail = "worst mean rel diff " + fmt(worst * 100.0) + "%";
    c.pass = worst <= 0.05;
    return c;
}

// ---------------------------------------------------------------- 3
Check criterion3() {
    Check c{3, "Simulation 2 separation at lambda=0.2 (conditional worse by >=5pp)"};
    std::map<std::string, double> mean;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SimRunResult r = sim_compare_once(SimSetting::transformed_x, seed, {0.2});
        for (const auto& [method, by_lambda] : r.rel_diff)
            mean[method] += by_lambda.at(0.2) / 5.0;
    }
    const double cond = mean["conditional"], ts = mean["two_step"], crs = mean["crs"];
    c.detail = "means: conditional " + fmt(cond * 100.0) + "%, two_step " + fmt(ts * 100.0) +
               "%, crs " + fmt(crs * 100.0) + "%";
    c.pass = (cond - ts >= 0.05) && (cond - crs >= 0.05) && ts <= 0.06 && crs <= 0.06;
    return c;
}

// ---------------------------------------------------------------- 4
Check criterion4() {
    Check c{4, "WDBC ordering at lambda=0.2, K=4; alpha structure on K=8"};
    CsvOptions opts;
    opts.drop_columns = {"id"};
    const Dataset d = load_csv(kWdbc, "diagnosis", opts);

    const auto risks = cv_risk_grid({Method::conditional, Method::two_step, Method::crs}, {0.2},
                                    build_library("four", ConfigMap()), d, 10, 1, 10, 2);
    const double cond = risks[0][0], ts = risks[1][0], crs = risks[2][0];
    c.detail = "cv risks: conditional " + fmt(cond * 100.0) + "%, two_step " + fmt(ts * 100.0) +
               "%, crs " + fmt(crs * 100.0) + "%";
    c.pass = ts <= cond && crs <= cond;
    for (double v : {cond, ts, crs})
        if (v < 0.005 || v > 0.06) c.pass = false;

    // Weight structure on the eight-learner library: conditional
    // and two-step share weights at every lambda (and across lambda), while
    // crs weights move away for at least one lambda.
    PipelineConfig cfg;
    cfg.library = build_library("eight", ConfigMap());
    cfg.inner_folds = 10;
    cfg.seed = 1;
    cfg.workers = 2;
    const TrainedStack stack = run_stacking(d, cfg);
    std::vector<std::vector<double>> nnls_alphas, crs_alphas;
    for (double lambda : {0.2, 0.5, 0.8}) {
        const LossSpec spec(lambda);
        CrsOptions crs_opts;
        crs_opts.seed = derive_seed(cfg.seed, "crs");
        const EnsembleRule cond_rule = derive_rule(stack, Method::conditional, spec, crs_opts);
        const EnsembleRule ts_rule = derive_rule(stack, Method::two_step, spec, crs_opts);
        const EnsembleRule crs_rule = derive_rule(stack, Method::crs, spec, crs_opts);
        g_objective_pairs.emplace_back(crs_rule.training_objective, ts_rule.training_objective);
        if (cond_rule.alpha != ts_rule.alpha) c.pass = false;
        nnls_alphas.push_back(ts_rule.alpha);
        crs_alphas.push_back(crs_rule.alpha);
    }
    for (std::size_t i = 1; i < nnls_alphas.size(); ++i)
        if (nnls_alphas[i] != nnls_alphas[0]) c.pass = false; // fixed across lambda
    bool crs_moves = false;
    for (std::size_t i = 0; i < crs_alphas.size(); ++i)
        if (crs_alphas[i] != nnls_alphas[i]) crs_moves = true;
    if (!crs_moves) c.pass = false;
    return c;
}

// ---------------------------------------------------------------- 5
Check criterion5() {
    Check c{5, "Threshold converges to 1-lambda on the true-probability score"};
    SimConfig sim;
    sim.n = 10000;
    sim.seed = 1;
    const SimSample s = generate(sim);
    ScoreMatrix z;
    z.values = Matrix(sim.n, 1);
    for (std::size_t i = 0; i < sim.n; ++i) z.values(i, 0) = s.bayes_score[i];
    z.provenance = ScoreProvenance::cross_validated;
    z.learner_ids.resize(1);
    FoldPlan plan;
    plan.fold_count = 2;
    plan.assignments.resize(sim.n);
    for (std::size_t i = 0; i < sim.n; ++i) plan.assignments[i] = i % 2;
    z.plan = plan;
    for (double lambda : {0.2, 0.5, 0.8}) {
        const EnsembleRule ts = two_step(z, s.dataset.labels, LossSpec(lambda));
        const double gap = std::fabs(ts.threshold - (1.0 - lambda));
        c.detail += (c.detail.empty() ? "|c-(1-l)| = " : ", ") + fmt(gap);
        if (gap > 0.05) c.pass = false;
    }
    return c;
}

// ---------------------------------------------------------------- 6
Check criterion6() {
    Check c{6, "Line search equals exhaustive enumeration on 1000 instances"};
    Rng rng(20240601);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.uniform_int(500);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = rng.uniform() < 0.5 ? 0.1 * static_cast<double>(rng.uniform_int(12))
                                            : rng.uniform();
            labels[i] = rng.uniform() < 0.4 ? 1 : 0;
        }
        const LossSpec spec(0.02 + 0.96 * rng.uniform());
        const ThresholdResult found = threshold_line_search(scores, labels, spec);

        std::set<double> unique(scores.begin(), scores.end());
        double oracle = empirical_risk(labels, scores, *unique.rbegin() + 1.0, spec).risk;
        for (double value : unique)
            oracle = std::min(oracle, empirical_risk(labels, scores, value, spec).risk);
        if (found.risk != oracle ||
            empirical_risk(labels, scores, found.threshold, spec).risk != found.risk) {
            c.pass = false;
            c.detail = "mismatch at trial " + std::to_string(trial);
            break;
        }
    }
    return c;
}

// ---------------------------------------------------------------- 7
Check criterion7() {
    Check c{7, "CRS joint objective within 1/n of the simplex-grid oracle (200 runs)"};
    Rng rng(20240701);
    double worst = -1.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 30;
        Matrix values(n, 2);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.uniform() < 0.4 ? 1 : 0;
            values(i, 0) = 0.5 * rng.uniform() + 0.4 * labels[i] * rng.uniform();
            values(i, 1) = rng.uniform();
        }
        labels[0] = 0;
        labels[n - 1] = 1;
        ScoreMatrix z;
        z.values = values;
        z.provenance = ScoreProvenance::cross_validated;
        z.learner_ids.resize(2);
        FoldPlan plan;
        plan.fold_count = 2;
        plan.assignments.resize(n);
        for (std::size_t i = 0; i < n; ++i) plan.assignments[i] = i % 2;
        z.plan = plan;

        const LossSpec spec(0.05 + 0.9 * rng.uniform());
        CrsOptions opts;
        opts.seed = static_cast<std::uint64_t>(trial);
        const auto [grid_min, crs_value] = grid_selector_check(z, labels, spec, 0.02, opts);
        g_objective_pairs.emplace_back(crs_value,
                                       two_step(z, labels, spec).training_objective);
        worst = std::max(worst, crs_value - grid_min);
        if (crs_value > grid_min + 1.0 / static_cast<double>(n)) {
            c.pass = false;
            c.detail = "trial " + std::to_string(trial) + ": crs " + fmt(crs_value) +
                       " vs grid " + fmt(grid_min);
            break;
        }
    }
    if (c.pass) c.detail = "worst crs-grid gap " + fmt(worst);
    return c;
}

// ---------------------------------------------------------------- 8
Check criterion8() {
    Check c{8, "NNLS: KKT residuals <= 1e-6 (1000 runs) and grid parity 1e-4"};
    Rng rng(20240801);
    for (int trial = 0; trial < 1000 && c.pass; ++trial) {
        const std::size_t n = 3 + rng.uniform_int(40);
        const std::size_t k = 1 + rng.uniform_int(6);
        Matrix a(n, k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t col = 0; col < k; ++col) a(i, col) = rng.uniform(-1.0, 1.0);
        std::vector<double> b(n);
        for (auto& v : b) v = rng.uniform(-1.0, 1.0);
        const NnlsSolution sol = nnls(a, b);

        std::vector<double> residual(n);
        for (std::size_t i = 0; i < n; ++i) {
            double fit = 0.0;
            for (std::size_t col = 0; col < k; ++col) fit += a(i, col) * sol.coefficients[col];
            residual[i] = fit - b[i];
        }
        for (std::size_t col = 0; col < k; ++col) {
            double grad = 0.0;
            for (std::size_t i = 0; i < n; ++i) grad += a(i, col) * residual[i];
            if (sol.coefficients[col] > 0.0 ? std::fabs(grad) > 1e-6 : grad < -1e-6) {
                c.pass = false;
                c.detail = "KKT violation at trial " + std::to_string(trial);
            }
        }
    }
    // Octant-grid parity on 3-variable instances.
    for (int trial = 0; trial < 3 && c.pass; ++trial) {
        const std::size_t n = 20, k = 3;
        Matrix a(n, k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t col = 0; col < k; ++col) a(i, col) = rng.uniform(0.0, 0.22);
        std::vector<double> truth = {rng.uniform(), 0.0, rng.uniform()};
        std::vector<double> b(n);
        for (std::size_t i = 0; i < n; ++i) {
            double fit = 0.0;
            for (std::size_t col = 0; col < k; ++col) fit += a(i, col) * truth[col];
            b[i] = fit + 0.02 * rng.normal();
        }
        const NnlsSolution sol = nnls(a, b);
        double nnls_obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double fit = 0.0;
            for (std::size_t col = 0; col < k; ++col) fit += a(i, col) * sol.coefficients[col];
            nnls_obj += (fit - b[i]) * (fit - b[i]);
        }
        Matrix gram(k, k);
        std::vector<double> atb(k, 0.0);
        double btb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            btb += b[i] * b[i];
            for (std::size_t c1 = 0; c1 < k; ++c1) {
                atb[c1] += a(i, c1) * b[i];
                for (std::size_t c2 = 0; c2 < k; ++c2) gram(c1, c2) += a(i, c1) * a(i, c2);
            }
        }
        double grid_min = std::numeric_limits<double>::infinity();
        for (int i0 = 0; i0 <= 200; ++i0)
            for (int i1 = 0; i1 <= 200; ++i1) {
                const double x0 = 0.01 * i0, x1 = 0.01 * i1;
                const double c1base = 2.0 * (gram(0, 2) * x0 + gram(1, 2) * x1 - atb[2]);
                const double c0 = gram(0, 0) * x0 * x0 + 2.0 * gram(0, 1) * x0 * x1 +
                                  gram(1, 1) * x1 * x1 - 2.0 * (atb[0] * x0 + atb[1] * x1) + btb;
                for (int i2 = 0; i2 <= 200; ++i2) {
                    const double x2 = 0.01 * i2;
                    const double value = c0 + c1base * x2 + gram(2, 2) * x2 * x2;
                    if (value < grid_min) grid_min = value;
                }
            }
        if (nnls_obj - grid_min > 1e-4 || grid_min - nnls_obj > 1e-4) {
            c.pass = false;
            c.detail = "grid gap " + fmt(nnls_obj - grid_min);
        }
    }
    return c;
}

// ---------------------------------------------------------------- 9
Check criterion9() {
    Check c{9, "Criterion-3 command byte-identical under 1 and 2 workers"};
    if (g_cli_path.empty()) {
        c.pass = false;
        c.detail = "cli path not supplied (--cli)";
        return c;
    }
    const std::string base =
        "\"" + g_cli_path +
        "\" compare --sim setting2 --n 10000 --lambda 0.2 --library four "
        "--methods conditional,two_step,crs --seed 1,2,3,4,5 --no-timing";
    const auto run_to = [&](const std::string& dir, int workers) {
        std::filesystem::remove_all(dir);
        const std::string cmd =
            base + " --workers " + std::to_string(workers) + " --out " + dir + " > /dev/null";
        return std::system(cmd.c_str());
    };
    if (run_to("acceptance_w1", 1) != 0 || run_to("acceptance_w2", 2) != 0) {
        c.pass = false;
        c.detail = "cli run failed";
        return c;
    }
    const auto slurp = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    };
    const std::string a = slurp("acceptance_w1/report.csv");
    const std::string b = slurp("acceptance_w2/report.csv");
    if (a.empty() || a != b) {
        c.pass = false;
        c.detail = "report files differ or are empty";
    } else {
        c.detail = std::to_string(a.size()) + " bytes identical";
    }
    std::filesystem::remove_all("acceptance_w1");
    std::filesystem::remove_all("acceptance_w2");
    return c;
}

// ---------------------------------------------------------------- 10
Check criterion10() {
    Check c{10, "Safeguarded dominance: crs objective <= two-step objective, exactly"};
    std::size_t violations = 0;
    for (const auto& [crs, ts] : g_objective_pairs)
        if (crs > ts) ++violations;
    c.pass = violations == 0 && !g_objective_pairs.empty();
    c.detail = std::to_string(g_objective_pairs.size()) + " instances, " +
               std::to_string(violations) + " violations";
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--cli" && i + 1 < argc) g_cli_path = argv[++i];
        if (arg == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
    }

    std::vector<Check (*)()> criteria = {criterion1, criterion2, criterion3, criterion4,
                                         criterion5, criterion6, criterion7, criterion8,
                                         criterion9, criterion10};
    bool all_pass = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only != 0 && static_cast<int>(i + 1) != only) continue;
        Check result;
        try {
            result = criteria[i]();
        } catch (const std::exception& e) {
            result.id = static_cast<int>(i + 1);
            result.title = "exception";
            result.pass = false;
            result.detail = e.what();
        }
        std::printf("criterion %2d %s — %s%s%s\n", result.id, result.pass ? "PASS" : "FAIL",
                    result.title.c_str(), result.detail.empty() ? "" : ": ",
                    result.detail.c_str());
        std::fflush(stdout);
        if (!result.pass) all_pass = false;
    }
    return all_pass ? 0 : 1;
}
