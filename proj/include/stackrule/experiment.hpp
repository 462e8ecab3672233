#pragma once

#include <chrono>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "stackrule/config.hpp"
#include "stackrule/evaluation.hpp"
#include "stackrule/simulation.hpp"

namespace stackrule {

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::string lambda_tag(double lambda) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", lambda);
    std::string tag(buf);
    for (char& c : tag)
        if (c == '.') c = 'p';
    return tag;
}

inline std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

}  // namespace detail

inline Dataset load_cli_csv(const RunConfig& cfg) {
    CsvOptions opts;
    opts.positive_level = cfg.positive_level;
    opts.impute_indicator = cfg.impute_indicator;
    opts.drop_columns = cfg.drop_columns;
    return load_csv(cfg.csv_path, cfg.label_column, opts);
}

// Seeds actually run: each requested seed, plus derived variants when
// --repeats asks for more than one replication per seed.
inline std::vector<std::uint64_t> effective_seeds(const RunConfig& cfg) {
    std::vector<std::uint64_t> out;
    for (std::uint64_t seed : cfg.seeds) {
        out.push_back(seed);
        for (std::size_t r = 1; r < cfg.repeats; ++r)
            out.push_back(derive_seed(seed, "repeat", r));
    }
    return out;
}

inline void write_manifest(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MissingFileError(path);
    const auto command_name = [&]() {
        switch (cfg.command) {
            case RunConfig::Command::simulate: return "simulate";
            case RunConfig::Command::fit: return "fit";
            case RunConfig::Command::evaluate: return "evaluate";
            case RunConfig::Command::compare: return "compare";
        }
        return "?";
    };
    out << "command=" << command_name() << '\n';
    out << "lambda=";
    for (std::size_t i = 0; i < cfg.lambda_grid.size(); ++i)
        out << (i ? "," : "") << detail::full_precision(cfg.lambda_grid[i]);
    out << '\n';
    out << "library=" << cfg.library << '\n';
    out << "methods=";
    for (std::size_t i = 0; i < cfg.methods.size(); ++i)
        out << (i ? "," : "") << to_string(cfg.methods[i]);
    out << '\n';
    if (cfg.sim_setting) {
        out << "sim=" << to_string(*cfg.sim_setting) << '\n';
        out << "n=" << cfg.sim_n << '\n';
    }
    if (!cfg.csv_path.empty()) {
        out << "csv=" << cfg.csv_path << '\n';
        out << "label_col=" << cfg.label_column << '\n';
        if (!cfg.positive_level.empty()) out << "positive_level=" << cfg.positive_level << '\n';
        out << "impute_indicator=" << (cfg.impute_indicator ? 1 : 0) << '\n';
        if (!cfg.drop_columns.empty()) {
            out << "drop_cols=";
            for (std::size_t i = 0; i < cfg.drop_columns.size(); ++i)
                out << (i ? "," : "") << cfg.drop_columns[i];
            out << '\n';
        }
    }
    if (!cfg.rule_path.empty()) out << "rule=" << cfg.rule_path << '\n';
    if (!cfg.test_csv.empty()) out << "test_csv=" << cfg.test_csv << '\n';
    out << "seeds=";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) out << (i ? "," : "") << cfg.seeds[i];
    out << '\n';
    out << "repeats=" << cfg.repeats << '\n';
    out << "folds_outer=" << cfg.folds_outer << '\n';
    out << "folds_inner=" << cfg.folds_inner << '\n';
    out << "workers=" << cfg.workers << '\n';
    out << "dump_z=" << (cfg.dump_z ? 1 : 0) << '\n';
    out << "dump_densities=" << (cfg.dump_densities ? 1 : 0) << '\n';
    out << "no_timing=" << (cfg.no_timing ? 1 : 0) << '\n';
    // Resolved learner/optimizer settings, defaults expanded.
    const std::vector<LearnerSpec> library = build_library(cfg.library, cfg.overrides);
    const CrsOptions crs = crs_options_from_config(cfg.overrides);
    out << "crs.population_size=" << crs.population_size << '\n';
    out << "crs.max_evaluations=" << crs.max_evaluations << '\n';
    out << "crs.xtol_rel=" << detail::full_precision(crs.xtol_rel) << '\n';
    for (const LearnerSpec& spec : library)
        for (const auto& [key, value] : spec.hyper)
            out << spec.id() << '.' << key << '=' << detail::full_precision(value) << '\n';
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

inline void write_sim_csv(const SimSample& sample, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MissingFileError(path);
    const Dataset& d = sample.dataset;
    for (std::size_t c = 0; c < d.p(); ++c) out << d.column_names[c] << ',';
    out << "label,u1,u2,u3,u4,bayes_score\n";
    for (std::size_t i = 0; i < d.n(); ++i) {
        for (std::size_t c = 0; c < d.p(); ++c)
            out << detail::full_precision(d.features(i, c)) << ',';
        out << d.labels[i];
        for (std::size_t c = 0; c < 4; ++c)
            out << ',' << detail::full_precision(sample.latent_u(i, c));
        out << ',' << detail::full_precision(sample.bayes_score[i]) << '\n';
    }
}

inline std::vector<std::string> run_simulate(const RunConfig& cfg) {
    if (!cfg.sim_setting) throw ConfigParseError("simulate needs --sim setting1|setting2");
    std::vector<std::string> files;
    for (std::uint64_t seed : effective_seeds(cfg)) {
        SimConfig sim;
        sim.n = cfg.sim_n;
        sim.setting = *cfg.sim_setting;
        sim.seed = seed;
        sim.stream = "d1";
        sim.target_prevalence = cfg.overrides.get_double("sim.target_prevalence", 0.30);
        const SimSample sample = generate(sim);
        const std::string path = detail::join_path(
            cfg.out_dir, std::string("sim_") + to_string(sim.setting) + "_s" +
                             std::to_string(seed) + ".csv");
        write_sim_csv(sample, path);
        files.push_back(path);
    }
    return files;
}

// ---------------------------------------------------------------------
// fit / evaluate / compare
// ---------------------------------------------------------------------

struct SeedData {
    Dataset train;
    std::optional<SimSample> train_sim;
    std::optional<SimSample> test_sim; // compare on simulated data only
};

inline SeedData load_seed_data(const RunConfig& cfg, std::uint64_t seed, bool want_test,
                               const std::optional<Dataset>& csv_data) {
    SeedData data;
    if (cfg.sim_setting) {
        SimConfig sim;
        sim.n = cfg.sim_n;
        sim.setting = *cfg.sim_setting;
        sim.seed = seed;
        sim.target_prevalence = cfg.overrides.get_double("sim.target_prevalence", 0.30);
        sim.stream = "d1";
        data.train_sim = generate(sim);
        data.train = data.train_sim->dataset;
        if (want_test) {
            sim.stream = "d2";
            data.test_sim = generate(sim);
        }
    } else {
        data.train = *csv_data;
    }
    return data;
}

inline PipelineConfig make_pipeline_config(const RunConfig& cfg,
                                           const std::vector<LearnerSpec>& library,
                                           std::uint64_t seed) {
    PipelineConfig pipeline;
    pipeline.library = library;
    pipeline.inner_folds = cfg.folds_inner;
    pipeline.seed = seed;
    pipeline.workers = cfg.workers;
    pipeline.crs = crs_options_from_config(cfg.overrides);
    return pipeline;
}

inline ExperimentReport run_fit(const RunConfig& cfg, std::vector<std::string>& files) {
    const std::vector<LearnerSpec> library = build_library(cfg.library, cfg.overrides);
    std::optional<Dataset> csv_data;
    if (!cfg.csv_path.empty()) csv_data = load_cli_csv(cfg);

    ExperimentReport report;
    for (std::uint64_t seed : effective_seeds(cfg)) {
        const SeedData data = load_seed_data(cfg, seed, false, csv_data);
        const PipelineConfig pipeline = make_pipeline_config(cfg, library, seed);
        const TrainedStack stack = run_stacking(data.train, pipeline);
        if (cfg.dump_z)
            dump_score_matrix(stack.z, stack.labels,
                              detail::join_path(cfg.out_dir, "z_s" + std::to_string(seed) + ".csv"));
        for (double lambda : cfg.lambda_grid) {
            const LossSpec spec(lambda);
            for (Method method : cfg.methods) {
                const auto start = std::chrono::steady_clock::now();
                CrsOptions crs_opts = pipeline.crs;
                crs_opts.seed = derive_seed(seed, "crs");
                const EnsembleRule rule = derive_rule(stack, method, spec, crs_opts);
                const std::string rule_file = detail::join_path(
                    cfg.out_dir, std::string("rule_") + to_string(method) + "_l" +
                                     detail::lambda_tag(lambda) + "_s" + std::to_string(seed) +
                                     ".txt");
                write_rule(rule, rule_file);
                files.push_back(rule_file);

                ReportRow row;
                row.method = to_string(method);
                row.lambda = lambda;
                row.library_size = library.size();
                row.risk = rule.training_objective;
                row.threshold = rule.threshold;
                row.alpha = rule.alpha;
                row.seed = seed;
                row.runtime_s = cfg.no_timing ? 0.0 : detail::seconds_since(start);
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

// Rules over a simulated train/test pair. One Bayes
// reference row per (seed, lambda), then one row per method with the relative
// difference against that reference.
inline ExperimentReport run_compare_sim(const RunConfig& cfg, std::vector<std::string>& files) {
    const std::vector<LearnerSpec> library = build_library(cfg.library, cfg.overrides);
    ExperimentReport report;
    for (std::uint64_t seed : effective_seeds(cfg)) {
        const SeedData data = load_seed_data(cfg, seed, true, std::nullopt);
        const PipelineConfig pipeline = make_pipeline_config(cfg, library, seed);
        const TrainedStack stack = run_stacking(data.train, pipeline);
        if (cfg.dump_z)
            dump_score_matrix(stack.z, stack.labels,
                              detail::join_path(cfg.out_dir, "z_s" + std::to_string(seed) + ".csv"));
        if (cfg.dump_densities) {
            for (double lambda : cfg.lambda_grid)
                dump_densities(data.train, pipeline, LossSpec(lambda),
                               detail::join_path(cfg.out_dir,
                                                 "densities_l" + detail::lambda_tag(lambda) +
                                                     "_s" + std::to_string(seed) + ".csv"),
                               detail::join_path(cfg.out_dir,
                                                 "thresholds_l" + detail::lambda_tag(lambda) +
                                                     "_s" + std::to_string(seed) + ".txt"));
        }

        const Matrix test_std =
            apply_standardization(stack.standardization, data.test_sim->dataset.features);
        Dataset test = data.test_sim->dataset;
        test.features = test_std;

        for (double lambda : cfg.lambda_grid) {
            const LossSpec spec(lambda);
            const double bayes = bayes_rule_risk(*data.test_sim, spec);
            ReportRow bayes_row;
            bayes_row.method = "bayes";
            bayes_row.lambda = lambda;
            bayes_row.library_size = 0;
            bayes_row.risk = bayes;
            bayes_row.rel_diff = 0.0;
            bayes_row.threshold = 1.0 - lambda;
            bayes_row.seed = seed;
            report.rows.push_back(std::move(bayes_row));

            for (Method method : cfg.methods) {
                const auto start = std::chrono::steady_clock::now();
                CrsOptions crs_opts = pipeline.crs;
                crs_opts.seed = derive_seed(seed, "crs");
                const EnsembleRule rule = derive_rule(stack, method, spec, crs_opts);
                const double risk = out_of_sample_eval(rule, stack.models, test, spec);

                ReportRow row;
                row.method = to_string(method);
                row.lambda = lambda;
                row.library_size = library.size();
                row.risk = risk;
                row.rel_diff = relative_difference(risk, bayes);
                row.threshold = rule.threshold;
                row.alpha = rule.alpha;
                row.seed = seed;
                row.runtime_s = cfg.no_timing ? 0.0 : detail::seconds_since(start);
                report.rows.push_back(std::move(row));
            }
        }
    }
    (void)files;
    return report;
}

// Rules on a real dataset, scored by outer cross-validated risk; threshold
// and weights reported from the full-data fit.
inline ExperimentReport run_compare_cv(const RunConfig& cfg, std::vector<std::string>& files) {
    const std::vector<LearnerSpec> library = build_library(cfg.library, cfg.overrides);
    std::optional<Dataset> csv_data;
    if (!cfg.csv_path.empty()) csv_data = load_cli_csv(cfg);

    ExperimentReport report;
    for (std::uint64_t seed : effective_seeds(cfg)) {
        const SeedData data = load_seed_data(cfg, seed, false, csv_data);
        const PipelineConfig pipeline = make_pipeline_config(cfg, library, seed);
        const TrainedStack stack = run_stacking(data.train, pipeline);
        if (cfg.dump_z)
            dump_score_matrix(stack.z, stack.labels,
                              detail::join_path(cfg.out_dir, "z_s" + std::to_string(seed) + ".csv"));
        if (cfg.dump_densities) {
            for (double lambda : cfg.lambda_grid) {
                const LossSpec spec(lambda);
                dump_densities(data.train, pipeline, spec,
                               detail::join_path(cfg.out_dir, "densities_l" +
                                                                  detail::lambda_tag(lambda) +
                                                                  "_s" + std::to_string(seed) +
                                                                  ".csv"),
                               detail::join_path(cfg.out_dir, "thresholds_l" +
                                                                  detail::lambda_tag(lambda) +
                                                                  "_s" + std::to_string(seed) +
                                                                  ".txt"));
            }
        }

        const auto start = std::chrono::steady_clock::now();
        const std::vector<std::vector<double>> risks =
            cv_risk_grid(cfg.methods, cfg.lambda_grid, library, data.train, cfg.folds_outer,
                         seed, cfg.folds_inner, cfg.workers, pipeline.crs);
        const double elapsed = cfg.no_timing ? 0.0 : detail::seconds_since(start);
        const double per_cell =
            elapsed / static_cast<double>(cfg.methods.size() * cfg.lambda_grid.size());

        for (std::size_t l = 0; l < cfg.lambda_grid.size(); ++l) {
            const LossSpec spec(cfg.lambda_grid[l]);
            for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
                CrsOptions crs_opts = pipeline.crs;
                crs_opts.seed = derive_seed(seed, "crs");
                const EnsembleRule rule = derive_rule(stack, cfg.methods[m], spec, crs_opts);

                ReportRow row;
                row.method = to_string(cfg.methods[m]);
                row.lambda = cfg.lambda_grid[l];
                row.library_size = library.size();
                row.risk = risks[m][l];
                row.threshold = rule.threshold;
                row.alpha = rule.alpha;
                row.seed = seed;
                row.runtime_s = per_cell;
                report.rows.push_back(std::move(row));
            }
        }
    }
    (void)files;
    return report;
}

// Reload a serialized rule, refit its library deterministically on the
// training data, and score the held-out file.
inline ExperimentReport run_evaluate_rule(const RunConfig& cfg) {
    if (cfg.csv_path.empty() || cfg.test_csv.empty())
        throw ConfigParseError("evaluate --rule needs --csv (training) and --test-csv");
    const EnsembleRule rule = read_rule(cfg.rule_path);

    std::string library_list;
    for (std::size_t k = 0; k < rule.library.size(); ++k)
        library_list += (k ? "," : "") + rule.library[k];
    const std::vector<LearnerSpec> library = build_library(library_list, cfg.overrides);

    const Dataset train = load_cli_csv(cfg);
    RunConfig test_cfg = cfg;
    test_cfg.csv_path = cfg.test_csv;
    const Dataset test_raw = load_cli_csv(test_cfg);

    const std::uint64_t seed = cfg.seeds.front();
    const PipelineConfig pipeline = make_pipeline_config(cfg, library, seed);
    const auto start = std::chrono::steady_clock::now();
    const TrainedStack stack = run_stacking(train, pipeline);
    Dataset test = test_raw;
    test.features = apply_standardization(stack.standardization, test_raw.features);
    const LossSpec spec(rule.lambda);
    const double risk = out_of_sample_eval(rule, stack.models, test, spec);

    ExperimentReport report;
    ReportRow row;
    row.method = to_string(rule.method);
    row.lambda = rule.lambda;
    row.library_size = rule.library.size();
    row.risk = risk;
    row.threshold = rule.threshold;
    row.alpha = rule.alpha;
    row.seed = seed;
    row.runtime_s = cfg.no_timing ? 0.0 : detail::seconds_since(start);
    report.rows.push_back(std::move(row));
    return report;
}

struct RunOutputs {
    ExperimentReport report;
    std::vector<std::string> files;
};

inline RunOutputs run(const RunConfig& cfg) {
    validate(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    RunOutputs out;
    write_manifest(cfg, detail::join_path(cfg.out_dir, "manifest.txt"));
    out.files.push_back(detail::join_path(cfg.out_dir, "manifest.txt"));

    switch (cfg.command) {
        case RunConfig::Command::simulate: {
            const auto files = run_simulate(cfg);
            out.files.insert(out.files.end(), files.begin(), files.end());
            return out;
        }
        case RunConfig::Command::fit:
            out.report = run_fit(cfg, out.files);
            break;
        case RunConfig::Command::evaluate:
            out.report = cfg.rule_path.empty() ? run_compare_cv(cfg, out.files)
                                               : run_evaluate_rule(cfg);
            break;
        case RunConfig::Command::compare:
            out.report = cfg.sim_setting ? run_compare_sim(cfg, out.files)
                                         : run_compare_cv(cfg, out.files);
            break;
    }
    const std::string report_path = detail::join_path(cfg.out_dir, "report.csv");
    write_report_csv(out.report, report_path);
    out.files.push_back(report_path);
    return out;
}

}  // namespace stackrule
