// Experiment front end: derive and evaluate cost-weighted ensemble
// classification rules on simulated or CSV data.

#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stackrule/experiment.hpp"

namespace {

using stackrule::RunConfig;

struct SharedFlags {
    std::string lambda_text;
    std::string methods_text;
    std::string seeds_text;
    std::string sim_text;
    std::string config_path;
    std::vector<std::string> set_overrides;
    std::string drop_cols_text;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void add_shared_options(CLI::App* cmd, RunConfig& cfg, SharedFlags& flags) {
    cmd->add_option("--lambda", flags.lambda_text,
                    "comma-separated false-negative weights in (0,1), or 'sweep'");
    cmd->add_option("--library", cfg.library, "four | eight | comma-separated learner names")
        ->capture_default_str();
    cmd->add_option("--methods", flags.methods_text,
                    "subset of conditional,two_step,crs (default all)");
    cmd->add_option("--seed", flags.seeds_text, "comma-separated seeds (default 1)");
    cmd->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--config", flags.config_path, "key=value config file");
    cmd->add_option("--set", flags.set_overrides, "inline config override key=value")
        ->take_all();
    cmd->add_option("--sim", flags.sim_text, "simulated data source: setting1 | setting2");
    cmd->add_option("--n", cfg.sim_n, "simulated sample size")->capture_default_str();
    cmd->add_option("--csv", cfg.csv_path, "CSV data source (header row required)");
    cmd->add_option("--label-col", cfg.label_column, "label column name")->capture_default_str();
    cmd->add_option("--positive-level", cfg.positive_level,
                    "label value mapped to 1 (default: lexicographically larger)");
    cmd->add_flag("--impute-indicator", cfg.impute_indicator,
                  "fill missing cells with 0 and add <col>_missing indicators");
    cmd->add_option("--drop-cols", flags.drop_cols_text,
                    "comma-separated columns to drop (e.g. id)");
    cmd->add_option("--repeats", cfg.repeats, "replications per seed")->capture_default_str();
    cmd->add_option("--folds-outer", cfg.folds_outer, "outer evaluation folds")
        ->capture_default_str();
    cmd->add_option("--folds-inner", cfg.folds_inner, "inner stacking folds")
        ->capture_default_str();
    cmd->add_option("--workers", cfg.workers, "worker threads for independent jobs")
        ->capture_default_str();
    cmd->add_flag("--dump-z", cfg.dump_z, "write the cross-validated score matrix per seed");
    cmd->add_flag("--dump-densities", cfg.dump_densities,
                  "write per-observation score columns and selected thresholds");
    cmd->add_flag("--no-timing", cfg.no_timing,
                  "record runtime_s as 0 so outputs are byte-reproducible");
}

void finalize_config(RunConfig& cfg, const SharedFlags& flags) {
    if (!flags.config_path.empty())
        cfg.overrides = stackrule::ConfigMap::from_file(flags.config_path);
    for (const std::string& kv : flags.set_overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            throw stackrule::ConfigParseError("--set expects key=value, got '" + kv + "'");
        cfg.overrides.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!flags.lambda_text.empty()) {
        if (flags.lambda_text == "sweep") {
            cfg.lambda_grid = stackrule::default_lambda_sweep();
        } else {
            cfg.lambda_grid.clear();
            for (const std::string& item : split_list(flags.lambda_text))
                cfg.lambda_grid.push_back(std::stod(item));
        }
    }
    if (!flags.methods_text.empty()) {
        cfg.methods.clear();
        for (const std::string& item : split_list(flags.methods_text))
            cfg.methods.push_back(stackrule::method_from_string(item));
    }
    if (!flags.seeds_text.empty()) {
        cfg.seeds.clear();
        for (const std::string& item : split_list(flags.seeds_text))
            cfg.seeds.push_back(std::stoull(item));
    }
    if (!flags.sim_text.empty()) {
        if (flags.sim_text == "setting1")
            cfg.sim_setting = stackrule::SimSetting::observed_u;
        else if (flags.sim_text == "setting2")
            cfg.sim_setting = stackrule::SimSetting::transformed_x;
        else
            throw stackrule::ConfigParseError("--sim must be setting1 or setting2");
    }
    cfg.drop_columns = split_list(flags.drop_cols_text);
}

void print_summary(const stackrule::RunOutputs& outputs) {
    if (!outputs.report.rows.empty()) {
        std::printf("%-12s %8s %4s %10s %10s %10s %8s\n", "method", "lambda", "K", "risk",
                    "rel_diff", "threshold", "seed");
        for (const auto& row : outputs.report.rows) {
            std::printf("%-12s %8.3f %4zu %10.5f %10s %10.4f %8llu\n", row.method.c_str(),
                        row.lambda, row.library_size, row.risk,
                        row.rel_diff ? (std::to_string(*row.rel_diff).substr(0, 8)).c_str() : "-",
                        row.threshold, static_cast<unsigned long long>(row.seed));
        }
    }
    for (const std::string& file : outputs.files) std::printf("wrote %s\n", file.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ensemble classification rules under weighted misclassification loss"};
    app.require_subcommand(1);

    RunConfig cfg;
    SharedFlags flags;

    CLI::App* simulate = app.add_subcommand("simulate", "generate simulated data with latent audit columns");
    CLI::App* fit = app.add_subcommand("fit", "derive and persist rules on a training set");
    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "cross-validated risk of the pipeline, or score a reloaded rule");
    CLI::App* compare = app.add_subcommand(
        "compare", "method x lambda comparison table (simulated: against the Bayes rule)");
    for (CLI::App* cmd : {simulate, fit, evaluate, compare}) add_shared_options(cmd, cfg, flags);
    evaluate->add_option("--rule", cfg.rule_path, "serialized rule file to reload");
    evaluate->add_option("--test-csv", cfg.test_csv, "held-out CSV for a reloaded rule");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) cfg.command = RunConfig::Command::simulate;
        if (fit->parsed()) cfg.command = RunConfig::Command::fit;
        if (evaluate->parsed()) cfg.command = RunConfig::Command::evaluate;
        if (compare->parsed()) cfg.command = RunConfig::Command::compare;
        finalize_config(cfg, flags);
        const stackrule::RunOutputs outputs = stackrule::run(cfg);
        print_summary(outputs);
    } catch (const stackrule::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
