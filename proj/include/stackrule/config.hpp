#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stackrule/combiner.hpp"
#include "stackrule/crs2.hpp"
#include "stackrule/errors.hpp"
#include "stackrule/learners.hpp"
#include "stackrule/simulation.hpp"

namespace stackrule {

// Flat key=value configuration with dotted namespaces, e.g.
//   random_forest.trees=500
//   crs.max_evaluations=10000
// '#' starts a comment. Later sources (flags) override earlier ones (file).
class ConfigMap {
public:
    ConfigMap() = default;

    static ConfigMap from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw MissingFileError(path);
        ConfigMap cfg;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::string trimmed;
            for (char c : line)
                if (c != ' ' && c != '\t') trimmed += c;
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigParseError(path + ":" + std::to_string(lineno) +
                                       ": expected key=value, got '" + line + "'");
            cfg.values_[trimmed.substr(0, eq)] = trimmed.substr(eq + 1);
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    void merge_overrides(const ConfigMap& other) {
        for (const auto& [k, v] : other.values_) values_[k] = v;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(it->second);
            return v;
        } catch (const std::exception&) {
            throw ConfigParseError("key '" + key + "': cannot parse '" + it->second +
                                   "' as a number");
        }
    }

    std::size_t get_count(const std::string& key, std::size_t fallback) const {
        const double v = get_double(key, static_cast<double>(fallback));
        if (v < 0.0) throw ConfigParseError("key '" + key + "' must be nonnegative");
        return static_cast<std::size_t>(v);
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

// Per-learner hyperparameter keys honored from config namespaces.
inline const std::vector<std::string>& learner_hyper_keys(LearnerKind kind) {
    static const std::vector<std::string> logistic = {"max_iter", "tol", "ridge"};
    static const std::vector<std::string> tree = {"max_depth", "min_leaf"};
    static const std::vector<std::string> forest = {"trees", "max_depth", "min_leaf", "mtry"};
    static const std::vector<std::string> bagging = {"trees", "max_depth", "min_leaf"};
    static const std::vector<std::string> knn = {"k"};
    static const std::vector<std::string> boost = {"rounds", "shrinkage"};
    static const std::vector<std::string> svm = {"c", "iterations"};
    switch (kind) {
        case LearnerKind::logistic:
        case LearnerKind::quad_additive: return logistic;
        case LearnerKind::cart: return tree;
        case LearnerKind::random_forest: return forest;
        case LearnerKind::bagged_trees: return bagging;
        case LearnerKind::knn: return knn;
        case LearnerKind::boosted_stumps: return boost;
        case LearnerKind::linear_svm: return svm;
    }
    static const std::vector<std::string> none;
    return none;
}

// Build a learner library from a preset name ("four", "eight") or an explicit
// comma-separated list, applying any <learner>.<key> config overrides.
inline std::vector<LearnerSpec> build_library(const std::string& spec_text,
                                              const ConfigMap& config) {
    std::vector<std::string> names;
    if (spec_text == "four" || spec_text == "eight") {
        names = {"logistic", "quad_additive", "cart", "random_forest"};
        if (spec_text == "eight") {
            names.push_back("knn");
            names.push_back("boosted_stumps");
            names.push_back("linear_svm");
            names.push_back("bagged_trees");
        }
    } else {
        std::stringstream ss(spec_text);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) names.push_back(item);
        if (names.empty()) throw ConfigParseError("empty learner library");
    }

    std::vector<LearnerSpec> library;
    library.reserve(names.size());
    for (const std::string& name : names) {
        LearnerSpec spec;
        spec.kind = learner_kind_from_string(name);
        for (const std::string& key : learner_hyper_keys(spec.kind)) {
            const std::string dotted = name + "." + key;
            if (config.has(dotted)) spec.hyper[key] = config.get_double(dotted, 0.0);
        }
        library.push_back(std::move(spec));
    }
    return library;
}

inline CrsOptions crs_options_from_config(const ConfigMap& config) {
    CrsOptions opts;
    opts.population_size = config.get_count("crs.population_size", 0);
    opts.max_evaluations = config.get_count("crs.max_evaluations", 10000);
    opts.xtol_rel = config.get_double("crs.xtol_rel", 1e-6);
    return opts;
}

// Fully resolved invocation of the experiment front end.
struct RunConfig {
    enum class Command { simulate, fit, evaluate, compare };

    Command command = Command::compare;
    std::vector<double> lambda_grid = {0.2, 0.5, 0.8};
    std::string library = "four";
    std::vector<Method> methods = {Method::conditional, Method::two_step, Method::crs};

    std::optional<SimSetting> sim_setting;
    std::size_t sim_n = 10000;
    std::string csv_path;
    std::string label_column = "label";
    std::string positive_level;
    bool impute_indicator = false;
    std::vector<std::string> drop_columns;

    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = ".";
    std::string rule_path;  // evaluate: previously serialized rule
    std::string test_csv;   // evaluate: held-out data for a reloaded rule
    bool dump_z = false;
    bool dump_densities = false;
    std::size_t repeats = 1;
    std::size_t folds_outer = 10;
    std::size_t folds_inner = 10;
    std::size_t workers = 1;
    bool no_timing = false; // write runtime_s as 0 for byte-reproducible output
    ConfigMap overrides;
};

inline std::vector<double> default_lambda_sweep() {
    std::vector<double> grid;
    for (int i = 1; i <= 19; ++i) grid.push_back(static_cast<double>(i) * 0.05);
    return grid;
}

inline void validate(const RunConfig& cfg) {
    if (cfg.lambda_grid.empty()) throw ConfigParseError("lambda grid is empty");
    for (double lam : cfg.lambda_grid)
        if (!(lam > 0.0 && lam < 1.0))
            throw ConfigParseError("lambda values must lie strictly inside (0,1)");
    if (cfg.methods.empty()) throw ConfigParseError("no methods selected");
    if (cfg.seeds.empty()) throw ConfigParseError("no seeds given");
    if (cfg.command != RunConfig::Command::simulate && !cfg.sim_setting && cfg.csv_path.empty())
        throw ConfigParseError("need a data source: --sim or --csv");
    if (cfg.sim_setting && !cfg.csv_path.empty())
        throw ConfigParseError("--sim and --csv are mutually exclusive");
    if (cfg.folds_inner < 2 || cfg.folds_outer < 2)
        throw ConfigParseError("fold counts must be at least 2");
    if (cfg.repeats < 1) throw ConfigParseError("--repeats must be at least 1");
}

}  // namespace stackrule
