#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stackrule/dataset.hpp"
#include "stackrule/errors.hpp"
#include "stackrule/loss.hpp"
#include "stackrule/matrix.hpp"
#include "stackrule/rng.hpp"

namespace stackrule {

enum class SimSetting { observed_u, transformed_x };

inline const char* to_string(SimSetting s) {
    return s == SimSetting::observed_u ? "setting1" : "setting2";
}

struct SimConfig {
    std::size_t n = 10000;
    SimSetting setting = SimSetting::observed_u;
    std::uint64_t seed = 0;
    double target_prevalence = 0.30;
    // Distinguishes independent draws sharing one seed (training vs test).
    std::string stream = "d1";
};

// One simulated sample: the observable dataset plus the latent state needed
// to evaluate the reference Bayes rule.
struct SimSample {
    Dataset dataset;
    Matrix latent_u;                 // n x 4
    std::vector<double> bayes_score; // P(Y=1 | U)
    double outcome_cutoff = 0.0;
};

namespace sim_detail {

constexpr double kIntercept = 210.0;
constexpr std::array<double, 4> kSlopes = {27.4, 13.7, 13.7, 13.7};
constexpr double kNoiseSd = 100.0;

inline double latent_sd() {
    double var = kNoiseSd * kNoiseSd;
    for (double b : kSlopes) var += b * b;
    return std::sqrt(var);
}

inline std::array<double, 4> transform(const double* u) {
    return {std::exp(u[0] / 2.0),
            u[1] / (1.0 + std::exp(u[0])) + 10.0,
            std::pow(u[0] * u[2] / 25.0 + 0.6, 3.0),
            (u[1] + u[3] + 20.0) * (u[1] + u[3] + 20.0)};
}

}  // namespace sim_detail

// The latent outcome is y~ = 210 + U.b + eps with U ~ N(0, I4) and
// eps ~ N(0, 100^2); the label cuts y~ at the analytic quantile giving the
// target prevalence, so every generated sample shares one fixed cutoff.
inline SimSample generate(const SimConfig& cfg) {
    if (cfg.n < 1) throw EmptyInputError();
    if (!(cfg.target_prevalence > 0.0 && cfg.target_prevalence < 1.0))
        throw ConfigParseError("target prevalence must lie in (0,1)");

    const double sd = sim_detail::latent_sd();
    const double cutoff =
        sim_detail::kIntercept + sd * normal_quantile(1.0 - cfg.target_prevalence);

    Rng u_rng(derive_seed(cfg.seed, "sim.u." + cfg.stream));
    Rng eps_rng(derive_seed(cfg.seed, "sim.eps." + cfg.stream));

    SimSample sample;
    sample.outcome_cutoff = cutoff;
    sample.latent_u = Matrix(cfg.n, 4);
    sample.bayes_score.resize(cfg.n);
    sample.dataset.features = Matrix(cfg.n, 4);
    sample.dataset.labels.resize(cfg.n);
    sample.dataset.column_kinds.assign(4, ColumnKind::continuous);
    const bool transformed = cfg.setting == SimSetting::transformed_x;
    sample.dataset.column_names = transformed
                                      ? std::vector<std::string>{"x1", "x2", "x3", "x4"}
                                      : std::vector<std::string>{"u1", "u2", "u3", "u4"};

    for (std::size_t i = 0; i < cfg.n; ++i) {
        double* u = sample.latent_u.row_ptr(i);
        double signal = sim_detail::kIntercept;
        for (std::size_t c = 0; c < 4; ++c) {
            u[c] = u_rng.normal();
            signal += sim_detail::kSlopes[c] * u[c];
        }
        const double outcome = signal + sim_detail::kNoiseSd * eps_rng.normal();
        sample.dataset.labels[i] = outcome >= cutoff ? 1 : 0;
        sample.bayes_score[i] = 1.0 - normal_cdf((cutoff - signal) / sim_detail::kNoiseSd);
        if (transformed) {
            const auto x = sim_detail::transform(u);
            for (std::size_t c = 0; c < 4; ++c) sample.dataset.features(i, c) = x[c];
        } else {
            for (std::size_t c = 0; c < 4; ++c) sample.dataset.features(i, c) = u[c];
        }
    }
    return sample;
}

// Risk of the optimal rule Q0 = 1{P(Y=1|U) >= 1-lambda} on this sample; the
// reference standard for relative differences.
inline double bayes_rule_risk(const SimSample& sample, const LossSpec& spec) {
    return empirical_risk(sample.dataset.labels, sample.bayes_score, 1.0 - spec.lambda, spec)
        .risk;
}

}  // namespace stackrule
