#pragma once

#include <cstddef>
#include <vector>

#include "stackrule/errors.hpp"

namespace stackrule {

// False-negative penalty. A false negative costs lambda, a false positive
// costs 1 - lambda; lambda = 0.5 is plain misclassification loss halved.
struct LossSpec {
    double lambda = 0.5;

    explicit LossSpec(double lam) : lambda(lam) {
        if (!(lam > 0.0 && lam < 1.0))
            throw ConfigParseError("lambda must lie strictly inside (0,1)");
    }
};

struct RiskReport {
    double risk = 0.0;
    double fnr = 0.0;
    double fpr = 0.0;
    double prevalence = 0.0;
    std::size_t n = 0;
    // Set when one class is absent; its conditional rate is reported as 0.
    bool degenerate = false;
};

inline double weighted_loss(int y, int action, const LossSpec& spec) {
    if (y == 1 && action == 0) return spec.lambda;
    if (y == 0 && action == 1) return 1.0 - spec.lambda;
    return 0.0;
}

// Empirical weighted misclassification risk of the rule 1{score >= c}.
// Counts are accumulated as integers and combined once, so equal
// classifications always produce bitwise-equal risks.
inline RiskReport empirical_risk(const std::vector<int>& labels,
                                 const std::vector<double>& scores, double c,
                                 const LossSpec& spec) {
    if (labels.size() != scores.size()) throw LengthMismatchError(labels.size(), scores.size());
    if (labels.empty()) throw EmptyInputError();
    std::size_t fn = 0, fp = 0, pos = 0;
    const std::size_t n = labels.size();
    for (std::size_t i = 0; i < n; ++i) {
        const bool predicted_positive = scores[i] >= c;
        if (labels[i] == 1) {
            ++pos;
            if (!predicted_positive) ++fn;
        } else if (predicted_positive) {
            ++fp;
        }
    }
    const std::size_t neg = n - pos;
    RiskReport report;
    report.n = n;
    report.prevalence = static_cast<double>(pos) / static_cast<double>(n);
    report.risk = (spec.lambda * static_cast<double>(fn) +
                   (1.0 - spec.lambda) * static_cast<double>(fp)) /
                  static_cast<double>(n);
    report.fnr = pos > 0 ? static_cast<double>(fn) / static_cast<double>(pos) : 0.0;
    report.fpr = neg > 0 ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0;
    report.degenerate = (pos == 0 || neg == 0);
    return report;
}

// Same risk from a vector of 0/1 actions instead of score-vs-threshold.
inline double empirical_risk_of_actions(const std::vector<int>& labels,
                                        const std::vector<int>& actions, const LossSpec& spec) {
    if (labels.size() != actions.size()) throw LengthMismatchError(labels.size(), actions.size());
    if (labels.empty()) throw EmptyInputError();
    std::size_t fn = 0, fp = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1 && actions[i] == 0) ++fn;
        if (labels[i] == 0 && actions[i] == 1) ++fp;
    }
    return (spec.lambda * static_cast<double>(fn) +
            (1.0 - spec.lambda) * static_cast<double>(fp)) /
           static_cast<double>(labels.size());
}

inline double relative_difference(double risk, double reference_risk) {
    if (!(reference_risk > 0.0)) throw ZeroReferenceError();
    return (risk - reference_risk) / reference_risk;
}

}  // namespace stackrule
