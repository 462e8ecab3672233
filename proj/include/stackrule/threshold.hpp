#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "stackrule/errors.hpp"
#include "stackrule/loss.hpp"

namespace stackrule {

struct ThresholdResult {
    double threshold = 0.0;
    double risk = 0.0;
};

// Exact minimizer of empirical weighted risk over thresholds applied to the
// rule 1{score >= c}. Candidates are the midpoints between adjacent distinct
// score values plus min-1 and max+1, which realize every achievable
// classification; ties go to the largest minimizing candidate so the rule
// favors the negative class when indifferent. O(n log n).
inline ThresholdResult threshold_line_search(const std::vector<double>& scores,
                                             const std::vector<int>& labels,
                                             const LossSpec& spec) {
    const std::size_t n = scores.size();
    if (labels.size() != n) throw LengthMismatchError(labels.size(), n);
    if (n == 0) throw EmptyInputError();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::size_t total_neg = 0;
    for (int y : labels)
        if (y == 0) ++total_neg;

    const double lambda = spec.lambda;
    const auto risk_at = [&](std::size_t fn, std::size_t fp) {
        return (lambda * static_cast<double>(fn) + (1.0 - lambda) * static_cast<double>(fp)) /
               static_cast<double>(n);
    };

    // Everything predicted positive.
    std::size_t fn = 0, fp = total_neg;
    double best_risk = risk_at(fn, fp);
    double best_c = scores[order.front()] - 1.0;

    std::size_t i = 0;
    while (i < n) {
        // Flip the whole group of tied scores to predicted-negative.
        const double value = scores[order[i]];
        std::size_t j = i;
        while (j < n && scores[order[j]] == value) {
            if (labels[order[j]] == 1)
                ++fn;
            else
                --fp;
            ++j;
        }
        double candidate = j < n ? 0.5 * (value + scores[order[j]]) : scores[order[n - 1]] + 1.0;
        // A midpoint of adjacent representables can round down onto the group
        // value; bump it so the group really classifies negative.
        if (candidate <= value) candidate = std::nextafter(value, std::numeric_limits<double>::infinity());
        const double risk = risk_at(fn, fp);
        if (risk <= best_risk) {
            best_risk = risk;
            best_c = candidate;
        }
        i = j;
    }
    return {best_c, best_risk};
}

}  // namespace stackrule
