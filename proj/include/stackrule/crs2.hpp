#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stackrule/errors.hpp"
#include "stackrule/rng.hpp"

namespace stackrule {

struct CrsOptions {
    std::size_t population_size = 0; // 0 = 10 * (dim + 1)
    std::size_t max_evaluations = 10000;
    double xtol_rel = 1e-6;
    std::uint64_t seed = 0;
    std::optional<std::vector<double>> initial_point;
};

enum class StopReason { xtol, max_eval, stalled };

struct OptimResult {
    std::vector<double> point;
    double value = 0.0;
    std::size_t evaluations = 0;
    StopReason stop_reason = StopReason::max_eval;
};

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::xtol: return "xtol";
        case StopReason::max_eval: return "max_eval";
        case StopReason::stalled: return "stalled";
    }
    return "?";
}

// Controlled random search with local mutation (CRS2-LM) over a box. Suited
// to nonsmooth, nonconvex, piecewise-constant objectives: no derivatives, no
// convexity assumptions, only function values. Deterministic given the seed.
inline OptimResult crs2_minimize(const std::function<double(const std::vector<double>&)>& objective,
                                 const std::vector<double>& lower,
                                 const std::vector<double>& upper, const CrsOptions& opts) {
    const std::size_t dim = lower.size();
    if (dim == 0 || upper.size() != dim) throw BadBoundsError("empty or mismatched bounds");
    for (std::size_t d = 0; d < dim; ++d)
        if (!(lower[d] < upper[d]))
            throw BadBoundsError("lower bound must be below upper bound in coordinate " +
                                 std::to_string(d));

    const std::size_t pop_size =
        opts.population_size > 0 ? opts.population_size : 10 * (dim + 1);
    if (pop_size < dim + 1)
        throw BadBoundsError("population size must be at least dim + 1");
    if (opts.max_evaluations < pop_size)
        throw BudgetTooSmallError("evaluation budget smaller than the initial population");

    Rng rng(derive_seed(opts.seed, "crs2"));
    const auto in_box = [&](const std::vector<double>& x) {
        for (std::size_t d = 0; d < dim; ++d)
            if (x[d] < lower[d] || x[d] > upper[d]) return false;
        return true;
    };

    std::vector<std::vector<double>> points(pop_size, std::vector<double>(dim));
    std::vector<double> values(pop_size);
    for (auto& p : points)
        for (std::size_t d = 0; d < dim; ++d) p[d] = rng.uniform(lower[d], upper[d]);
    if (opts.initial_point) {
        std::vector<double> start = *opts.initial_point;
        if (start.size() != dim) throw BadBoundsError("initial point dimension mismatch");
        for (std::size_t d = 0; d < dim; ++d)
            start[d] = std::clamp(start[d], lower[d], upper[d]);
        points[0] = std::move(start);
    }

    std::size_t evaluations = 0;
    for (std::size_t i = 0; i < pop_size; ++i) {
        values[i] = objective(points[i]);
        ++evaluations;
    }

    const auto extremes = [&]() {
        std::size_t best = 0, worst = 0;
        for (std::size_t i = 1; i < pop_size; ++i) {
            if (values[i] < values[best]) best = i;
            if (values[i] > values[worst]) worst = i;
        }
        return std::pair<std::size_t, std::size_t>{best, worst};
    };
    const auto spread_converged = [&](std::size_t best, std::size_t worst) {
        const double span = values[worst] - values[best];
        return span <= opts.xtol_rel * std::max(std::fabs(values[best]), std::fabs(values[worst]));
    };

    StopReason reason = StopReason::max_eval;
    const std::size_t stall_limit = 200 * dim;
    std::size_t stall = 0;
    std::vector<std::size_t> chosen(dim); // random members joining the best
    std::vector<double> centroid(dim), reflected(dim), mutated(dim);

    auto [best, worst] = extremes();
    double previous_best = values[best];
    while (true) {
        if (spread_converged(best, worst)) {
            reason = StopReason::xtol;
            break;
        }
        if (evaluations >= opts.max_evaluations) {
            reason = StopReason::max_eval;
            break;
        }
        if (stall >= stall_limit) {
            reason = StopReason::stalled;
            break;
        }

        // Simplex = population best + dim distinct random others.
        for (std::size_t d = 0; d < dim; ++d) {
            std::size_t pick;
            bool fresh;
            do {
                pick = static_cast<std::size_t>(rng.uniform_int(pop_size));
                fresh = pick != best;
                for (std::size_t e = 0; e < d && fresh; ++e) fresh = pick != chosen[e];
            } while (!fresh);
            chosen[d] = pick;
        }

        // Reflect the simplex's worst vertex through the centroid of the rest.
        std::size_t simplex_worst = best;
        for (std::size_t d = 0; d < dim; ++d)
            if (values[chosen[d]] > values[simplex_worst]) simplex_worst = chosen[d];
        std::fill(centroid.begin(), centroid.end(), 0.0);
        double members = 0.0;
        auto accumulate = [&](std::size_t idx) {
            if (idx == simplex_worst) return;
            for (std::size_t d = 0; d < dim; ++d) centroid[d] += points[idx][d];
            members += 1.0;
        };
        accumulate(best);
        for (std::size_t d = 0; d < dim; ++d) accumulate(chosen[d]);
        for (std::size_t d = 0; d < dim; ++d) {
            centroid[d] /= members;
            reflected[d] = 2.0 * centroid[d] - points[simplex_worst][d];
        }

        bool replaced = false;
        if (in_box(reflected)) {
            const double value = objective(reflected);
            ++evaluations;
            if (value < values[worst]) {
                points[worst] = reflected;
                values[worst] = value;
                replaced = true;
            }
        }
        if (!replaced && rng.uniform() < 0.5 && evaluations < opts.max_evaluations) {
            // Local mutation: coordinatewise random blend of best and
            // reflected; may leave the box, in which case it is rejected.
            for (std::size_t d = 0; d < dim; ++d) {
                const double u = rng.uniform();
                mutated[d] = u * points[best][d] + (1.0 - u) * reflected[d];
            }
            if (in_box(mutated)) {
                const double value = objective(mutated);
                ++evaluations;
                if (value < values[worst]) {
                    points[worst] = mutated;
                    values[worst] = value;
                    replaced = true;
                }
            }
        }

        stall = replaced ? 0 : stall + 1;
        std::tie(best, worst) = extremes();
        assert(values[best] <= previous_best && "population best must be monotone");
        previous_best = values[best];
    }

    OptimResult out;
    out.point = points[best];
    out.value = values[best];
    out.evaluations = evaluations;
    out.stop_reason = reason;
    return out;
}

}  // namespace stackrule
