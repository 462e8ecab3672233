#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "stackrule/errors.hpp"
#include "stackrule/matrix.hpp"

namespace stackrule {

struct NnlsSolution {
    std::vector<double> coefficients; // K, all >= 0
    double residual_norm = 0.0;       // ||A x - b||_2
    std::vector<std::size_t> active_set; // indices clamped at zero
    bool all_zero = false;
};

// Lawson-Hanson active-set method for min ||A x - b||^2 s.t. x >= 0.
// The passive-set least squares subproblem is solved via normal equations,
// which is plenty for the K <= ~10 column counts seen here.
inline NnlsSolution nnls(const Matrix& a, const std::vector<double>& b) {
    const std::size_t n = a.rows();
    const std::size_t k = a.cols();
    if (b.size() != n) throw LengthMismatchError(b.size(), n);
    if (n == 0 || k == 0) throw EmptyInputError();

    // Gram matrix and A^T b, computed once.
    Matrix gram(k, k);
    std::vector<double> atb(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = a.row_ptr(i);
        for (std::size_t c1 = 0; c1 < k; ++c1) {
            atb[c1] += row[c1] * b[i];
            for (std::size_t c2 = c1; c2 < k; ++c2) gram(c1, c2) += row[c1] * row[c2];
        }
    }
    for (std::size_t c1 = 0; c1 < k; ++c1)
        for (std::size_t c2 = 0; c2 < c1; ++c2) gram(c1, c2) = gram(c2, c1);

    std::vector<double> x(k, 0.0);
    std::vector<bool> passive(k, false);
    std::vector<double> w(atb); // dual A^T (b - A x); starts at A^T b

    double scale = 1.0;
    for (double v : atb) scale = std::max(scale, std::fabs(v));
    const double tol = 1e-10 * scale;

    auto solve_passive = [&](std::vector<std::size_t>& idx) {
        idx.clear();
        for (std::size_t j = 0; j < k; ++j)
            if (passive[j]) idx.push_back(j);
        Matrix sub(idx.size(), idx.size());
        std::vector<double> rhs(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            rhs[r] = atb[idx[r]];
            for (std::size_t c = 0; c < idx.size(); ++c) sub(r, c) = gram(idx[r], idx[c]);
        }
        return solve_dense(std::move(sub), std::move(rhs));
    };

    const std::size_t max_outer = 3 * k;
    std::size_t outer = 0;
    std::vector<std::size_t> idx;
    while (true) {
        // Pick the most negative gradient component among clamped variables.
        std::size_t best = k;
        double wmax = tol;
        for (std::size_t j = 0; j < k; ++j) {
            if (!passive[j] && w[j] > wmax) {
                wmax = w[j];
                best = j;
            }
        }
        if (best == k) break; // KKT satisfied
        if (++outer > max_outer)
            throw NumericalFailureError("nnls exceeded 3K outer iterations");
        passive[best] = true;

        while (true) {
            std::vector<double> z = solve_passive(idx);
            double zmin = 1.0;
            for (std::size_t r = 0; r < idx.size(); ++r) zmin = std::min(zmin, z[r]);
            if (zmin > 0.0) {
                for (std::size_t r = 0; r < idx.size(); ++r) x[idx[r]] = z[r];
                break;
            }
            // Step toward z until the first coefficient hits zero.
            double step = 1.0;
            for (std::size_t r = 0; r < idx.size(); ++r) {
                if (z[r] <= 0.0) {
                    const double candidate = x[idx[r]] / (x[idx[r]] - z[r]);
                    step = std::min(step, candidate);
                }
            }
            for (std::size_t r = 0; r < idx.size(); ++r)
                x[idx[r]] += step * (z[r] - x[idx[r]]);
            for (std::size_t r = 0; r < idx.size(); ++r) {
                if (z[r] <= 0.0 && x[idx[r]] <= 1e-13 * scale) {
                    x[idx[r]] = 0.0;
                    passive[idx[r]] = false;
                }
            }
        }

        // Refresh dual vector: w = A^T b - G x.
        for (std::size_t j = 0; j < k; ++j) {
            double acc = atb[j];
            for (std::size_t c = 0; c < k; ++c)
                if (x[c] != 0.0) acc -= gram(j, c) * x[c];
            w[j] = acc;
        }
    }

    NnlsSolution sol;
    sol.coefficients = x;
    sol.all_zero = std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
    for (std::size_t j = 0; j < k; ++j)
        if (x[j] == 0.0) sol.active_set.push_back(j);
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = a.row_ptr(i);
        double fit = 0.0;
        for (std::size_t c = 0; c < k; ++c) fit += row[c] * x[c];
        const double r = fit - b[i];
        rss += r * r;
    }
    sol.residual_norm = std::sqrt(rss);
    return sol;
}

}  // namespace stackrule
