#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "stackrule/matrix.hpp"
#include "stackrule/rng.hpp"

namespace stackrule {

struct TreeConfig {
    std::size_t max_depth = 10;
    std::size_t min_leaf = 5;
    std::size_t mtry = 0; // features tried per split; 0 = all
};

// Greedy binary classification tree, Gini criterion, leaf scores are the
// positive-class fraction. Row indices may repeat (bootstrap samples).
class DecisionTree {
public:
    struct Node {
        std::int32_t feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        double value = 0.0;
    };

    void fit(const Matrix& x, const std::vector<int>& y, std::vector<std::uint32_t> rows,
             const TreeConfig& cfg, Rng& rng) {
        nodes_.clear();
        if (rows.empty()) {
            nodes_.push_back(Node{});
            return;
        }
        scratch_.resize(rows.size());
        feature_pool_.resize(x.cols());
        std::iota(feature_pool_.begin(), feature_pool_.end(), std::uint32_t{0});
        build(x, y, rows, 0, rows.size(), 0, cfg, rng);
    }

    double predict_row(const double* row) const {
        std::int32_t at = 0;
        while (nodes_[at].feature >= 0) {
            const Node& node = nodes_[at];
            at = row[node.feature] < node.threshold ? node.left : node.right;
        }
        return nodes_[at].value;
    }

    const std::vector<Node>& nodes() const { return nodes_; }

private:
    struct SplitChoice {
        bool found = false;
        std::size_t feature = 0;
        double threshold = 0.0;
        double score = -std::numeric_limits<double>::infinity();
    };

    std::int32_t build(const Matrix& x, const std::vector<int>& y, std::vector<std::uint32_t>& rows,
                       std::size_t begin, std::size_t end, std::size_t depth,
                       const TreeConfig& cfg, Rng& rng) {
        const std::size_t count = end - begin;
        std::size_t positives = 0;
        for (std::size_t i = begin; i < end; ++i) positives += static_cast<std::size_t>(y[rows[i]]);

        const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(Node{});
        nodes_[id].value = static_cast<double>(positives) / static_cast<double>(count);

        const bool pure = positives == 0 || positives == count;
        if (pure || depth >= cfg.max_depth || count < 2 * cfg.min_leaf) return id;

        const SplitChoice split = best_split(x, y, rows, begin, end, positives, cfg, rng);
        if (!split.found) return id;

        // Partition rows for the children; order within a side is irrelevant.
        std::size_t mid = begin;
        for (std::size_t i = begin; i < end; ++i)
            if (x(rows[i], split.feature) < split.threshold) std::swap(rows[i], rows[mid++]);

        nodes_[id].feature = static_cast<std::int32_t>(split.feature);
        nodes_[id].threshold = split.threshold;
        const std::int32_t left = build(x, y, rows, begin, mid, depth + 1, cfg, rng);
        nodes_[id].left = left;
        const std::int32_t right = build(x, y, rows, mid, end, depth + 1, cfg, rng);
        nodes_[id].right = right;
        return id;
    }

    SplitChoice best_split(const Matrix& x, const std::vector<int>& y,
                           const std::vector<std::uint32_t>& rows, std::size_t begin,
                           std::size_t end, std::size_t positives, const TreeConfig& cfg,
                           Rng& rng) {
        const std::size_t count = end - begin;
        const std::size_t p = x.cols();
        std::size_t tries = cfg.mtry == 0 ? p : std::min(cfg.mtry, p);

        // Partial Fisher-Yates over the shared pool gives a distinct random
        // feature subset; with mtry == 0 the order is immaterial.
        for (std::size_t d = 0; d < tries; ++d) {
            const std::size_t pick = d + static_cast<std::size_t>(rng.uniform_int(p - d));
            std::swap(feature_pool_[d], feature_pool_[pick]);
        }

        // Parent score; a split must beat it to be accepted.
        const double pos = static_cast<double>(positives);
        const double neg = static_cast<double>(count - positives);
        SplitChoice best;
        best.score = (pos * pos + neg * neg) / static_cast<double>(count) + 1e-12;

        for (std::size_t t = 0; t < tries; ++t) {
            const std::size_t feature = feature_pool_[t];
            for (std::size_t i = begin; i < end; ++i)
                scratch_[i - begin] = {x(rows[i], feature), y[rows[i]]};
            std::sort(scratch_.begin(), scratch_.begin() + count,
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            double left_pos = 0.0, left_n = 0.0;
            for (std::size_t i = 0; i + 1 < count; ++i) {
                left_pos += static_cast<double>(scratch_[i].second);
                left_n += 1.0;
                if (scratch_[i].first == scratch_[i + 1].first) continue;
                if (left_n < static_cast<double>(cfg.min_leaf)) continue;
                const double right_n = static_cast<double>(count) - left_n;
                if (right_n < static_cast<double>(cfg.min_leaf)) break;
                const double right_pos = pos - left_pos;
                const double left_neg = left_n - left_pos;
                const double right_neg = right_n - right_pos;
                const double score = (left_pos * left_pos + left_neg * left_neg) / left_n +
                                     (right_pos * right_pos + right_neg * right_neg) / right_n;
                if (score > best.score) {
                    double thr = 0.5 * (scratch_[i].first + scratch_[i + 1].first);
                    if (thr <= scratch_[i].first)
                        thr = std::nextafter(scratch_[i].first,
                                             std::numeric_limits<double>::infinity());
                    best.found = true;
                    best.feature = feature;
                    best.threshold = thr;
                    best.score = score;
                }
            }
        }
        return best;
    }

    std::vector<Node> nodes_;
    std::vector<std::pair<double, int>> scratch_;
    std::vector<std::uint32_t> feature_pool_;
};

}  // namespace stackrule
