#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "hemoflow/field.hpp"

namespace hemo {

/// Residual-driven refinement pool: collocation points retained because
/// their residual score ranked highest when they were candidates. Scores
/// are frozen at insertion; eviction drops the lowest-scoring incumbents.
struct RefinementSet {
    std::size_t capacity = 0;
    std::vector<SpacetimePoint> points;
    std::vector<double> scores;

    std::size_t size() const { return points.size(); }
};

/// Greedy residual-based refinement: append the k highest-scoring candidates
/// (all of them when k exceeds the candidate count), then evict the lowest
/// scores down to capacity. Ties break on lower index for determinism.
inline void rar_g_refine(RefinementSet& set, const std::vector<SpacetimePoint>& candidates,
                         const std::vector<double>& scores, std::size_t k) {
    require(candidates.size() == scores.size(), errc::config,
            "refinement candidates and scores must align");
    require(set.capacity > 0, errc::config, "refinement set has zero capacity");
    for (double s : scores)
        require(std::isfinite(s), errc::numeric, "refinement scores must be finite");

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t take = std::min(k, candidates.size());
    for (std::size_t r = 0; r < take; ++r) {
        set.points.push_back(candidates[order[r]]);
        set.scores.push_back(scores[order[r]]);
    }

    if (set.points.size() > set.capacity) {
        std::vector<std::size_t> keep(set.points.size());
        std::iota(keep.begin(), keep.end(), 0);
        std::stable_sort(keep.begin(), keep.end(),
                         [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });
        keep.resize(set.capacity);
        std::sort(keep.begin(), keep.end());  // preserve insertion order among survivors
        std::vector<SpacetimePoint> pts;
        std::vector<double> sc;
        pts.reserve(set.capacity);
        sc.reserve(set.capacity);
        for (std::size_t i : keep) {
            pts.push_back(set.points[i]);
            sc.push_back(set.scores[i]);
        }
        set.points = std::move(pts);
        set.scores = std::move(sc);
    }
}

}  // namespace hemo
