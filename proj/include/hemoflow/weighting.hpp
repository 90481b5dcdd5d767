#pragma once

#include <array>
#include <cmath>

#include "hemoflow/field.hpp"

namespace hemo {

/// The seven balanced loss components: velocity observations, pressure mean,
/// the three momentum residual channels, continuity, and the no-slip term.
enum class LossComponent : int { obs = 0, p = 1, nsx = 2, nsy = 3, nsz = 4, cont = 5, bc = 6 };

inline constexpr int kLossComponents = 7;
inline constexpr std::array<const char*, kLossComponents> kLossComponentNames{
    "obs", "p", "ns_x", "ns_y", "ns_z", "cont", "bc"};

/// Positive multipliers lambda_i applied to each component.
struct LossWeights {
    std::array<double, kLossComponents> w{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};

    double& operator[](LossComponent c) { return w[static_cast<int>(c)]; }
    double operator[](LossComponent c) const { return w[static_cast<int>(c)]; }
    std::array<double, 4> physics() const {
        return {w[2], w[3], w[4], w[5]};  // NSx, NSy, NSz, Cont
    }
    void validate() const {
        for (double v : w) require(v >= 0.0 && std::isfinite(v), errc::config,
                                   "loss weights must be finite and nonnegative");
    }
};

/// Population standard deviation of a flattened gradient vector.
inline double gradient_std(const Eigen::VectorXd& g) {
    if (g.size() == 0) return 0.0;
    double mean = g.mean();
    return std::sqrt((g.array() - mean).square().mean());
}

/// Gradient-variance loss balancing. Each update computes
/// lambda_hat_i = max_j std(grad L_j) / std(grad L_i) from the per-component
/// parameter gradients and blends lambda <- alpha lambda + (1-alpha)
/// lambda_hat, so the steepest component is normalized to 1 and weighted
/// gradient stds equalize as alpha -> 0.
struct InverseDirichlet {
    double alpha = 0.99;
    int update_period = 10;
    LossWeights weights;

    /// Applies one update from per-component gradient stds. Returns false
    /// (weights untouched) when every component's std is zero; components
    /// with zero std among active ones keep their current weight.
    bool update(const std::array<double, kLossComponents>& stds) {
        double max_std = 0.0;
        for (double s : stds) {
            require(std::isfinite(s) && s >= 0.0, errc::numeric,
                    "gradient std must be finite and nonnegative");
            max_std = std::max(max_std, s);
        }
        if (max_std == 0.0) return false;
        for (int i = 0; i < kLossComponents; ++i) {
            if (stds[i] == 0.0) continue;
            double hat = max_std / stds[i];
            weights.w[i] = alpha * weights.w[i] + (1.0 - alpha) * hat;
        }
        return true;
    }

    bool update(const std::array<Eigen::VectorXd, kLossComponents>& grads) {
        std::array<double, kLossComponents> stds{};
        for (int i = 0; i < kLossComponents; ++i) stds[i] = gradient_std(grads[i]);
        return update(stds);
    }
};

}  // namespace hemo
