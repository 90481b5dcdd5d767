#pragma once

#include <cmath>
#include <string>

#include "hemoflow/field.hpp"

namespace hemo {

/// Adam with bias correction. Deterministic given the gradient sequence;
/// aborts with the offending component when a gradient turns non-finite so
/// training can stop at the last good checkpoint.
struct AdamOptimizer {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    std::int64_t step_count = 0;
    Eigen::VectorXd m, v;

    void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
        require(theta.size() == grad.size(), errc::config,
                "optimizer parameter/gradient size mismatch");
        if (!grad.allFinite()) {
            Eigen::Index bad = 0;
            for (Eigen::Index i = 0; i < grad.size(); ++i)
                if (!std::isfinite(grad[i])) {
                    bad = i;
                    break;
                }
            raise(errc::numeric, "non-finite gradient component " + std::to_string(bad) +
                                     " at optimizer step " + std::to_string(step_count + 1));
        }
        if (m.size() != theta.size()) {
            m = Eigen::VectorXd::Zero(theta.size());
            v = Eigen::VectorXd::Zero(theta.size());
        }
        ++step_count;
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
        theta.array() -=
            lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
};

/// Reduce-on-plateau schedule in relative mode: an observation improves only
/// if it beats the best seen by more than rel_threshold of it; after more
/// than `patience` consecutive non-improvements the rate is multiplied by
/// `factor`, never below lr_min.
struct PlateauScheduler {
    double lr = 1e-3;
    double factor = 0.5;
    int patience = 10;
    double rel_threshold = 1e-3;
    double lr_min = 1e-6;

    double best = std::numeric_limits<double>::infinity();
    int bad_count = 0;

    /// Feeds one validation loss; returns true when the rate was reduced.
    bool observe(double value) {
        require(std::isfinite(value), errc::numeric, "validation loss is not finite");
        if (value < best * (1.0 - rel_threshold)) {
            best = value;
            bad_count = 0;
            return false;
        }
        if (++bad_count > patience) {
            bad_count = 0;
            double next = std::max(lr * factor, lr_min);
            bool reduced = next < lr;
            lr = next;
            return reduced;
        }
        return false;
    }
};

}  // namespace hemo
