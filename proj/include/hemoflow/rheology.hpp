#pragma once

#include "hemoflow/field.hpp"

namespace hemo {

/// Power-law (Ostwald-de Waele) blood rheology in CGS units: the apparent
/// viscosity is mu(gamma) = m gamma^(n-1) [P] with the shear rate gamma [1/s]
/// clamped below at gamma_min to keep the exponent finite at rest. n = 1
/// recovers a Newtonian fluid with viscosity m.
struct RheologyModel {
    double m = 0.04;          ///< consistency index [P s^(n-1)]
    double n = 1.0;           ///< power-law exponent, in (0, 1]
    double density = 1.06;    ///< [g/cm^3]
    double gamma_min = 1e-6;  ///< shear-rate floor [1/s]

    void validate() const {
        require(m > 0.0, errc::config, "rheology consistency index must be positive");
        require(n > 0.0 && n <= 1.0, errc::config, "rheology exponent must be in (0,1]");
        require(density > 0.0, errc::config, "density must be positive");
        require(gamma_min > 0.0, errc::config, "shear-rate floor must be positive");
    }
};

inline RheologyModel newtonian(double mu, double density = 1.06) {
    RheologyModel r{mu, 1.0, density, 1e-6};
    r.validate();
    return r;
}

/// Fitted power-law pairs per hematocrit level. m is stored in CGS
/// (1 Pa s^n = 10 P s^n).
inline RheologyModel rheology_for_hematocrit(double hct_percent) {
    struct Row {
        double hct, m_cgs, n;
    };
    static constexpr Row table[] = {
        {20.0, 0.06850, 0.7113}, {32.5, 0.17271, 0.6339}, {45.0, 0.24208, 0.7146},
        {57.5, 0.41933, 0.6349}, {70.0, 0.53985, 0.6313},
    };
    for (const Row& row : table) {
        if (std::abs(row.hct - hct_percent) < 1e-9) {
            RheologyModel r{row.m_cgs, row.n, 1.06, 1e-6};
            r.validate();
            return r;
        }
    }
    raise(errc::config, "no rheology fit for hematocrit " + std::to_string(hct_percent) +
                            "% (known: 20, 32.5, 45, 57.5, 70)");
}

struct StrainRate {
    Mat3 eps = Mat3::Zero();  ///< symmetrized velocity gradient [1/s]
    double gamma = 0.0;       ///< sqrt(2 eps:eps) [1/s]
};

/// eps = (grad u + grad u^T)/2 and the scalar shear rate gamma. For simple
/// shear u = (g y, 0, 0) this returns gamma = |g| exactly.
inline StrainRate strain_rate(const Mat3& grad_u) {
    StrainRate s;
    s.eps = 0.5 * (grad_u + grad_u.transpose());
    s.gamma = std::sqrt(2.0 * s.eps.cwiseProduct(s.eps).sum());
    return s;
}

inline double apparent_viscosity(const RheologyModel& model, double gamma) {
    double g = std::max(gamma, model.gamma_min);
    return model.m * std::pow(g, model.n - 1.0);
}

}  // namespace hemo
