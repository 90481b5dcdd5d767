#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "hemoflow/errors.hpp"

namespace hemo {

/// Three-element (RCR) lumped outlet model: a proximal resistance in series
/// with a distal resistance/capacitance pair. The distal pressure p_d obeys
/// C dp_d/dt + p_d/R_d = Q and the outlet sees p = R_p Q + p_d.
struct WindkesselParams {
    double r_proximal = 1.0;   ///< R_p, pressure/(volume flow)
    double r_distal = 1.0;     ///< R_d
    double capacitance = 1.0;  ///< C, volume/pressure
    double p_d0 = 0.0;         ///< distal pressure at t = 0

    double time_constant() const { return r_distal * capacitance; }

    void validate() const {
        require(r_proximal > 0.0, errc::config, "proximal resistance must be positive");
        require(r_distal > 0.0, errc::config, "distal resistance must be positive");
        require(capacitance > 0.0, errc::config, "capacitance must be positive");
    }
};

/// Reference parameter sets for a four-outlet aortic tree (brachiocephalic,
/// left carotid, left subclavian, descending aorta), in the self-consistent
/// unit system of their source data.
inline std::array<WindkesselParams, 4> aortic_outlet_presets() {
    return {{{274.0, 5675.0, 5.08, 107325.0},
             {1300.0, 19663.0, 1.4416, 107325.0},
             {791.0, 10048.0, 2.788, 107325.0},
             {141.0, 2066.0, 13.6904, 107325.0}}};
}

/// Sampled volumetric flow rate Q(t); evaluation interpolates linearly and
/// clamps to the end values outside the sampled range.
struct FlowSeries {
    std::vector<double> times;
    std::vector<double> flow;

    void validate() const {
        require(times.size() >= 2, errc::config, "flow series needs at least two samples");
        require(times.size() == flow.size(), errc::config,
                "flow series times and values must align");
        for (std::size_t i = 1; i < times.size(); ++i)
            require(times[i] > times[i - 1], errc::config,
                    "flow series times must be strictly increasing");
    }

    double min_spacing() const {
        double dt = std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < times.size(); ++i)
            dt = std::min(dt, times[i] - times[i - 1]);
        return dt;
    }

    double operator()(double t) const {
        if (t <= times.front()) return flow.front();
        if (t >= times.back()) return flow.back();
        auto hi = std::upper_bound(times.begin(), times.end(), t);
        std::size_t i = static_cast<std::size_t>(hi - times.begin());
        double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
        return (1.0 - w) * flow[i - 1] + w * flow[i];
    }
};

/// One classical RK4 step of dp_d/dt = (Q - p_d/R_d)/C from time t, with the
/// flow evaluated at the stage times t, t+dt/2, t+dt.
template <class QFn>
double wk_step(const WindkesselParams& wk, double p_d, double t, QFn&& q, double dt) {
    require(dt > 0.0, errc::config, "windkessel step needs dt > 0");
    auto rhs = [&](double tt, double p) { return (q(tt) - p / wk.r_distal) / wk.capacitance; };
    double k1 = rhs(t, p_d);
    double k2 = rhs(t + 0.5 * dt, p_d + 0.5 * dt * k1);
    double k3 = rhs(t + 0.5 * dt, p_d + 0.5 * dt * k2);
    double k4 = rhs(t + dt, p_d + dt * k3);
    return p_d + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline double outlet_pressure(const WindkesselParams& wk, double q, double p_d) {
    return wk.r_proximal * q + p_d;
}

struct WindkesselResponse {
    std::vector<double> times;
    std::vector<double> p_distal;
    std::vector<double> p_outlet;
};

/// Integrates the distal pressure across the sampled flow window on a uniform
/// dt grid (the last step is shortened to land exactly on the final sample).
/// Deterministic: same params/series/dt give bit-identical output.
inline WindkesselResponse simulate_windkessel(const WindkesselParams& wk, const FlowSeries& q,
                                              double dt) {
    wk.validate();
    q.validate();
    require(dt > 0.0, errc::config, "windkessel simulation needs dt > 0");
    require(dt <= q.min_spacing() + 1e-15, errc::config,
            "windkessel dt must not exceed the flow series spacing");

    const double t_begin = q.times.front(), t_end = q.times.back();
    WindkesselResponse out;
    double t = t_begin, p_d = wk.p_d0;
    out.times.push_back(t);
    out.p_distal.push_back(p_d);
    out.p_outlet.push_back(outlet_pressure(wk, q(t), p_d));
    while (t < t_end - 1e-12 * (t_end - t_begin)) {
        double h = std::min(dt, t_end - t);
        p_d = wk_step(wk, p_d, t, q, h);
        t += h;
        out.times.push_back(t);
        out.p_distal.push_back(p_d);
        out.p_outlet.push_back(outlet_pressure(wk, q(t), p_d));
    }
    return out;
}

}  // namespace hemo
