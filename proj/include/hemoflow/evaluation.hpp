#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "hemoflow/metrics.hpp"
#include "hemoflow/sampling.hpp"
#include "hemoflow/vwerp.hpp"

namespace hemo {

/// Controls for comparing a reconstructed field against a reference field.
/// Sections are ordered inlet first, then outlets; they drive the direct
/// pressure drop and the conservation check.
struct EvalOptions {
    std::vector<double> times;
    std::size_t interior_points = 2048;
    std::size_t wall_points = 512;
    std::vector<CrossSection> sections;
    std::uint64_t seed = 1;

    void validate() const {
        require(!times.empty(), errc::config, "evaluation needs at least one time");
        require(interior_points > 0, errc::config, "evaluation needs interior points");
        require(wall_points > 0, errc::config, "evaluation needs wall points");
    }
};

/// Headline comparison numbers. Velocity metrics pool all three components
/// over interior points and times; the pressure error is computed after the
/// per-time mean shift, so it measures recoverable (gauge-free) pressure.
struct FieldComparison {
    double velocity_r2 = 0.0;
    double velocity_rel_l2 = 0.0;
    double pressure_r2 = 0.0;
    double pressure_rel_l2 = 0.0;
    double wall_speed_fraction = 0.0;  ///< mean wall speed / peak reference speed
    double peak_reference_speed = 0.0;
    double dp_error = 0.0;             ///< peak-magnitude pressure drop mismatch
    double mass_imbalance_pct = 0.0;
    double peak_wss = 0.0;             ///< estimate [Ba]
    double peak_wss_time = 0.0;
    double peak_wss_reference = 0.0;
    std::vector<double> dp_estimate;   ///< [Ba], per time
    std::vector<double> dp_reference;  ///< [Ba], per time
};

/// Samples both fields on shared interior/wall point sets and assembles the
/// comparison. The reference field defines the target means for the pressure
/// shift and the peak speed normalizing the wall check.
inline FieldComparison compare_fields(const DifferentiableField& estimate,
                                      const DifferentiableField& reference,
                                      const ImplicitDomain& dom, const RheologyModel& model,
                                      const EvalOptions& opt) {
    opt.validate();
    PointSet interior = sample_interior(dom, opt.interior_points, mix_seed(opt.seed, 0x65761));
    WallSet wall = sample_wall(dom, opt.wall_points, mix_seed(opt.seed, 0x65762));

    FieldComparison out;
    std::vector<double> vel_ref, vel_est, p_ref_flat;
    vel_ref.reserve(3 * interior.points.size() * opt.times.size());
    vel_est.reserve(vel_ref.capacity());
    std::vector<std::vector<double>> p_rows_est(opt.times.size());
    std::vector<double> p_means_ref(opt.times.size());

    for (std::size_t ti = 0; ti < opt.times.size(); ++ti) {
        double t = opt.times[ti];
        double mean = 0.0;
        p_rows_est[ti].reserve(interior.points.size());
        for (const Vec3& x : interior.points) {
            Vec4 r = reference.evaluate(x, t);
            Vec4 e = estimate.evaluate(x, t);
            for (int c = 0; c < 3; ++c) {
                vel_ref.push_back(r[c]);
                vel_est.push_back(e[c]);
            }
            out.peak_reference_speed =
                std::max(out.peak_reference_speed, r.head<3>().norm());
            p_rows_est[ti].push_back(e[3]);
            p_ref_flat.push_back(r[3]);
            mean += r[3];
        }
        p_means_ref[ti] = mean / static_cast<double>(interior.points.size());
    }

    out.velocity_r2 = r_squared(vel_ref, vel_est);
    out.velocity_rel_l2 = relative_error_l2(vel_ref, vel_est);

    std::vector<std::vector<double>> shifted = mean_shift(p_rows_est, p_means_ref);
    std::vector<double> p_est_flat;
    p_est_flat.reserve(p_ref_flat.size());
    for (const auto& row : shifted) p_est_flat.insert(p_est_flat.end(), row.begin(), row.end());
    out.pressure_r2 = r_squared(p_ref_flat, p_est_flat);
    out.pressure_rel_l2 = relative_error_l2(p_ref_flat, p_est_flat);

    double wall_speed = 0.0;
    for (double t : opt.times)
        for (const Vec3& x : wall.points)
            wall_speed += estimate.evaluate(x, t).head<3>().norm();
    wall_speed /= static_cast<double>(opt.times.size() * wall.points.size());
    require(out.peak_reference_speed > 0.0, errc::domain,
            "wall speed fraction undefined for a zero reference flow");
    out.wall_speed_fraction = wall_speed / out.peak_reference_speed;

    if (opt.sections.size() >= 2) {
        const CrossSection& inlet = opt.sections.front();
        const CrossSection& outlet = opt.sections[1];
        out.dp_estimate = pressure_drop_direct(estimate, inlet, outlet, opt.times);
        out.dp_reference = pressure_drop_direct(reference, inlet, outlet, opt.times);
        out.dp_error = pressure_drop_error(out.dp_estimate, out.dp_reference);
        std::vector<CrossSection> outlets(opt.sections.begin() + 1, opt.sections.end());
        out.mass_imbalance_pct = mass_imbalance(estimate, inlet, outlets, opt.times);
    }

    WssMap wss_est = wss_map(estimate, model, wall, opt.times);
    WssMap wss_ref = wss_map(reference, model, wall, opt.times);
    out.peak_wss = wss_est.max_value;
    out.peak_wss_time = wss_est.argmax_time;
    out.peak_wss_reference = wss_ref.max_value;
    return out;
}

/// Folds a comparison plus per-section flow rates into a report. Units ride
/// on every record; the provenance object is the caller's to fill.
inline EvaluationReport build_report(const DifferentiableField& estimate,
                                     const FieldComparison& cmp, const EvalOptions& opt) {
    EvaluationReport report;
    auto scalar = [&](const std::string& name, const std::string& units, double v) {
        report.records.push_back({name, units, {}, {v}});
    };
    scalar("velocity_r2", "1", cmp.velocity_r2);
    scalar("velocity_rel_l2", "1", cmp.velocity_rel_l2);
    scalar("pressure_r2_meanshift", "1", cmp.pressure_r2);
    scalar("pressure_rel_l2_meanshift", "1", cmp.pressure_rel_l2);
    scalar("wall_speed_fraction", "1", cmp.wall_speed_fraction);
    scalar("peak_reference_speed", "cm/s", cmp.peak_reference_speed);
    scalar("peak_wss", "Ba", cmp.peak_wss);
    scalar("peak_wss_time", "s", cmp.peak_wss_time);
    scalar("peak_wss_reference", "Ba", cmp.peak_wss_reference);
    if (!cmp.dp_estimate.empty()) {
        scalar("pressure_drop_error", "1", cmp.dp_error);
        scalar("mass_imbalance", "%", cmp.mass_imbalance_pct);
        report.records.push_back({"pressure_drop", "Ba", opt.times, cmp.dp_estimate});
        report.records.push_back({"pressure_drop_reference", "Ba", opt.times, cmp.dp_reference});
    }
    for (const CrossSection& sec : opt.sections)
        report.records.push_back(
            {"flow_rate_" + sec.name, "cm^3/s", opt.times, flow_rate(estimate, sec, opt.times)});
    return report;
}

}  // namespace hemo
