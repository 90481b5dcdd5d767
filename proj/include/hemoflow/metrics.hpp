#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemoflow/field.hpp"
#include "hemoflow/halton.hpp"
#include "hemoflow/residuals.hpp"
#include "hemoflow/sampling.hpp"

namespace hemo {

/// Planar quadrature patch (disc or rectangle) used for flow rates and
/// surface pressure means. The in-plane frame is derived deterministically
/// from the normal; the QMC stream is per-section so two sections never
/// share sample positions.
struct CrossSection {
    enum class Shape { disc, rectangle };

    std::string name;
    Vec3 origin = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();  ///< unit; oriented along the flow to measure
    Shape shape = Shape::disc;
    double radius = 0.0;                 ///< disc [cm]
    double half_u = 0.0, half_v = 0.0;   ///< rectangle half extents [cm]
    std::size_t points = 4096;           ///< QMC quadrature size
    std::uint64_t seed = 0x73656374;

    void validate() const {
        require(std::abs(normal.norm() - 1.0) <= 1e-9, errc::config,
                "cross section normal must be unit length");
        if (shape == Shape::disc)
            require(radius > 0.0, errc::config, "disc section needs a positive radius");
        else
            require(half_u > 0.0 && half_v > 0.0, errc::config,
                    "rectangle section needs positive extents");
        require(points > 0, errc::config, "cross section needs quadrature points");
    }

    double area() const {
        return shape == Shape::disc ? M_PI * radius * radius : 4.0 * half_u * half_v;
    }

    /// Right-handed in-plane frame (e_u, e_v, normal), chosen from the axis
    /// least aligned with the normal so it is stable under small tilts.
    void frame(Vec3& e_u, Vec3& e_v) const {
        int axis = 0;
        for (int c = 1; c < 3; ++c)
            if (std::abs(normal[c]) < std::abs(normal[axis])) axis = c;
        e_u = Vec3::Unit(axis).cross(normal).normalized();
        e_v = normal.cross(e_u);
    }

    /// i-th quadrature point; all points carry the equal weight area()/points
    /// (the polar disc map is area preserving).
    Vec3 quadrature_point(std::uint64_t i) const {
        double u[2];
        HaltonSampler(2, seed, true).point(i, u);
        Vec3 e_u, e_v;
        frame(e_u, e_v);
        if (shape == Shape::disc) {
            double r = radius * std::sqrt(u[0]);
            double th = 2.0 * M_PI * u[1];
            return origin + r * (std::cos(th) * e_u + std::sin(th) * e_v);
        }
        return origin + (2.0 * u[0] - 1.0) * half_u * e_u + (2.0 * u[1] - 1.0) * half_v * e_v;
    }
};

/// QMC surface integral of u . n over the section, one value per time.
inline std::vector<double> flow_rate(const DifferentiableField& field, const CrossSection& sec,
                                     const std::vector<double>& times) {
    sec.validate();
    std::vector<Vec3> pts(sec.points);
    for (std::size_t i = 0; i < sec.points; ++i) pts[i] = sec.quadrature_point(i);
    double w = sec.area() / static_cast<double>(sec.points);
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
        double acc = 0.0;
        for (const Vec3& x : pts) acc += field.evaluate(x, t).head<3>().dot(sec.normal);
        out.push_back(w * acc);
    }
    return out;
}

/// QMC surface mean of the pressure channel, one value per time.
inline std::vector<double> section_pressure_mean(const DifferentiableField& field,
                                                 const CrossSection& sec,
                                                 const std::vector<double>& times) {
    sec.validate();
    std::vector<Vec3> pts(sec.points);
    for (std::size_t i = 0; i < sec.points; ++i) pts[i] = sec.quadrature_point(i);
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) {
        double acc = 0.0;
        for (const Vec3& x : pts) acc += field.evaluate(x, t)[3];
        out.push_back(acc / static_cast<double>(sec.points));
    }
    return out;
}

/// Mean inlet pressure minus mean outlet pressure per time; positive when
/// pressure falls toward the outlet.
inline std::vector<double> pressure_drop_direct(const DifferentiableField& field,
                                                const CrossSection& inlet,
                                                const CrossSection& outlet,
                                                const std::vector<double>& times) {
    std::vector<double> in = section_pressure_mean(field, inlet, times);
    std::vector<double> out = section_pressure_mean(field, outlet, times);
    for (std::size_t i = 0; i < in.size(); ++i) in[i] -= out[i];
    return in;
}

/// max_t |Q_in - sum Q_out| as a percentage of max_t Q_in. Sections must be
/// oriented along the flow so conserved transport gives matching signs.
inline double mass_imbalance(const DifferentiableField& field, const CrossSection& inlet,
                             const std::vector<CrossSection>& outlets,
                             const std::vector<double>& times) {
    require(!times.empty(), errc::config, "mass imbalance needs at least one time");
    std::vector<double> inflow = flow_rate(field, inlet, times);
    std::vector<double> total(times.size(), 0.0);
    for (const CrossSection& sec : outlets) {
        std::vector<double> q = flow_rate(field, sec, times);
        for (std::size_t i = 0; i < q.size(); ++i) total[i] += q[i];
    }
    double worst = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        worst = std::max(worst, std::abs(inflow[i] - total[i]));
        peak = std::max(peak, inflow[i]);
    }
    require(peak > 0.0, errc::domain, "mass imbalance undefined for zero peak inflow");
    return 100.0 * worst / peak;
}

/// Additive per-time shift of the estimated samples so each row's mean
/// matches the reference mean. Pressure differences within a row are
/// untouched.
inline std::vector<std::vector<double>> mean_shift(
    const std::vector<std::vector<double>>& estimated, const std::vector<double>& ref_mean) {
    require(estimated.size() == ref_mean.size(), errc::config,
            "mean shift needs one reference mean per time row");
    std::vector<std::vector<double>> out = estimated;
    for (std::size_t i = 0; i < out.size(); ++i) {
        require(!out[i].empty(), errc::config, "mean shift row has no samples");
        double mean = 0.0;
        for (double v : out[i]) mean += v;
        mean /= static_cast<double>(out[i].size());
        double shift = ref_mean[i] - mean;
        for (double& v : out[i]) v += shift;
    }
    return out;
}

/// Coefficient of determination 1 - SS_res / SS_tot of the estimate against
/// the reference over a flat sample set.
inline double r_squared(const std::vector<double>& reference,
                        const std::vector<double>& estimated) {
    require(reference.size() == estimated.size(), errc::config,
            "r_squared needs equally sized sample sets");
    require(reference.size() >= 2, errc::config, "r_squared needs at least two samples");
    double mean = 0.0;
    for (double v : reference) mean += v;
    mean /= static_cast<double>(reference.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        ss_tot += (reference[i] - mean) * (reference[i] - mean);
        ss_res += (reference[i] - estimated[i]) * (reference[i] - estimated[i]);
    }
    require(ss_tot > 0.0, errc::domain, "r_squared undefined for a constant reference");
    return 1.0 - ss_res / ss_tot;
}

/// ||reference - estimate|| / ||reference|| over the provided samples.
inline double relative_error_l2(const std::vector<double>& reference,
                                const std::vector<double>& estimated) {
    require(reference.size() == estimated.size(), errc::config,
            "relative error needs equally sized sample sets");
    require(!reference.empty(), errc::config, "relative error needs samples");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        num += (reference[i] - estimated[i]) * (reference[i] - estimated[i]);
        den += reference[i] * reference[i];
    }
    require(den > 0.0, errc::domain, "relative error undefined for a zero reference");
    return std::sqrt(num / den);
}

/// Wall shear stress over a wall sample set and time grid, with the instant
/// of the global maximum.
struct WssMap {
    std::vector<double> times;
    std::vector<std::vector<double>> values;  ///< [time][sample], Ba
    std::size_t argmax_time_index = 0;
    double argmax_time = 0.0;
    double max_value = 0.0;
};

inline WssMap wss_map(const DifferentiableField& field, const RheologyModel& model,
                      const WallSet& wall, const std::vector<double>& times) {
    require(!wall.points.empty(), errc::config, "wss map needs wall samples");
    require(!times.empty(), errc::config, "wss map needs times");
    WssMap map;
    map.times = times;
    map.values.reserve(times.size());
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        std::vector<double> row(wall.points.size());
        for (std::size_t s = 0; s < wall.points.size(); ++s)
            row[s] = wall_shear_stress(field, model, wall.points[s], times[ti],
                                       wall.normals[s]);
        double peak = *std::max_element(row.begin(), row.end());
        if (peak > map.max_value || ti == 0) {
            map.max_value = peak;
            map.argmax_time_index = ti;
            map.argmax_time = times[ti];
        }
        map.values.push_back(std::move(row));
    }
    return map;
}

/// FNV-1a 64-bit hash, used to fingerprint report inputs.
inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Fingerprint of a file's bytes, "fnv1a:<16 hex digits>".
inline std::string file_fingerprint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), errc::io, "cannot open " + path + " for fingerprinting");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return "fnv1a:" + hash_hex(fnv1a64(bytes.data(), bytes.size()));
}

/// One evaluated quantity: a scalar (times empty, one value) or a series
/// (values parallel to times). Units ride along for the report consumers.
struct ReportRecord {
    std::string name;
    std::string units;
    std::vector<double> times;
    std::vector<double> values;

    bool operator==(const ReportRecord&) const = default;
};

/// Deterministic bundle of evaluation records plus the provenance of the
/// inputs (source paths and fingerprints) that produced them.
struct EvaluationReport {
    nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
    std::vector<ReportRecord> records;

    void validate() const {
        for (const ReportRecord& r : records) {
            require(!r.name.empty(), errc::config, "report record needs a name");
            if (r.times.empty())
                require(r.values.size() == 1, errc::config,
                        "scalar record '" + r.name + "' needs exactly one value");
            else
                require(r.times.size() == r.values.size(), errc::config,
                        "series record '" + r.name + "' needs one value per time");
        }
    }
};

inline constexpr const char* kReportFormat = "hemoflow-report";
inline constexpr int kReportVersion = 1;

inline void emit_report_json(const EvaluationReport& report, const std::string& path) {
    report.validate();
    nlohmann::ordered_json j;
    j["format"] = kReportFormat;
    j["version"] = kReportVersion;
    j["provenance"] = report.provenance;
    j["records"] = nlohmann::ordered_json::array();
    for (const ReportRecord& r : report.records) {
        nlohmann::ordered_json rec;
        rec["name"] = r.name;
        rec["units"] = r.units;
        rec["times"] = r.times;
        rec["values"] = r.values;
        j["records"].push_back(std::move(rec));
    }
    std::ofstream out(path, std::ios::binary);
    require(out.good(), errc::io, "cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    require(out.good(), errc::io, "failed writing " + path);
}

/// CSV layout: one row per (record, time); scalars leave the time cell empty.
inline void emit_report_csv(const EvaluationReport& report, const std::string& path) {
    report.validate();
    std::ofstream out(path, std::ios::binary);
    require(out.good(), errc::io, "cannot open " + path + " for writing");
    out << "name,units,time_s,value\n";
    char buf[32];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const ReportRecord& r : report.records) {
        if (r.times.empty()) {
            out << r.name << "," << r.units << ",," << num(r.values[0]) << "\n";
            continue;
        }
        for (std::size_t i = 0; i < r.times.size(); ++i)
            out << r.name << "," << r.units << "," << num(r.times[i]) << ","
                << num(r.values[i]) << "\n";
    }
    require(out.good(), errc::io, "failed writing " + path);
}

inline void emit_report(const EvaluationReport& report, const std::string& path,
                        const std::string& format) {
    if (format == "json")
        emit_report_json(report, path);
    else if (format == "csv")
        emit_report_csv(report, path);
    else
        raise(errc::config, "unknown report format '" + format + "' (json or csv)");
}

inline EvaluationReport read_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), errc::io, "cannot open " + path);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        raise(errc::format, "malformed report " + path + ": " + e.what());
    }
    require(j.value("format", "") == kReportFormat, errc::format,
            path + " is not a report file");
    require(j.value("version", 0) == kReportVersion, errc::format,
            "unsupported report version in " + path);
    EvaluationReport report;
    report.provenance = j.value("provenance", nlohmann::ordered_json::object());
    for (const auto& rec : j.value("records", nlohmann::ordered_json::array())) {
        ReportRecord r;
        r.name = rec.value("name", "");
        r.units = rec.value("units", "");
        r.times = rec.value("times", std::vector<double>{});
        r.values = rec.value("values", std::vector<double>{});
        report.records.push_back(std::move(r));
    }
    report.validate();
    return report;
}

}  // namespace hemo
