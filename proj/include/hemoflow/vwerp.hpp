#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "hemoflow/field.hpp"
#include "hemoflow/rheology.hpp"
#include "hemoflow/stokes.hpp"
#include "hemoflow/voxel.hpp"

namespace hemo {

/// Order of the backward finite difference used for du/dt. Everything else
/// (convective, viscous) is evaluated at the interval midpoint from the
/// average of the endpoint fields.
enum class TimeScheme { first_order, second_order };

/// Velocity snapshots on the mesh vertices at strictly increasing times.
/// Built either by direct field queries (arbitrary times) or by trilinear
/// interpolation of voxel means (acquisition phase times only).
struct SampledVelocityHistory {
    std::vector<double> times;               ///< [s]
    std::vector<std::vector<Vec3>> samples;  ///< [time][vertex], cm/s
    std::size_t fallback_count = 0;  ///< vertices that fell outside voxel coverage

    void validate(std::size_t n_vertices) const {
        require(!times.empty(), errc::config, "velocity history has no samples");
        require(times.size() == samples.size(), errc::config,
                "velocity history times and samples disagree in length");
        for (std::size_t i = 0; i + 1 < times.size(); ++i)
            require(times[i] < times[i + 1], errc::config,
                    "velocity history times must strictly increase");
        for (const auto& s : samples)
            require(s.size() == n_vertices, errc::config,
                    "velocity sample count does not match the mesh vertex count");
    }
};

/// Direct field evaluation at every vertex for each requested time.
inline SampledVelocityHistory sample_velocity(const DifferentiableField& field,
                                              const SimplexMesh& mesh,
                                              const std::vector<double>& times) {
    require(!times.empty(), errc::config, "sampling needs at least one time");
    SampledVelocityHistory h;
    h.times = times;
    h.samples.reserve(times.size());
    for (double t : times) {
        std::vector<Vec3> snap(mesh.vertices.size());
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
            snap[v] = field.evaluate(mesh.vertices[v], t).head<3>();
        h.samples.push_back(std::move(snap));
    }
    h.validate(mesh.vertices.size());
    return h;
}

/// Trilinear interpolation of the voxel means onto the vertices, one sample
/// per acquisition phase (timestamped at the phase midpoint). Vertices
/// outside the voxel-center lattice are clamped to its hull (nearest-value
/// behavior) and counted in fallback_count.
inline SampledVelocityHistory sample_velocity(const VoxelDataset& ds, const SimplexMesh& mesh) {
    const VoxelGrid& g = ds.grid;
    g.validate();
    SampledVelocityHistory h;
    for (int p = 0; p < g.phases; ++p) h.times.push_back(g.phase_mid(p));

    // Per-vertex lattice coordinates, shared by all phases.
    struct Stencil {
        int cell[3];
        double frac[3];
    };
    std::vector<Stencil> stencils(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        Vec3 r = (mesh.vertices[v] - g.origin).cwiseQuotient(g.voxel_size) - Vec3::Constant(0.5);
        bool outside = false;
        Stencil& s = stencils[v];
        for (int c = 0; c < 3; ++c) {
            double hi = static_cast<double>(g.dims[c] - 1);
            double rc = r[c];
            if (rc < 0.0 || rc > hi) {
                outside = true;
                rc = std::clamp(rc, 0.0, hi);
            }
            s.cell[c] = std::max(std::min(static_cast<int>(rc), g.dims[c] - 2), 0);
            s.frac[c] = g.dims[c] > 1 ? rc - s.cell[c] : 0.0;
        }
        if (outside) ++h.fallback_count;
    }

    for (int p = 0; p < g.phases; ++p) {
        std::vector<Vec3> snap(mesh.vertices.size());
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
            const Stencil& s = stencils[v];
            Vec3 acc = Vec3::Zero();
            for (int corner = 0; corner < 8; ++corner) {
                double w = 1.0;
                int idx[3];
                for (int c = 0; c < 3; ++c) {
                    int d = (corner >> c) & 1;
                    w *= d ? s.frac[c] : 1.0 - s.frac[c];
                    idx[c] = std::min(s.cell[c] + d, g.dims[c] - 1);
                }
                if (w == 0.0) continue;
                acc += w * ds.velocity_at(p, g.linear(idx[0], idx[1], idx[2]));
            }
            snap[v] = acc;
        }
        h.samples.push_back(std::move(snap));
    }
    h.validate(mesh.vertices.size());
    return h;
}

/// Pressure-drop estimate per time interval plus the three virtual power
/// components (dyn): dp = (kinetic + convective + viscous) / a_effective.
struct PressureDropSeries {
    std::vector<double> times;       ///< interval right endpoints [s]
    std::vector<double> dp;          ///< inlet minus outlet pressure [Ba]
    std::vector<double> kinetic;     ///< rho int (du/dt) . xi
    std::vector<double> convective;  ///< rho int (u . grad u) . xi
    std::vector<double> viscous;     ///< volume strain product minus port traction term
};

/// Virtual-power pressure-drop estimator. Tests the momentum balance of the
/// measured field against the divergence-free Stokes test field: with
/// div(xi) = 0 and xi = 0 on walls, the pressure integral collapses to the
/// ports, where uniform port pressure gives
///     -int grad(p) . xi = a_effective * (p_in - p_out),
/// so the drop p_in - p_out (positive when pressure falls toward the outlet)
/// is the weighted power sum divided by a_effective.
///
/// du/dt uses a backward difference anchored at each interval's right
/// endpoint: first order spans one interval; second order spans two with
/// nonuniform three-point weights (the first interval warms up at first
/// order). Convective and viscous terms use the average of the endpoint
/// fields, i.e. the interval midpoint to second order. The apparent
/// viscosity comes from the elementwise P1 strain rate of that averaged
/// field, floored like every other rheology evaluation. The port traction
/// term integrates the owner-element strain over inlet and target-outlet
/// facets only; the test field vanishes identically on every other facet.
inline PressureDropSeries vwerp_pressure_drop(const SampledVelocityHistory& history,
                                              const SimplexMesh& mesh,
                                              const StokesTestField& tf,
                                              const RheologyModel& model, TimeScheme scheme) {
    model.validate();
    const std::size_t nv = mesh.vertices.size();
    const int nt = static_cast<int>(mesh.tets.size());
    require(tf.xi.size() == nv, errc::config,
            "test field does not match the mesh (vertex counts differ)");
    require(tf.a_effective > 0.0, errc::config, "test field carries no influx");
    history.validate(nv);
    const std::size_t steps = history.times.size();
    require(steps >= 2, errc::config, "pressure drop needs at least two samples");
    if (scheme == TimeScheme::second_order)
        require(steps >= 3, errc::config, "second-order scheme needs at least three samples");
    bool have_outlet = false;
    for (const auto& f : mesh.facets) have_outlet = have_outlet || f.tag == outlet_tag(tf.outlet);
    require(have_outlet, errc::config,
            "mesh has no outlet " + std::to_string(tf.outlet) + " facets");

    // Element constants and the test-field pieces, fixed across intervals.
    struct ElementData {
        detail::ElementGeometry geom;
        std::array<Vec3, 4> xi;
        Vec3 xi_sum;
        Mat3 eps_xi;
    };
    std::vector<ElementData> elems(mesh.tets.size());
    for (int e = 0; e < nt; ++e) {
        ElementData& d = elems[e];
        d.geom = detail::element_geometry(mesh, e);
        Mat3 grad_xi = Mat3::Zero();
        d.xi_sum = Vec3::Zero();
        for (int i = 0; i < 4; ++i) {
            d.xi[i] = tf.xi[mesh.tets[e][i]];
            d.xi_sum += d.xi[i];
            grad_xi += d.xi[i] * d.geom.grad[i].transpose();
        }
        d.eps_xi = 0.5 * (grad_xi + grad_xi.transpose());
    }
    struct PortFacet {
        int facet, owner;
        double area;
        Vec3 normal, xi_sum;
    };
    std::vector<PortFacet> ports;
    for (int f = 0; f < static_cast<int>(mesh.facets.size()); ++f) {
        const auto& fc = mesh.facets[f];
        if (fc.tag != kTagInlet && fc.tag != outlet_tag(tf.outlet)) continue;
        ports.push_back({f, fc.owner, mesh.facet_area(f), mesh.facet_normal(f),
                         tf.xi[fc.v[0]] + tf.xi[fc.v[1]] + tf.xi[fc.v[2]]});
    }

    const double rho = model.density;
    PressureDropSeries out;
    std::vector<Mat3> grad_u(mesh.tets.size());
    std::vector<double> mu(mesh.tets.size());
    std::vector<Vec3> dudt(nv);
    for (std::size_t s = 1; s < steps; ++s) {
        // Backward-difference weights for du/dt at times[s].
        double w0 = 0.0, w1, w2;  // coefficients of samples s-2, s-1, s
        if (scheme == TimeScheme::first_order || s == 1) {
            double dt = history.times[s] - history.times[s - 1];
            w1 = -1.0 / dt;
            w2 = 1.0 / dt;
        } else {
            double t0 = history.times[s - 2], t1 = history.times[s - 1], t2 = history.times[s];
            w0 = (t2 - t1) / ((t0 - t1) * (t0 - t2));
            w1 = (t2 - t0) / ((t1 - t0) * (t1 - t2));
            w2 = (2.0 * t2 - t0 - t1) / ((t2 - t0) * (t2 - t1));
        }
        const std::vector<Vec3>& ua = history.samples[s - 1];
        const std::vector<Vec3>& ub = history.samples[s];
        for (std::size_t v = 0; v < nv; ++v) {
            dudt[v] = w1 * ua[v] + w2 * ub[v];
            if (w0 != 0.0) dudt[v] += w0 * history.samples[s - 2][v];
        }

        double kin = 0.0, conv = 0.0, visc_vol = 0.0;
        for (int e = 0; e < nt; ++e) {
            const ElementData& d = elems[e];
            const auto& t = mesh.tets[e];
            Vec3 um[4];
            Mat3 G = Mat3::Zero();
            for (int i = 0; i < 4; ++i) {
                um[i] = 0.5 * (ua[t[i]] + ub[t[i]]);
                G += um[i] * d.geom.grad[i].transpose();
            }
            StrainRate sr = strain_rate(G);
            mu[e] = apparent_viscosity(model, sr.gamma);
            grad_u[e] = G;

            // P1 mass rule: int f.g = V/20 (sum_i f_i.g_i + (sum f).(sum g)),
            // exact for products of linear fields.
            Vec3 a_sum = Vec3::Zero(), w_sum = Vec3::Zero();
            double kin_dot = 0.0, conv_dot = 0.0;
            for (int i = 0; i < 4; ++i) {
                const Vec3& a = dudt[t[i]];
                Vec3 w = G * um[i];  // nodal u . grad u, linear on the element
                a_sum += a;
                w_sum += w;
                kin_dot += a.dot(d.xi[i]);
                conv_dot += w.dot(d.xi[i]);
            }
            double mass = d.geom.volume / 20.0;
            kin += rho * mass * (kin_dot + a_sum.dot(d.xi_sum));
            conv += rho * mass * (conv_dot + w_sum.dot(d.xi_sum));
            visc_vol += 2.0 * mu[e] * d.geom.volume * d.eps_xi.cwiseProduct(sr.eps).sum();
        }
        double visc_bnd = 0.0;
        for (const PortFacet& pf : ports) {
            Mat3 eps = 0.5 * (grad_u[pf.owner] + grad_u[pf.owner].transpose());
            visc_bnd += 2.0 * mu[pf.owner] * (eps * pf.normal).dot(pf.xi_sum) * pf.area / 3.0;
        }
        double viscous = visc_vol - visc_bnd;

        out.times.push_back(history.times[s]);
        out.kinetic.push_back(kin);
        out.convective.push_back(conv);
        out.viscous.push_back(viscous);
        out.dp.push_back((kin + conv + viscous) / tf.a_effective);
    }
    return out;
}

/// Relative disagreement of the absolute series maxima,
/// |max|est| - max|ref|| / max|ref|.
inline double pressure_drop_error(const std::vector<double>& estimated,
                                  const std::vector<double>& reference) {
    require(!estimated.empty() && !reference.empty(), errc::config,
            "pressure drop error needs non-empty series");
    auto max_abs = [](const std::vector<double>& s) {
        double m = 0.0;
        for (double v : s) m = std::max(m, std::abs(v));
        return m;
    };
    double ref = max_abs(reference);
    require(ref > 0.0, errc::domain, "pressure drop error undefined for an all-zero reference");
    return std::abs(max_abs(estimated) - ref) / ref;
}

}  // namespace hemo
