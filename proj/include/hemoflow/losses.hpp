#pragma once

#include <vector>

#include "hemoflow/domain.hpp"
#include "hemoflow/halton.hpp"
#include "hemoflow/neural_field.hpp"
#include "hemoflow/residuals.hpp"
#include "hemoflow/tape.hpp"
#include "hemoflow/voxel.hpp"
#include "hemoflow/weighting.hpp"

namespace hemo {

// All loss terms return `weight * mean-square mismatch` and, when `grad` is
// given, accumulate the weighted parameter gradient into it. Passing
// weight = 1 yields the raw component value/gradient the balancing scheme
// consumes.

/// Observation loss with the full acquisition operator: one scrambled 4D
/// offset set is drawn per batch, scaled and translated into every voxel of
/// the batch, and the indicator-masked QMC means are compared to the stored
/// voxel data. Mean over the batch of squared 3-vector mismatch.
inline double loss_observation(const NeuralField& f, const ImplicitDomain& dom,
                               const VoxelDataset& ds, const std::vector<ObsIndex>& batch,
                               std::size_t points_per_voxel, std::uint64_t seed,
                               double weight = 1.0, Eigen::VectorXd* grad = nullptr) {
    require(!batch.empty(), errc::config, "observation batch is empty");
    require(points_per_voxel > 0, errc::config, "observation needs points per voxel");
    const std::size_t B = batch.size();
    const std::size_t n = points_per_voxel;

    HaltonSampler sampler(4, mix_seed(seed, 0x6f6273), true);
    std::vector<std::array<double, 4>> offsets(n);
    for (std::size_t s = 0; s < n; ++s) sampler.point(s, offsets[s].data());

    std::vector<SpacetimePoint> pts(B * n);
    std::vector<char> in_lumen(B * n);
    for (std::size_t b = 0; b < B; ++b) {
        Eigen::Vector3i v = ds.grid.unpack(batch[b].voxel);
        Vec3 lo = ds.grid.voxel_lo(v.x(), v.y(), v.z());
        double tb = ds.grid.phase_begin(batch[b].phase);
        for (std::size_t s = 0; s < n; ++s) {
            Vec3 x = lo + Vec3(offsets[s][0] * ds.grid.voxel_size.x(),
                               offsets[s][1] * ds.grid.voxel_size.y(),
                               offsets[s][2] * ds.grid.voxel_size.z());
            pts[b * n + s] = {x, tb + offsets[s][3] * ds.grid.phase_duration};
            in_lumen[b * n + s] = dom.inside(x) ? 1 : 0;
        }
    }

    Mlp::Cache cache;
    MatrixXd out;
    f.values(pts, cache, out);

    double loss = 0.0;
    MatrixXd dout;
    if (grad) dout = MatrixXd::Zero(4, out.cols());
    for (std::size_t b = 0; b < B; ++b) {
        Vec3 mean = Vec3::Zero();
        for (std::size_t s = 0; s < n; ++s)
            if (in_lumen[b * n + s]) mean += out.col(static_cast<Index>(b * n + s)).head<3>();
        mean /= static_cast<double>(n);
        Vec3 diff = mean - ds.velocity_at(batch[b].phase, batch[b].voxel).cast<double>().eval();
        if (!diff.allFinite())
            raise(errc::numeric, "observation loss diverged on voxel " +
                                     std::to_string(batch[b].voxel) + ", phase " +
                                     std::to_string(batch[b].phase));
        loss += diff.squaredNorm() / static_cast<double>(B);
        if (grad) {
            Vec3 a = (2.0 * weight / (static_cast<double>(B) * n)) * diff;
            for (std::size_t s = 0; s < n; ++s)
                if (in_lumen[b * n + s]) dout.col(static_cast<Index>(b * n + s)).head<3>() = a;
        }
    }
    if (grad) f.values_backward(cache, dout, *grad);
    return weight * loss;
}

/// Stage-1 observation loss: the data are treated as point measurements at
/// voxel centers and phase midpoints; no quadrature, no lumen indicator.
inline double loss_observation_pointwise(const NeuralField& f, const VoxelDataset& ds,
                                         const std::vector<ObsIndex>& batch, double weight = 1.0,
                                         Eigen::VectorXd* grad = nullptr) {
    require(!batch.empty(), errc::config, "observation batch is empty");
    const std::size_t B = batch.size();
    std::vector<SpacetimePoint> pts(B);
    for (std::size_t b = 0; b < B; ++b) {
        Eigen::Vector3i v = ds.grid.unpack(batch[b].voxel);
        pts[b] = {ds.grid.voxel_center(v.x(), v.y(), v.z()),
                  ds.grid.phase_mid(batch[b].phase)};
    }
    Mlp::Cache cache;
    MatrixXd out;
    f.values(pts, cache, out);
    double loss = 0.0;
    MatrixXd dout;
    if (grad) dout = MatrixXd::Zero(4, out.cols());
    for (std::size_t b = 0; b < B; ++b) {
        Vec3 diff = out.col(static_cast<Index>(b)).head<3>() -
                    ds.velocity_at(batch[b].phase, batch[b].voxel).cast<double>();
        if (!diff.allFinite())
            raise(errc::numeric,
                  "observation loss diverged at " + format_point(pts[b].x, pts[b].t));
        loss += diff.squaredNorm() / static_cast<double>(B);
        if (grad)
            dout.col(static_cast<Index>(b)).head<3>() =
                (2.0 * weight / static_cast<double>(B)) * diff;
    }
    if (grad) f.values_backward(cache, dout, *grad);
    return weight * loss;
}

/// Pressure-anchor loss: lumen-masked QMC means of the predicted pressure
/// over each region, squared against the reference mean, averaged over
/// regions.
inline double loss_pressure(const NeuralField& f, const ImplicitDomain& dom,
                            const std::vector<PressureRegion>& regions, double p_mean,
                            std::size_t n, std::uint64_t seed, double weight = 1.0,
                            Eigen::VectorXd* grad = nullptr) {
    require(!regions.empty(), errc::config, "pressure loss needs at least one region");
    require(n > 0, errc::config, "pressure loss needs n > 0");
    const std::size_t R = regions.size();

    std::vector<SpacetimePoint> pts;
    std::vector<char> accepted;
    pts.reserve(R * n);
    accepted.reserve(R * n);
    std::array<double, 4> u{};
    for (std::size_t r = 0; r < R; ++r) {
        const PressureRegion& reg = regions[r];
        require(reg.t_end > reg.t_begin, errc::domain, "pressure region needs t_end > t_begin");
        HaltonSampler sampler(4, mix_seed(seed, 0x707265, r), true);
        Vec3 extent = reg.box.hi - reg.box.lo;
        for (std::size_t s = 0; s < n; ++s) {
            sampler.point(s, u.data());
            Vec3 x = reg.box.lo + Vec3(u[0] * extent.x(), u[1] * extent.y(), u[2] * extent.z());
            pts.push_back({x, reg.t_begin + u[3] * (reg.t_end - reg.t_begin)});
            accepted.push_back(dom.inside(x) ? 1 : 0);
        }
    }

    Mlp::Cache cache;
    MatrixXd out;
    f.values(pts, cache, out);

    double loss = 0.0;
    MatrixXd dout;
    if (grad) dout = MatrixXd::Zero(4, out.cols());
    for (std::size_t r = 0; r < R; ++r) {
        double acc = 0.0;
        std::size_t hits = 0;
        for (std::size_t s = 0; s < n; ++s)
            if (accepted[r * n + s]) {
                acc += out(3, static_cast<Index>(r * n + s));
                ++hits;
            }
        if (hits == 0) raise(errc::domain, "pressure region does not intersect the lumen");
        double mean = acc / static_cast<double>(hits);
        require(std::isfinite(mean), errc::numeric, "pressure loss diverged");
        double diff = mean - p_mean;
        loss += diff * diff / static_cast<double>(R);
        if (grad) {
            double a = 2.0 * weight * diff / (static_cast<double>(R) * hits);
            for (std::size_t s = 0; s < n; ++s)
                if (accepted[r * n + s]) dout(3, static_cast<Index>(r * n + s)) = a;
        }
    }
    if (grad) f.values_backward(cache, dout, *grad);
    return weight * loss;
}

/// No-slip loss: mean squared velocity magnitude over wall and near-wall
/// band points.
inline double loss_boundary(const NeuralField& f, const std::vector<SpacetimePoint>& pts,
                            double weight = 1.0, Eigen::VectorXd* grad = nullptr) {
    require(!pts.empty(), errc::config, "boundary batch is empty");
    const std::size_t B = pts.size();
    Mlp::Cache cache;
    MatrixXd out;
    f.values(pts, cache, out);
    double loss = 0.0;
    MatrixXd dout;
    if (grad) dout = MatrixXd::Zero(4, out.cols());
    for (std::size_t b = 0; b < B; ++b) {
        Vec3 vel = out.col(static_cast<Index>(b)).head<3>();
        if (!vel.allFinite())
            raise(errc::numeric, "boundary loss diverged at " + format_point(pts[b].x, pts[b].t));
        loss += vel.squaredNorm() / static_cast<double>(B);
        if (grad)
            dout.col(static_cast<Index>(b)).head<3>() =
                (2.0 * weight / static_cast<double>(B)) * vel;
    }
    if (grad) f.values_backward(cache, dout, *grad);
    return weight * loss;
}

namespace detail {

/// Kernel inputs as tape leaves plus the leaf ids needed to route residual
/// adjoints back into a derivative-bundle adjoint.
struct TapedBundle {
    KernelInput<Var> in;
    std::array<std::int32_t, 3> u, ut, gp;
    std::array<std::array<std::int32_t, 3>, 3> gu;
    std::array<std::array<std::int32_t, 6>, 3> hu;
};

inline TapedBundle lift_bundle(const DerivativeBundle& b, Tape& tape) {
    TapedBundle t;
    for (int i = 0; i < 3; ++i) {
        t.in.u[i] = Var(b.value[i], &tape);
        t.u[i] = t.in.u[i].index();
        t.in.ut[i] = Var(b.jacobian(i, 3), &tape);
        t.ut[i] = t.in.ut[i].index();
        t.in.gp[i] = Var(b.jacobian(3, i), &tape);
        t.gp[i] = t.in.gp[i].index();
        for (int j = 0; j < 3; ++j) {
            t.in.gu[i][j] = Var(b.jacobian(i, j), &tape);
            t.gu[i][j] = t.in.gu[i][j].index();
        }
        for (int j = 0; j < 3; ++j)
            for (int k = j; k < 3; ++k) {
                t.in.hu[i][pack3(j, k)] = Var(b.second_deriv(i, j, k), &tape);
                t.hu[i][pack3(j, k)] = t.in.hu[i][pack3(j, k)].index();
            }
    }
    return t;
}

inline void scatter_adjoint(const TapedBundle& t, const std::vector<double>& adj,
                            DerivativeBundle& out) {
    for (int i = 0; i < 3; ++i) {
        out.value[i] += adj[t.u[i]];
        out.jacobian(i, 3) += adj[t.ut[i]];
        out.jacobian(3, i) += adj[t.gp[i]];
        for (int j = 0; j < 3; ++j) out.jacobian(i, j) += adj[t.gu[i][j]];
        for (int j = 0; j < 3; ++j)
            for (int k = j; k < 3; ++k) out.second[i][jet_pack(j, k)] += adj[t.hu[i][pack3(j, k)]];
    }
}

}  // namespace detail

/// Physics batch summary: unweighted per-channel mean squares (momentum x,
/// y, z and continuity) plus per-point refinement scores
/// (|momentum| + |continuity|).
struct PhysicsBatch {
    std::array<double, 4> mean_square{};
    std::vector<double> scores;

    double weighted(const std::array<double, 4>& lam) const {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += lam[i] * mean_square[i];
        return s;
    }
};

/// Momentum/continuity residual loss over interior collocation points.
/// `combine`+`grad`: accumulate the lambda-weighted parameter gradient in a
/// single reverse sweep. `channel_grads`: additionally accumulate the four
/// unweighted per-channel gradients (used by the balancing updates).
inline PhysicsBatch loss_physics(const NeuralField& f, const RheologyModel& model,
                                 const std::vector<SpacetimePoint>& pts,
                                 const std::array<double, 4>* combine = nullptr,
                                 Eigen::VectorXd* grad = nullptr,
                                 std::array<Eigen::VectorXd, 4>* channel_grads = nullptr) {
    require(!pts.empty(), errc::config, "physics batch is empty");
    const std::size_t B = pts.size();
    const double invB = 1.0 / static_cast<double>(B);

    Mlp::JetCache cache;
    std::vector<DerivativeBundle> bundles;
    f.bundles(pts, cache, bundles);

    PhysicsBatch result;
    result.scores.resize(B);
    const bool want_combined = combine != nullptr && grad != nullptr;
    std::vector<DerivativeBundle> adj_combined;
    std::array<std::vector<DerivativeBundle>, 4> adj_channel;
    if (want_combined) adj_combined.assign(B, {});
    if (channel_grads)
        for (auto& a : adj_channel) a.assign(B, {});

    Tape tape;
    std::vector<double> adjoint;
    std::vector<std::pair<std::int32_t, double>> seeds;
    for (std::size_t p = 0; p < B; ++p) {
        if (!bundles[p].all_finite())
            raise(errc::numeric,
                  "field evaluation diverged at " + format_point(pts[p].x, pts[p].t));
        tape.clear();
        detail::TapedBundle tb = detail::lift_bundle(bundles[p], tape);
        KernelResult<Var> r = momentum_kernel(tb.in, model, {0.0, 0.0, 0.0});
        std::array<double, 4> rv{primal(r.momentum[0]), primal(r.momentum[1]),
                                 primal(r.momentum[2]), primal(r.continuity)};
        std::array<std::int32_t, 4> rid{r.momentum[0].index(), r.momentum[1].index(),
                                        r.momentum[2].index(), r.continuity.index()};
        for (int c = 0; c < 4; ++c) result.mean_square[c] += rv[c] * rv[c] * invB;
        result.scores[p] =
            std::sqrt(rv[0] * rv[0] + rv[1] * rv[1] + rv[2] * rv[2]) + std::abs(rv[3]);

        if (want_combined) {
            seeds.clear();
            for (int c = 0; c < 4; ++c)
                seeds.push_back({rid[c], 2.0 * (*combine)[c] * rv[c] * invB});
            tape.backward(seeds, adjoint);
            detail::scatter_adjoint(tb, adjoint, adj_combined[p]);
        }
        if (channel_grads)
            for (int c = 0; c < 4; ++c) {
                seeds.assign(1, {rid[c], 2.0 * rv[c] * invB});
                tape.backward(seeds, adjoint);
                detail::scatter_adjoint(tb, adjoint, adj_channel[c][p]);
            }
    }

    if (want_combined) f.bundles_backward(cache, adj_combined, *grad);
    if (channel_grads)
        for (int c = 0; c < 4; ++c) {
            if ((*channel_grads)[c].size() != f.net().params().size())
                (*channel_grads)[c] = Eigen::VectorXd::Zero(f.net().params().size());
            f.bundles_backward(cache, adj_channel[c], (*channel_grads)[c]);
        }
    return result;
}

}  // namespace hemo
