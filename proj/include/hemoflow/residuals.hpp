#pragma once

#include "hemoflow/field.hpp"
#include "hemoflow/rheology.hpp"

namespace hemo {

/// Momentum residual [Ba/cm] per component and continuity residual [1/s] of
/// the incompressible power-law Navier-Stokes equations at one point.
struct ResidualSample {
    Vec3 momentum = Vec3::Zero();
    double continuity = 0.0;
};

/// Packed index of a symmetric 3x3 spatial pair (j <= k).
constexpr int pack3(int j, int k) { return j * (5 - j) / 2 + k; }

/// Field data the residual kernel consumes, generic in the scalar type so the
/// same expression yields plain residuals (T = double) and residual adjoints
/// with respect to every bundle entry (T = reverse-mode Var).
template <class T>
struct KernelInput {
    std::array<T, 3> u{};                    ///< velocity
    std::array<std::array<T, 3>, 3> gu{};    ///< gu[i][j] = du_i/dx_j
    std::array<T, 3> ut{};                   ///< du_i/dt
    std::array<T, 3> gp{};                   ///< dp/dx_i
    std::array<std::array<T, 6>, 3> hu{};    ///< hu[i][pack3(j,k)] = d2u_i/dx_j dx_k
};

template <class T>
struct KernelResult {
    std::array<T, 3> momentum{};
    T continuity{};
};

/// r_i = rho (du_i/dt + u . grad u_i) + dp/dx_i - (div tau)_i - src_i with
/// tau = 2 mu(gamma) eps. The viscous divergence expands exactly into
/// mu (lap u_i + d_i div u) + 2 (dmu/dgamma) sum_j (dgamma/dx_j) eps_ij, with
/// dgamma/dx_j = (2/gamma) sum_kl eps_kl deps_kl/dx_j. Below the shear-rate
/// floor the viscosity is frozen at mu(gamma_min) with zero slope.
template <class T>
KernelResult<T> momentum_kernel(const KernelInput<T>& in, const RheologyModel& model,
                                const std::array<double, 3>& source) {
    using std::pow;
    using std::sqrt;
    std::array<std::array<T, 3>, 3> eps;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) eps[i][j] = (in.gu[i][j] + in.gu[j][i]) * 0.5;

    T gamma2{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) gamma2 += eps[i][j] * eps[i][j];
    gamma2 = gamma2 * 2.0;

    T mu;
    T dmu{};
    std::array<T, 3> dgamma{};
    const double floor2 = model.gamma_min * model.gamma_min;
    if (primal(gamma2) <= floor2) {
        mu = T(model.m * std::pow(model.gamma_min, model.n - 1.0));
    } else {
        T gamma = sqrt(gamma2);
        mu = pow(gamma, model.n - 1.0) * model.m;
        dmu = pow(gamma, model.n - 2.0) * (model.m * (model.n - 1.0));
        for (int j = 0; j < 3; ++j) {
            T acc{};
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    T deps = (in.hu[k][pack3(std::min(l, j), std::max(l, j))] +
                              in.hu[l][pack3(std::min(k, j), std::max(k, j))]) *
                             0.5;
                    acc += eps[k][l] * deps;
                }
            dgamma[j] = acc * 2.0 / gamma;
        }
    }

    T divu = in.gu[0][0] + in.gu[1][1] + in.gu[2][2];

    KernelResult<T> out;
    out.continuity = divu;
    for (int i = 0; i < 3; ++i) {
        T lap = in.hu[i][pack3(0, 0)] + in.hu[i][pack3(1, 1)] + in.hu[i][pack3(2, 2)];
        T ddiv{};
        for (int j = 0; j < 3; ++j)
            ddiv += in.hu[j][pack3(std::min(j, i), std::max(j, i))];
        T divtau = mu * (lap + ddiv);
        for (int j = 0; j < 3; ++j) divtau += dmu * dgamma[j] * eps[i][j] * 2.0;
        T conv{};
        for (int j = 0; j < 3; ++j) conv += in.u[j] * in.gu[i][j];
        out.momentum[i] =
            (in.ut[i] + conv) * model.density + in.gp[i] - divtau - source[i];
    }
    return out;
}

/// Unpacks a derivative bundle into kernel inputs (outputs 0..2 = velocity,
/// 3 = pressure; inputs 0..2 = space, 3 = time).
inline KernelInput<double> kernel_input(const DerivativeBundle& b) {
    KernelInput<double> in;
    for (int i = 0; i < 3; ++i) {
        in.u[i] = b.value[i];
        in.ut[i] = b.jacobian(i, 3);
        in.gp[i] = b.jacobian(3, i);
        for (int j = 0; j < 3; ++j) in.gu[i][j] = b.jacobian(i, j);
        for (int j = 0; j < 3; ++j)
            for (int k = j; k < 3; ++k) in.hu[i][pack3(j, k)] = b.second_deriv(i, j, k);
    }
    return in;
}

inline ResidualSample residual_from_bundle(const DerivativeBundle& b, const RheologyModel& model,
                                           const Vec3& source = Vec3::Zero()) {
    KernelResult<double> r =
        momentum_kernel(kernel_input(b), model, {source.x(), source.y(), source.z()});
    return {Vec3(r.momentum[0], r.momentum[1], r.momentum[2]), r.continuity};
}

/// Momentum and continuity residual of a field at (x, t); aborts on
/// non-finite field output with the offending point in the message.
inline ResidualSample momentum_residual(const DifferentiableField& f, const RheologyModel& model,
                                        const Vec3& x, double t,
                                        const Vec3& source = Vec3::Zero()) {
    return residual_from_bundle(evaluate_with_derivatives(f, x, t), model, source);
}

/// Source term that makes `reference` an exact solution: src(x,t) equals the
/// residual of the reference with zero source, so feeding it back cancels the
/// momentum equations identically.
class ManufacturedSource {
  public:
    ManufacturedSource(const DifferentiableField& reference, RheologyModel model)
        : ref_(&reference), model_(model) {}

    Vec3 operator()(const Vec3& x, double t) const {
        return momentum_residual(*ref_, model_, x, t).momentum;
    }

  private:
    const DifferentiableField* ref_;
    RheologyModel model_;
};

/// Magnitude of the tangential traction (2 mu eps) n - ((2 mu eps) n . n) n
/// at a wall point with outward normal n. [Ba]
inline double wall_shear_stress(const DifferentiableField& f, const RheologyModel& model,
                                const Vec3& x, double t, const Vec3& n) {
    DerivativeBundle b = evaluate_with_derivatives(f, x, t);
    Mat3 gu = b.jacobian.topLeftCorner<3, 3>();
    StrainRate s = strain_rate(gu);
    double mu = apparent_viscosity(model, s.gamma);
    Vec3 traction = 2.0 * mu * (s.eps * n);
    Vec3 tangential = traction - traction.dot(n) * n;
    return tangential.norm();
}

}  // namespace hemo
