#pragma once

#include <complex>
#include <vector>

#include "hemoflow/field.hpp"

namespace hemo {

/// |y|^c computed from s = y^2 (or r^2). Exact at s == 0 for c >= 2, where
/// the direct pow jet would hit a zero base: the true value, gradient and
/// Hessian of |y|^c all vanish for c > 2 and reduce to s itself for c == 2.
inline double abs_pow_from_sq(double s, double c) { return std::pow(s, 0.5 * c); }

template <class T>
Jet2<T> abs_pow_from_sq(const Jet2<T>& s, double c) {
    if (primal(s.v) == 0.0) {
        if (c == 2.0) return s;
        return Jet2<T>{};
    }
    return pow(s, 0.5 * c);
}

struct UniformFlow {
    double u = 0.0, v = 0.0, w = 0.0, p = 0.0;

    template <class T>
    std::array<T, 4> operator()(const std::array<T, 4>&) const {
        return {T(u), T(v), T(w), T(p)};
    }
};

/// Steady power-law flow between parallel plates at y = +-h, flow along +x:
///   u(y) = n/(n+1) (G/m)^{1/n} (h^{(n+1)/n} - |y|^{(n+1)/n}),  p = p0 - G x.
/// G is the (positive) pressure gradient magnitude, m/n the power-law pair.
struct PlanePoiseuille {
    double m = 1.0;
    double n = 1.0;
    double G = 1.0;
    double h = 1.0;
    double p0 = 0.0;

    double max_speed() const {
        double c = (n + 1.0) / n;
        return n / (n + 1.0) * std::pow(G / m, 1.0 / n) * std::pow(h, c);
    }

    double speed(double y) const {
        double c = (n + 1.0) / n;
        return n / (n + 1.0) * std::pow(G / m, 1.0 / n) *
               (std::pow(h, c) - std::pow(std::abs(y), c));
    }

    template <class T>
    std::array<T, 4> operator()(const std::array<T, 4>& xt) const {
        double c = (n + 1.0) / n;
        double k = n / (n + 1.0) * std::pow(G / m, 1.0 / n);
        T u = (std::pow(h, c) - abs_pow_from_sq(xt[1] * xt[1], c)) * k;
        return {u, T{}, T{}, T(p0) - xt[0] * G};
    }
};

/// Steady power-law flow in a circular pipe of radius R, flow along +z:
///   w(r) = n/(n+1) (G/(2m))^{1/n} (R^{(n+1)/n} - r^{(n+1)/n}),  p = p0 - G z.
struct PipePoiseuille {
    double m = 1.0;
    double n = 1.0;
    double G = 1.0;
    double R = 1.0;
    double p0 = 0.0;

    double max_speed() const {
        double c = (n + 1.0) / n;
        return n / (n + 1.0) * std::pow(G / (2.0 * m), 1.0 / n) * std::pow(R, c);
    }

    double speed(double r) const {
        double c = (n + 1.0) / n;
        return n / (n + 1.0) * std::pow(G / (2.0 * m), 1.0 / n) *
               (std::pow(R, c) - std::pow(r, c));
    }

    template <class T>
    std::array<T, 4> operator()(const std::array<T, 4>& xt) const {
        double c = (n + 1.0) / n;
        double k = n / (n + 1.0) * std::pow(G / (2.0 * m), 1.0 / n);
        T s = xt[0] * xt[0] + xt[1] * xt[1];
        T w = (std::pow(R, c) - abs_pow_from_sq(s, c)) * k;
        return {T{}, T{}, w, T(p0) - xt[2] * G};
    }
};

/// Volumetric flow rate of the power-law pipe profile for a drop dp over
/// length L: Q = pi n/(3n+1) (dp/(2 m L))^{1/n} R^{(3n+1)/n}.
inline double pipe_flow_rate(double dp, double L, double R, double m, double n) {
    return M_PI * n / (3.0 * n + 1.0) * std::pow(dp / (2.0 * m * L), 1.0 / n) *
           std::pow(R, (3.0 * n + 1.0) / n);
}

/// Inverse of pipe_flow_rate: dp = 2 m L (Q (3n+1)/(pi n R^3))^n / R.
inline double pipe_pressure_drop(double Q, double L, double R, double m, double n) {
    return 2.0 * m * L / R * std::pow(Q * (3.0 * n + 1.0) / (M_PI * n * R * R * R), n);
}

/// Wall shear stress magnitude of any fully developed pipe flow: dp R/(2 L).
inline double pipe_wall_shear(double dp, double R, double L) { return dp * R / (2.0 * L); }

/// Pulsatile Newtonian pipe flow (axis +z): axial velocity response to the
/// pressure gradient -dp/dz = G0 + sum_k Re[(g_re + i g_im) e^{i k omega t}].
/// Each harmonic's radial profile is the classical Bessel solution; it is
/// expanded here as a convergent polynomial in r^2, so evaluation is smooth
/// on the axis and jets carry exact derivatives. Convective term vanishes
/// identically, which makes this the reference unsteady benchmark.
struct WomersleyPipe {
    struct Harmonic {
        int k = 1;
        double g_re = 0.0;
        double g_im = 0.0;
    };

    double R = 1.0;
    double mu = 0.04;
    double rho = 1.06;
    double omega = 2.0 * M_PI;
    double G0 = 0.0;
    double p0 = 0.0;
    double z0 = 0.0;
    std::vector<Harmonic> harmonics;

    struct Mode {
        double k_omega = 0.0;
        double g_re = 0.0, g_im = 0.0;
        std::vector<double> c_re, c_im;  // polynomial in s = r^2
    };
    std::vector<Mode> modes;

    void prepare() {
        modes.clear();
        for (const Harmonic& h : harmonics) {
            if (h.k <= 0) raise(errc::config, "Womersley harmonic index must be positive");
            std::complex<double> G(h.g_re, h.g_im);
            double Om = h.k * omega;
            std::complex<double> q(0.0, -Om * rho / (4.0 * mu));  // lambda^2 / 4
            std::complex<double> W = G / std::complex<double>(0.0, rho * Om);
            // J0(lambda r) = sum b_m r^{2m}, b_0 = 1, b_{m+1} = -q b_m/(m+1)^2
            std::vector<std::complex<double>> b{1.0};
            double R2 = R * R;
            double scale = 1.0;
            for (int m2 = 1; m2 <= 80; ++m2) {
                std::complex<double> next = -b.back() * q / double(m2 * m2);
                b.push_back(next);
                double term = std::abs(next) * std::pow(R2, m2);
                scale = std::max(scale, term);
                if (m2 > 4 && term < 1e-18 * scale) break;
            }
            std::complex<double> J(0.0);
            for (std::size_t m2 = b.size(); m2-- > 0;) J = J * R2 + b[m2];
            Mode mode;
            mode.k_omega = Om;
            mode.g_re = h.g_re;
            mode.g_im = h.g_im;
            mode.c_re.resize(b.size());
            mode.c_im.resize(b.size());
            for (std::size_t m2 = 0; m2 < b.size(); ++m2) {
                std::complex<double> c = -W * b[m2] / J;
                if (m2 == 0) c += W;
                mode.c_re[m2] = c.real();
                mode.c_im[m2] = c.imag();
            }
            modes.push_back(std::move(mode));
        }
    }

    /// Pressure gradient magnitude -dp/dz at time t.
    double gradient(double t) const {
        double g = G0;
        for (const Mode& m2 : modes)
            g += m2.g_re * std::cos(m2.k_omega * t) - m2.g_im * std::sin(m2.k_omega * t);
        return g;
    }

    template <class T>
    static T horner(const std::vector<double>& c, const T& s) {
        T acc = T(c.back());
        for (std::size_t i = c.size() - 1; i-- > 0;) acc = acc * s + c[i];
        return acc;
    }

    template <class T>
    std::array<T, 4> operator()(const std::array<T, 4>& xt) const {
        using std::cos;
        using std::sin;
        T s = xt[0] * xt[0] + xt[1] * xt[1];
        T w = (T(R * R) - s) * (G0 / (4.0 * mu));
        T g = T(G0);
        for (const Mode& m2 : modes) {
            T theta = xt[3] * m2.k_omega;
            T ct = cos(theta), st = sin(theta);
            w += horner(m2.c_re, s) * ct - horner(m2.c_im, s) * st;
            g += ct * m2.g_re - st * m2.g_im;
        }
        T p = T(p0) - g * (xt[2] - z0);
        return {T{}, T{}, w, p};
    }
};

inline WomersleyPipe make_womersley(double R, double mu, double rho, double omega, double G0,
                                    std::vector<WomersleyPipe::Harmonic> hs, double p0 = 0.0,
                                    double z0 = 0.0) {
    WomersleyPipe w;
    w.R = R;
    w.mu = mu;
    w.rho = rho;
    w.omega = omega;
    w.G0 = G0;
    w.p0 = p0;
    w.z0 = z0;
    w.harmonics = std::move(hs);
    w.prepare();
    return w;
}

/// Divergence-free unsteady field with a known non-zero momentum residual;
/// used with manufactured sources: u = (sin(y) cos(t), 0, 0), p = cos(x).
struct ManufacturedUnsteady {
    template <class T>
    std::array<T, 4> operator()(const std::array<T, 4>& xt) const {
        using std::cos;
        using std::sin;
        return {sin(xt[1]) * cos(xt[3]), T{}, T{}, cos(xt[0])};
    }
};

}  // namespace hemo
