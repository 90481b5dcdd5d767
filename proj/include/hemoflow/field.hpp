#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <memory>
#include <sstream>

#include "hemoflow/jet.hpp"

namespace hemo {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

struct SpacetimePoint {
    Vec3 x = Vec3::Zero();
    double t = 0.0;
};

/// Value, first and second input derivatives of the four output channels
/// (u, v, w, p) with respect to the four inputs (x, y, z, t). jacobian(o, i)
/// is d(out_o)/d(in_i); second derivatives are stored packed per output with
/// the same (i,j) packing as Jet2.
struct DerivativeBundle {
    Vec4 value = Vec4::Zero();
    Mat4 jacobian = Mat4::Zero();
    std::array<std::array<double, kJetHess>, 4> second{};

    double second_deriv(int out, int i, int j) const {
        return second[static_cast<std::size_t>(out)]
                     [static_cast<std::size_t>(i <= j ? jet_pack(i, j) : jet_pack(j, i))];
    }

    bool all_finite() const {
        if (!value.allFinite() || !jacobian.allFinite()) return false;
        for (const auto& row : second)
            for (double s : row)
                if (!std::isfinite(s)) return false;
        return true;
    }
};

/// A spacetime field (x, t) -> (u, v, w, p) that can report exact first and
/// second input derivatives. Implemented by closed-form references and by the
/// neural field; everything downstream (residuals, losses, metrics) consumes
/// this interface without knowing which one it got.
class DifferentiableField {
  public:
    virtual ~DifferentiableField() = default;
    virtual Vec4 evaluate(const Vec3& x, double t) const = 0;
    virtual DerivativeBundle derivatives(const Vec3& x, double t) const = 0;
};

inline std::string format_point(const Vec3& x, double t) {
    std::ostringstream os;
    os << "(" << x.x() << ", " << x.y() << ", " << x.z() << ", t=" << t << ")";
    return os.str();
}

/// Derivative evaluation with a divergence guard: any non-finite entry aborts
/// with the offending point in the message.
inline DerivativeBundle evaluate_with_derivatives(const DifferentiableField& f, const Vec3& x,
                                                  double t) {
    DerivativeBundle b = f.derivatives(x, t);
    if (!b.all_finite())
        raise(errc::numeric, "field evaluation diverged at " + format_point(x, t));
    return b;
}

/// Central-difference estimate of the same bundle, built from evaluate() only.
/// Used as the independent cross-check of the analytic derivative paths.
inline DerivativeBundle finite_difference_probe(const DifferentiableField& f, const Vec3& x,
                                                double t, double step) {
    if (!(step > 0.0)) raise(errc::config, "finite difference step must be positive");
    auto at = [&](const Vec4& d) {
        Vec4 y = f.evaluate(x + d.head<3>(), t + d[3]);
        if (!y.allFinite())
            raise(errc::numeric,
                  "field evaluation diverged at " + format_point(x + d.head<3>(), t + d[3]));
        return y;
    };
    DerivativeBundle b;
    b.value = at(Vec4::Zero());
    std::array<Vec4, 4> plus, minus;
    for (int i = 0; i < 4; ++i) {
        Vec4 e = Vec4::Zero();
        e[i] = step;
        plus[i] = at(e);
        minus[i] = at(-e);
        b.jacobian.col(i) = (plus[i] - minus[i]) / (2.0 * step);
    }
    for (int i = 0; i < 4; ++i) {
        Vec4 dii = (plus[i] - 2.0 * b.value + minus[i]) / (step * step);
        for (int o = 0; o < 4; ++o) b.second[o][jet_pack(i, i)] = dii[o];
        for (int j = i + 1; j < 4; ++j) {
            Vec4 ei = Vec4::Zero(), ej = Vec4::Zero();
            ei[i] = step;
            ej[j] = step;
            Vec4 dij = (at(ei + ej) - at(ei - ej) - at(ej - ei) + at(-ei - ej)) /
                       (4.0 * step * step);
            for (int o = 0; o < 4; ++o) b.second[o][jet_pack(i, j)] = dij[o];
        }
    }
    return b;
}

/// Wraps a closed-form functor into a DifferentiableField. F exposes
/// template <class T> std::array<T,4> operator()(const std::array<T,4>& xt),
/// so the same expression serves plain evaluation and jet differentiation.
template <class F>
class AnalyticField final : public DifferentiableField {
  public:
    explicit AnalyticField(F f) : f_(std::move(f)) {}

    Vec4 evaluate(const Vec3& x, double t) const override {
        std::array<double, 4> in{x.x(), x.y(), x.z(), t};
        std::array<double, 4> out = f_(in);
        return Vec4(out[0], out[1], out[2], out[3]);
    }

    DerivativeBundle derivatives(const Vec3& x, double t) const override {
        std::array<Jetd, 4> in;
        for (int i = 0; i < 4; ++i)
            in[i] = Jetd::variable(i < 3 ? x[i] : t, i);
        std::array<Jetd, 4> out = f_(in);
        DerivativeBundle b;
        for (int o = 0; o < 4; ++o) {
            b.value[o] = out[o].v;
            for (int i = 0; i < 4; ++i) b.jacobian(o, i) = out[o].g[i];
            for (int k = 0; k < kJetHess; ++k) b.second[o][k] = out[o].h[k];
        }
        return b;
    }

    const F& functor() const { return f_; }

  private:
    F f_;
};

template <class F>
std::unique_ptr<AnalyticField<F>> make_analytic_field(F f) {
    return std::make_unique<AnalyticField<F>>(std::move(f));
}

}  // namespace hemo
