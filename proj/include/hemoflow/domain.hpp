#pragma once

#include <memory>
#include <string>
#include <vector>

#include "hemoflow/field.hpp"

namespace hemo {

struct Box3 {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
    double volume() const { return (hi - lo).prod(); }
};

/// Point on the no-slip wall with its outward unit normal.
struct WallSample {
    Vec3 x = Vec3::Zero();
    Vec3 n = Vec3::Zero();
};

/// Flat open boundary (inlet or outlet): a disc or rectangle with an outward
/// normal. Cross sections for flow-rate and pressure metrics are built by
/// shifting these inward.
struct Port {
    std::string name;
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::Zero();  // outward
    bool disc = true;
    double radius = 0.0;           // disc
    Vec3 axis_u = Vec3::Zero();    // rectangle in-plane axes
    Vec3 axis_v = Vec3::Zero();
    double half_u = 0.0, half_v = 0.0;
};

/// Flow geometry described by a signed distance function: phi < 0 inside,
/// phi = 0 on the wall, phi > 0 outside. Walls are the lateral (no-slip)
/// surfaces only; flat openings are reported as ports. The boundary band is
/// the wall-proximal outside shell 0 < phi <= delta, excluding the regions
/// past the openings.
class ImplicitDomain {
  public:
    virtual ~ImplicitDomain() = default;

    virtual double phi(const Vec3& x) const = 0;
    /// Unit outward normal of the level set through x (gradient direction).
    virtual Vec3 normal(const Vec3& x) const = 0;
    virtual Box3 bounding_box() const = 0;
    /// Bounding box enlarged to cover the boundary band of thickness delta.
    virtual Box3 band_box(double delta) const = 0;
    virtual bool in_band(const Vec3& x, double delta) const = 0;
    /// Area-uniform wall point from three uniforms in [0,1).
    virtual WallSample wall_sample(double u0, double u1, double u2) const = 0;
    virtual std::vector<Port> ports() const = 0;

    bool inside(const Vec3& x) const { return phi(x) < 0.0; }
};

/// Channel between no-slip plates at y = +-h, spanning x in [0, Lx] and
/// z in [0, Lz]. phi measures distance to the nearer plate; inlet at x = 0,
/// outlet at x = Lx.
class SlabChannel final : public ImplicitDomain {
  public:
    SlabChannel(double half_gap, double length, double span)
        : h_(half_gap), lx_(length), lz_(span) {
        require(h_ > 0 && lx_ > 0 && lz_ > 0, errc::config, "slab dimensions must be positive");
    }

    double half_gap() const { return h_; }
    double length() const { return lx_; }
    double span() const { return lz_; }

    double phi(const Vec3& x) const override { return std::abs(x.y()) - h_; }

    Vec3 normal(const Vec3& x) const override {
        return Vec3(0.0, x.y() >= 0.0 ? 1.0 : -1.0, 0.0);
    }

    Box3 bounding_box() const override {
        return {Vec3(0.0, -h_, 0.0), Vec3(lx_, h_, lz_)};
    }

    Box3 band_box(double delta) const override {
        return {Vec3(0.0, -h_ - delta, 0.0), Vec3(lx_, h_ + delta, lz_)};
    }

    bool in_band(const Vec3& x, double delta) const override {
        double p = phi(x);
        return p > 0.0 && p <= delta && x.x() >= 0.0 && x.x() <= lx_ && x.z() >= 0.0 &&
               x.z() <= lz_;
    }

    WallSample wall_sample(double u0, double u1, double u2) const override {
        double side = u0 < 0.5 ? -1.0 : 1.0;
        return {Vec3(u1 * lx_, side * h_, u2 * lz_), Vec3(0.0, side, 0.0)};
    }

    std::vector<Port> ports() const override {
        Port in{"inlet", Vec3(0.0, 0.0, lz_ / 2.0), Vec3(-1.0, 0.0, 0.0), false, 0.0,
                Vec3::UnitY(), Vec3::UnitZ(), h_, lz_ / 2.0};
        Port out{"outlet0", Vec3(lx_, 0.0, lz_ / 2.0), Vec3(1.0, 0.0, 0.0), false, 0.0,
                 Vec3::UnitY(), Vec3::UnitZ(), h_, lz_ / 2.0};
        return {in, out};
    }

  private:
    double h_, lx_, lz_;
};

/// Straight circular pipe of radius R along +z, z in [0, L]; inlet at z = 0.
/// phi is the exact signed distance of the capped cylinder.
class CircularPipe final : public ImplicitDomain {
  public:
    CircularPipe(double radius, double length) : R_(radius), L_(length) {
        require(R_ > 0 && L_ > 0, errc::config, "pipe dimensions must be positive");
    }

    double radius() const { return R_; }
    double length() const { return L_; }

    double phi(const Vec3& x) const override {
        double dr = std::hypot(x.x(), x.y()) - R_;
        double dz = std::abs(x.z() - L_ / 2.0) - L_ / 2.0;
        if (dr <= 0.0 && dz <= 0.0) return std::max(dr, dz);
        return std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
    }

    Vec3 normal(const Vec3& x) const override {
        double r = std::hypot(x.x(), x.y());
        double dr = r - R_;
        double zc = x.z() - L_ / 2.0;
        double dz = std::abs(zc) - L_ / 2.0;
        Vec3 radial = r > 1e-300 ? Vec3(x.x() / r, x.y() / r, 0.0) : Vec3(1.0, 0.0, 0.0);
        Vec3 axial(0.0, 0.0, zc >= 0.0 ? 1.0 : -1.0);
        if (dr <= 0.0 && dz <= 0.0) return dr >= dz ? radial : axial;
        Vec3 g = radial * std::max(dr, 0.0) + axial * std::max(dz, 0.0);
        double gn = g.norm();
        return gn > 0.0 ? Vec3(g / gn) : radial;
    }

    Box3 bounding_box() const override {
        return {Vec3(-R_, -R_, 0.0), Vec3(R_, R_, L_)};
    }

    Box3 band_box(double delta) const override {
        return {Vec3(-R_ - delta, -R_ - delta, 0.0), Vec3(R_ + delta, R_ + delta, L_)};
    }

    bool in_band(const Vec3& x, double delta) const override {
        double p = phi(x);
        return p > 0.0 && p <= delta && x.z() > 0.0 && x.z() < L_;
    }

    WallSample wall_sample(double u0, double u1, double) const override {
        double th = 2.0 * M_PI * u0;
        Vec3 n(std::cos(th), std::sin(th), 0.0);
        return {Vec3(R_ * n.x(), R_ * n.y(), u1 * L_), n};
    }

    std::vector<Port> ports() const override {
        Port in{"inlet", Vec3(0.0, 0.0, 0.0), Vec3(0.0, 0.0, -1.0), true, R_};
        Port out{"outlet0", Vec3(0.0, 0.0, L_), Vec3(0.0, 0.0, 1.0), true, R_};
        return {in, out};
    }

  private:
    double R_, L_;
};

/// Curved tube: a torus section of tube radius a around the centerline
/// c(s) = Rc (cos s, sin s, 0), s in [0, theta], theta <= pi. phi is the
/// exact distance to the capped arc capsule, so |grad phi| = 1 everywhere.
class CurvedTube final : public ImplicitDomain {
  public:
    CurvedTube(double bend_radius, double tube_radius, double angle)
        : Rc_(bend_radius), a_(tube_radius), theta_(angle) {
        require(Rc_ > 0 && a_ > 0, errc::config, "tube radii must be positive");
        require(a_ < Rc_, errc::config, "tube radius must be smaller than the bend radius");
        require(theta_ > 0 && theta_ <= M_PI, errc::config,
                "tube arc angle must lie in (0, pi]");
    }

    double bend_radius() const { return Rc_; }
    double tube_radius() const { return a_; }
    double angle() const { return theta_; }

    Vec3 center(double s) const { return Vec3(Rc_ * std::cos(s), Rc_ * std::sin(s), 0.0); }
    Vec3 tangent(double s) const { return Vec3(-std::sin(s), std::cos(s), 0.0); }

    /// Arc parameter of the nearest centerline point, clamped to [0, theta].
    double nearest_param(const Vec3& x) const {
        double ang = std::atan2(x.y(), x.x());
        if (ang >= 0.0 && ang <= theta_) return ang;
        // outside the sector: closer to whichever endpoint
        double d0 = (x - center(0.0)).squaredNorm();
        double d1 = (x - center(theta_)).squaredNorm();
        return d0 <= d1 ? 0.0 : theta_;
    }

    double phi(const Vec3& x) const override {
        double s = nearest_param(x);
        return (x - center(s)).norm() - a_;
    }

    Vec3 normal(const Vec3& x) const override {
        double s = nearest_param(x);
        Vec3 d = x - center(s);
        double dn = d.norm();
        return dn > 1e-300 ? Vec3(d / dn) : Vec3(0.0, 0.0, 1.0);
    }

    Box3 bounding_box() const override {
        double cmin = std::min(1.0, std::cos(theta_));
        double smax = theta_ >= M_PI / 2.0 ? 1.0 : std::sin(theta_);
        return {Vec3(Rc_ * cmin - a_, -a_, -a_), Vec3(Rc_ + a_, Rc_ * smax + a_, a_)};
    }

    Box3 band_box(double delta) const override {
        Box3 b = bounding_box();
        return {b.lo - Vec3::Constant(delta), b.hi + Vec3::Constant(delta)};
    }

    bool in_band(const Vec3& x, double delta) const override {
        double p = phi(x);
        if (!(p > 0.0 && p <= delta)) return false;
        double ang = std::atan2(x.y(), x.x());
        return ang > 0.0 && ang < theta_;  // lateral shell only, not past the caps
    }

    WallSample wall_sample(double u0, double u1, double) const override {
        // area element is a (Rc + a cos psi) ds dpsi; psi drawn by inverting
        // its CDF (Rc psi + a sin psi)/(2 pi Rc), strictly increasing as a < Rc
        double s = u0 * theta_;
        double target = u1 * 2.0 * M_PI * Rc_;
        double psi = u1 * 2.0 * M_PI;
        for (int it = 0; it < 16; ++it) {
            double g = Rc_ * psi + a_ * std::sin(psi) - target;
            psi -= g / (Rc_ + a_ * std::cos(psi));
        }
        Vec3 er(std::cos(s), std::sin(s), 0.0);
        Vec3 n = er * std::cos(psi) + Vec3(0.0, 0.0, 1.0) * std::sin(psi);
        return {center(s) + n * a_, n};
    }

    std::vector<Port> ports() const override {
        Port in{"inlet", center(0.0), -tangent(0.0), true, a_};
        Port out{"outlet0", center(theta_), tangent(theta_), true, a_};
        return {in, out};
    }

  private:
    double Rc_, a_, theta_;
};

}  // namespace hemo
