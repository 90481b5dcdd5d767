#pragma once

#include <vector>

#include "hemoflow/domain.hpp"
#include "hemoflow/halton.hpp"

namespace hemo {

/// Interior or band point set together with the proposal count that produced
/// it; acceptance = points.size() / proposals.
struct PointSet {
    std::vector<Vec3> points;
    std::uint64_t proposals = 0;

    double acceptance() const {
        return proposals == 0 ? 0.0 : static_cast<double>(points.size()) / proposals;
    }
};

struct WallSet {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
};

namespace detail {

template <class Accept>
PointSet rejection_sample(const Box3& box, std::size_t n, std::uint64_t seed, Accept&& accept,
                          const char* what) {
    PointSet out;
    out.points.reserve(n);
    HaltonSampler sampler(3, seed, true);
    Vec3 extent = box.hi - box.lo;
    require(extent.minCoeff() > 0.0, errc::domain, "degenerate sampling box");
    std::array<double, 4> u{};
    const std::uint64_t hard_cap = std::max<std::uint64_t>(1000000, 20000ull * n);
    for (std::uint64_t i = 0; out.points.size() < n; ++i) {
        if (i >= 65536 && out.points.empty())
            raise(errc::domain,
                  std::string(what) + ": no acceptable point in " + std::to_string(i) +
                      " proposals (domain misses its sampling box?)");
        if (i >= hard_cap)
            raise(errc::domain,
                  std::string(what) + ": acceptance pathologically low after " +
                      std::to_string(i) + " proposals");
        sampler.point(i, u.data());
        Vec3 x = box.lo + Vec3(u[0] * extent.x(), u[1] * extent.y(), u[2] * extent.z());
        ++out.proposals;
        if (accept(x)) out.points.push_back(x);
    }
    return out;
}

}  // namespace detail

/// n low-discrepancy points with phi < 0, by Owen-scrambled Halton rejection
/// inside the bounding box. Deterministic for fixed (seed, n).
inline PointSet sample_interior(const ImplicitDomain& dom, std::size_t n, std::uint64_t seed) {
    require(n > 0, errc::config, "sample_interior needs n > 0");
    return detail::rejection_sample(
        dom.bounding_box(), n, seed, [&](const Vec3& x) { return dom.inside(x); },
        "interior sampling");
}

/// n points in the wall-proximal band 0 < phi <= delta.
inline PointSet sample_boundary_band(const ImplicitDomain& dom, double delta, std::size_t n,
                                     std::uint64_t seed) {
    require(delta > 0.0, errc::config, "band thickness must be positive");
    require(n > 0, errc::config, "sample_boundary_band needs n > 0");
    return detail::rejection_sample(
        dom.band_box(delta), n, seed, [&](const Vec3& x) { return dom.in_band(x, delta); },
        "boundary band sampling");
}

/// n area-uniform wall points with outward normals via the domain's chart.
inline WallSet sample_wall(const ImplicitDomain& dom, std::size_t n, std::uint64_t seed) {
    require(n > 0, errc::config, "sample_wall needs n > 0");
    WallSet out;
    out.points.reserve(n);
    out.normals.reserve(n);
    HaltonSampler sampler(3, seed, true);
    std::array<double, 4> u{};
    for (std::size_t i = 0; i < n; ++i) {
        sampler.point(i, u.data());
        WallSample s = dom.wall_sample(u[0], u[1], u[2]);
        out.points.push_back(s.x);
        out.normals.push_back(s.n);
    }
    return out;
}

}  // namespace hemo
