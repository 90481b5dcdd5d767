#pragma once

#include <array>
#include <cstdint>

#include "hemoflow/errors.hpp"
#include "hemoflow/rng.hpp"

namespace hemo {

/// Bases of the first four Halton dimensions; dimension count is capped at 4
/// (space + time is all this project integrates over).
inline constexpr std::array<std::uint32_t, 4> kHaltonBases{2, 3, 5, 7};
inline constexpr int kMaxQmcDim = 4;

/// Plain van der Corput radical inverse of `index` in `base`.
inline double radical_inverse(std::uint64_t index, std::uint32_t base) {
    double inv = 1.0 / base;
    double scale = inv;
    double value = 0.0;
    while (index > 0) {
        value += static_cast<double>(index % base) * scale;
        index /= base;
        scale *= inv;
    }
    return value;
}

/// Owen-scrambled radical inverse. Each digit is remapped by a random
/// permutation keyed on the scramble seed, the base and the preceding digit
/// path (nested scrambling), so low-discrepancy structure is preserved while
/// estimates become unbiased over seeds. Digits beyond the index length are
/// scrambled too, down to 53 bits of resolution.
inline double owen_radical_inverse(std::uint64_t index, std::uint32_t base, std::uint64_t seed) {
    int depth;
    switch (base) {
        case 2: depth = 53; break;
        case 3: depth = 34; break;
        case 5: depth = 23; break;
        case 7: depth = 19; break;
        default: depth = 53;
    }
    double inv = 1.0 / base;
    double scale = inv;
    double value = 0.0;
    // node key evolves down the digit path; children of distinct prefixes get
    // independent permutations
    std::uint64_t node = mix_seed(seed, base, 0x6f4a7c15u);
    std::array<std::uint32_t, 8> perm{};
    for (int k = 0; k < depth; ++k) {
        std::uint32_t digit = static_cast<std::uint32_t>(index % base);
        index /= base;
        std::uint32_t scrambled;
        if (base == 2) {
            scrambled = digit ^ static_cast<std::uint32_t>(node & 1);
        } else {
            Rng rng(node);
            for (std::uint32_t i = 0; i < base; ++i) perm[i] = i;
            for (std::uint32_t i = base; i > 1; --i) {
                std::uint32_t j = static_cast<std::uint32_t>(rng.below(i));
                std::swap(perm[i - 1], perm[j]);
            }
            scrambled = perm[digit];
        }
        value += static_cast<double>(scrambled) * scale;
        scale *= inv;
        std::uint64_t child = node ^ (0x9e3779b97f4a7c15ull * (digit + 1));
        node = splitmix64(child);
    }
    return value < 1.0 ? value : 0x1.fffffffffffffp-1;
}

/// Deterministic low-discrepancy point source. Unscrambled mode is the raw
/// Halton sequence; scrambled mode applies per-dimension Owen scrambling
/// derived from (seed, dimension). Point 0 maps to sequence index 1 so the
/// unscrambled stream never emits the origin.
struct HaltonSampler {
    int dim = 4;
    std::uint64_t seed = 0;
    bool scrambled = true;

    HaltonSampler() = default;
    HaltonSampler(int d, std::uint64_t s, bool scr = true) : dim(d), seed(s), scrambled(scr) {
        require(d >= 1 && d <= kMaxQmcDim, errc::config,
                "HaltonSampler dimension must be in [1,4]");
    }

    void point(std::uint64_t i, double* out) const {
        std::uint64_t index = i + 1;
        for (int d = 0; d < dim; ++d) {
            out[d] = scrambled
                         ? owen_radical_inverse(index, kHaltonBases[d], mix_seed(seed, 0x51ab, d))
                         : radical_inverse(index, kHaltonBases[d]);
        }
    }
};

/// Axis-aligned integration region in up to four dimensions.
struct Region {
    int dim = 0;
    std::array<double, 4> lo{};
    std::array<double, 4> hi{};

    double volume() const {
        double v = 1.0;
        for (int d = 0; d < dim; ++d) v *= hi[d] - lo[d];
        return v;
    }
};

inline void validate_region(const Region& r) {
    require(r.dim >= 1 && r.dim <= kMaxQmcDim, errc::domain, "region dimension must be in [1,4]");
    for (int d = 0; d < r.dim; ++d)
        require(r.hi[d] > r.lo[d], errc::domain, "degenerate integration region (hi <= lo)");
}

/// QMC estimate of the integral of f over the region: volume times the sample
/// mean over n mapped Halton points. Deterministic for fixed (seed, n).
template <class F>
double qmc_integrate(F&& f, const Region& region, std::size_t n, std::uint64_t seed,
                     bool scrambled = true) {
    validate_region(region);
    require(n > 0, errc::config, "qmc_integrate needs at least one point");
    HaltonSampler sampler(region.dim, seed, scrambled);
    double acc = 0.0;
    std::array<double, 4> u{}, x{};
    for (std::size_t i = 0; i < n; ++i) {
        sampler.point(i, u.data());
        for (int d = 0; d < region.dim; ++d)
            x[d] = region.lo[d] + (region.hi[d] - region.lo[d]) * u[d];
        acc += f(x.data());
    }
    return region.volume() * acc / static_cast<double>(n);
}

}  // namespace hemo
