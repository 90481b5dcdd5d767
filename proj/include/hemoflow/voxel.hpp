#pragma once

#include <fstream>
#include <json.hpp>
#include <vector>

#include "hemoflow/domain.hpp"
#include "hemoflow/field.hpp"
#include "hemoflow/halton.hpp"
#include "hemoflow/rng.hpp"

namespace hemo {

enum class VoxelMask : std::uint8_t { exterior = 0, lumen = 1, boundary = 2 };

/// Cartesian acquisition grid: dims voxels of size voxel_size (cm), lowest
/// corner at origin, and `phases` frames of length phase_duration (s)
/// starting at t0. Storage order everywhere is x fastest, then y, z, phase.
struct VoxelGrid {
    Eigen::Vector3i dims = Eigen::Vector3i::Zero();
    Vec3 voxel_size = Vec3::Zero();  ///< [cm]
    Vec3 origin = Vec3::Zero();      ///< [cm]
    int phases = 1;
    double phase_duration = 1.0;  ///< [s]
    double t0 = 0.0;              ///< [s]

    void validate() const {
        require(dims.minCoeff() >= 1, errc::config, "grid dims must be positive");
        require(voxel_size.minCoeff() > 0.0, errc::config, "voxel size must be positive");
        require(phases >= 1, errc::config, "grid needs at least one phase");
        require(phase_duration > 0.0, errc::config, "phase duration must be positive");
    }

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
    }
    std::size_t linear(int i, int j, int k) const {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(dims.x()) * (static_cast<std::size_t>(j) +
                                                     static_cast<std::size_t>(dims.y()) * k);
    }
    Eigen::Vector3i unpack(std::size_t linear_index) const {
        int i = static_cast<int>(linear_index % dims.x());
        int j = static_cast<int>((linear_index / dims.x()) % dims.y());
        int k = static_cast<int>(linear_index / (static_cast<std::size_t>(dims.x()) * dims.y()));
        return {i, j, k};
    }
    Vec3 voxel_lo(int i, int j, int k) const {
        return origin + Vec3(i * voxel_size.x(), j * voxel_size.y(), k * voxel_size.z());
    }
    Vec3 voxel_center(int i, int j, int k) const {
        return voxel_lo(i, j, k) + 0.5 * voxel_size;
    }
    double phase_begin(int p) const { return t0 + p * phase_duration; }
    double phase_mid(int p) const { return t0 + (p + 0.5) * phase_duration; }
    double duration() const { return phases * phase_duration; }
};

/// Lumen classification. Wall-straddling voxels (corners on both sides of
/// the surface) become boundary regardless of where the center falls, so
/// partial-volume observations stay masked in; otherwise the center decides
/// lumen vs exterior.
inline std::vector<std::uint8_t> classify_voxels(const VoxelGrid& grid,
                                                 const ImplicitDomain& dom) {
    grid.validate();
    std::vector<std::uint8_t> mask(grid.voxel_count(),
                                   static_cast<std::uint8_t>(VoxelMask::exterior));
    for (int k = 0; k < grid.dims.z(); ++k)
        for (int j = 0; j < grid.dims.y(); ++j)
            for (int i = 0; i < grid.dims.x(); ++i) {
                Vec3 lo = grid.voxel_lo(i, j, k);
                int corners_in = 0;
                for (int c = 0; c < 8; ++c) {
                    Vec3 corner = lo + Vec3((c & 1) * grid.voxel_size.x(),
                                            ((c >> 1) & 1) * grid.voxel_size.y(),
                                            ((c >> 2) & 1) * grid.voxel_size.z());
                    if (dom.inside(corner)) ++corners_in;
                }
                VoxelMask m = VoxelMask::exterior;
                if (corners_in > 0 && corners_in < 8)
                    m = VoxelMask::boundary;
                else if (dom.inside(grid.voxel_center(i, j, k)))
                    m = VoxelMask::lumen;
                mask[grid.linear(i, j, k)] = static_cast<std::uint8_t>(m);
            }
    return mask;
}

/// Spacetime average of velocity over one voxel and one phase window by 4D
/// QMC; points outside the lumen contribute zero velocity, which reproduces
/// partial-volume dimming at wall-cutting voxels. Deterministic in
/// (seed, voxel); phases reuse the same relative sample offsets so a steady
/// field yields bit-identical frames.
inline Vec3 observe_voxel(const DifferentiableField& field, const ImplicitDomain& dom,
                          const VoxelGrid& grid, int i, int j, int k, int phase, std::size_t n,
                          std::uint64_t seed) {
    require(n > 0, errc::config, "observe_voxel needs n > 0");
    require(i >= 0 && i < grid.dims.x() && j >= 0 && j < grid.dims.y() && k >= 0 &&
                k < grid.dims.z() && phase >= 0 && phase < grid.phases,
            errc::domain, "voxel index out of range");
    HaltonSampler sampler(4, mix_seed(seed, grid.linear(i, j, k)), true);
    Vec3 lo = grid.voxel_lo(i, j, k);
    double tb = grid.phase_begin(phase);
    std::array<double, 4> u{};
    Vec3 acc = Vec3::Zero();
    for (std::size_t s = 0; s < n; ++s) {
        sampler.point(s, u.data());
        Vec3 x = lo + Vec3(u[0] * grid.voxel_size.x(), u[1] * grid.voxel_size.y(),
                           u[2] * grid.voxel_size.z());
        if (!dom.inside(x)) continue;
        double t = tb + u[3] * grid.phase_duration;
        Vec4 y = field.evaluate(x, t);
        if (!y.allFinite())
            raise(errc::numeric, "field evaluation diverged at " + format_point(x, t));
        acc += y.head<3>();
    }
    return acc / static_cast<double>(n);
}

/// Axis-aligned spacetime region for local pressure averages.
struct PressureRegion {
    Box3 box;
    double t_begin = 0.0;
    double t_end = 1.0;
};

/// Mean pressure over region intersect lumen (ratio estimator over accepted
/// QMC points). Errors if a region misses the lumen entirely.
inline std::vector<double> observe_pressure(const DifferentiableField& field,
                                            const ImplicitDomain& dom,
                                            const std::vector<PressureRegion>& regions,
                                            std::size_t n, std::uint64_t seed) {
    require(n > 0, errc::config, "observe_pressure needs n > 0");
    std::vector<double> out;
    out.reserve(regions.size());
    for (std::size_t r = 0; r < regions.size(); ++r) {
        const PressureRegion& reg = regions[r];
        require(reg.t_end > reg.t_begin, errc::domain, "pressure region needs t_end > t_begin");
        require((reg.box.hi - reg.box.lo).minCoeff() > 0.0, errc::domain,
                "degenerate pressure region box");
        HaltonSampler sampler(4, mix_seed(seed, 0x707265, r), true);
        std::array<double, 4> u{};
        double acc = 0.0;
        std::size_t hits = 0;
        Vec3 extent = reg.box.hi - reg.box.lo;
        for (std::size_t s = 0; s < n; ++s) {
            sampler.point(s, u.data());
            Vec3 x = reg.box.lo + Vec3(u[0] * extent.x(), u[1] * extent.y(), u[2] * extent.z());
            if (!dom.inside(x)) continue;
            double t = reg.t_begin + u[3] * (reg.t_end - reg.t_begin);
            acc += field.evaluate(x, t)[3];
            ++hits;
        }
        if (hits == 0) raise(errc::domain, "pressure region does not intersect the lumen");
        out.push_back(acc / static_cast<double>(hits));
    }
    return out;
}

/// Synthetic 4D flow dataset: per-phase voxel velocity means (f32, cm/s), a
/// lumen mask, and the global space-time mean pressure that anchors the
/// recoverable pressure level. Provenance records generation metadata.
struct VoxelDataset {
    VoxelGrid grid;
    std::vector<float> velocity;     ///< [phase][z][y][x][component]
    std::vector<std::uint8_t> mask;  ///< [z][y][x]
    double p_mean = 0.0;
    nlohmann::ordered_json provenance = nlohmann::ordered_json::object();

    std::size_t vel_index(int phase, std::size_t voxel_linear) const {
        return 3 * (static_cast<std::size_t>(phase) * grid.voxel_count() + voxel_linear);
    }
    Vec3 velocity_at(int phase, std::size_t voxel_linear) const {
        std::size_t b = vel_index(phase, voxel_linear);
        return {velocity[b], velocity[b + 1], velocity[b + 2]};
    }
    VoxelMask mask_at(std::size_t voxel_linear) const {
        return static_cast<VoxelMask>(mask[voxel_linear]);
    }
    bool masked_in(std::size_t voxel_linear) const {
        return mask[voxel_linear] != static_cast<std::uint8_t>(VoxelMask::exterior);
    }
};

inline VoxelDataset generate_dataset(const DifferentiableField& field, const ImplicitDomain& dom,
                                     const VoxelGrid& grid, std::size_t samples_per_voxel,
                                     std::size_t p_mean_samples, std::uint64_t seed,
                                     nlohmann::ordered_json provenance =
                                         nlohmann::ordered_json::object()) {
    grid.validate();
    VoxelDataset ds;
    ds.grid = grid;
    ds.mask = classify_voxels(grid, dom);
    bool any = false;
    for (std::uint8_t m : ds.mask) any = any || m != 0;
    if (!any) raise(errc::domain, "grid does not overlap the domain; mask is empty");
    ds.velocity.assign(3 * grid.voxel_count() * grid.phases, 0.0f);
    for (int p = 0; p < grid.phases; ++p)
        for (int k = 0; k < grid.dims.z(); ++k)
            for (int j = 0; j < grid.dims.y(); ++j)
                for (int i = 0; i < grid.dims.x(); ++i) {
                    std::size_t v = grid.linear(i, j, k);
                    if (!ds.masked_in(v)) continue;  // exterior voxels stay exact zeros
                    Vec3 mean =
                        observe_voxel(field, dom, grid, i, j, k, p, samples_per_voxel, seed);
                    std::size_t b = ds.vel_index(p, v);
                    ds.velocity[b] = static_cast<float>(mean.x());
                    ds.velocity[b + 1] = static_cast<float>(mean.y());
                    ds.velocity[b + 2] = static_cast<float>(mean.z());
                }
    PressureRegion whole{dom.bounding_box(), grid.t0, grid.t0 + grid.duration()};
    ds.p_mean =
        observe_pressure(field, dom, {whole}, p_mean_samples, mix_seed(seed, 0x6d656e)).front();
    ds.provenance = std::move(provenance);
    ds.provenance["seed"] = seed;
    ds.provenance["samples_per_voxel"] = samples_per_voxel;
    ds.provenance["p_mean_samples"] = p_mean_samples;
    return ds;
}

/// Index of one observation: a (phase, voxel) pair.
struct ObsIndex {
    int phase = 0;
    std::uint32_t voxel = 0;
};

struct DatasetSplit {
    std::vector<ObsIndex> train, val, test;
};

/// Deterministic shuffled split over masked-in voxels across all phases.
/// Val/test sizes are round(N * fraction) with the remainder in train, so
/// 1000 observations at 0.9/0.05/0.05 come out exactly 900/50/50.
inline DatasetSplit split_dataset(const VoxelDataset& ds, double f_train, double f_val,
                                  double f_test, std::uint64_t seed) {
    require(f_train >= 0 && f_val >= 0 && f_test >= 0, errc::config,
            "split fractions must be nonnegative");
    require(std::abs(f_train + f_val + f_test - 1.0) < 1e-9, errc::config,
            "split fractions must sum to 1");
    std::vector<ObsIndex> all;
    for (int p = 0; p < ds.grid.phases; ++p)
        for (std::size_t v = 0; v < ds.grid.voxel_count(); ++v)
            if (ds.masked_in(v)) all.push_back({p, static_cast<std::uint32_t>(v)});
    require(!all.empty(), errc::domain, "dataset mask is empty; nothing to split");
    Rng rng(mix_seed(seed, 0x73706c69));
    rng.shuffle(all);
    std::size_t n = all.size();
    auto count = [n](double f) { return static_cast<std::size_t>(std::floor(n * f + 0.5)); };
    std::size_t n_val = count(f_val);
    std::size_t n_test = count(f_test);
    require(n_val + n_test <= n, errc::config, "split fractions leave no training data");
    DatasetSplit split;
    split.test.assign(all.begin(), all.begin() + n_test);
    split.val.assign(all.begin() + n_test, all.begin() + n_test + n_val);
    split.train.assign(all.begin() + n_test + n_val, all.end());
    return split;
}

// ---- F4DV v1 container ----
// <base>.json carries the header (grid geometry in acquisition units: mm
// voxels, ms phases; origin in cm) and <base>.bin the payload: f32 little
// endian velocities [phase][z][y][x][component] followed by the u8 mask
// [z][y][x]. In-memory values are CGS; conversion happens only here.

namespace detail {
inline std::string dataset_base(const std::string& path) {
    for (const char* ext : {".json", ".bin"}) {
        std::string e(ext);
        if (path.size() > e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0)
            return path.substr(0, path.size() - e.size());
    }
    return path;
}
}  // namespace detail

inline void write_dataset(const VoxelDataset& ds, const std::string& path) {
    ds.grid.validate();
    require(ds.velocity.size() == 3 * ds.grid.voxel_count() * ds.grid.phases, errc::format,
            "velocity block does not match grid dims");
    require(ds.mask.size() == ds.grid.voxel_count(), errc::format,
            "mask block does not match grid dims");
    std::string base = detail::dataset_base(path);
    nlohmann::ordered_json header{
        {"magic", "F4DV"},
        {"version", 1},
        {"dims", {ds.grid.dims.x(), ds.grid.dims.y(), ds.grid.dims.z()}},
        {"voxel_size_mm",
         {ds.grid.voxel_size.x() * 10.0, ds.grid.voxel_size.y() * 10.0,
          ds.grid.voxel_size.z() * 10.0}},
        {"origin_cm", {ds.grid.origin.x(), ds.grid.origin.y(), ds.grid.origin.z()}},
        {"phases", ds.grid.phases},
        {"phase_duration_ms", ds.grid.phase_duration * 1000.0},
        {"t0_s", ds.grid.t0},
        {"velocity_unit", "cm/s"},
        {"pressure_unit", "Ba"},
        {"p_mean", ds.p_mean},
        {"provenance",
         ds.provenance.is_null() ? nlohmann::ordered_json::object() : ds.provenance},
    };
    std::ofstream js(base + ".json", std::ios::binary);
    if (!js) raise(errc::io, "cannot write dataset header: " + base + ".json");
    js << header.dump(2) << '\n';
    js.close();
    if (!js) raise(errc::io, "short write on dataset header: " + base + ".json");
    std::ofstream os(base + ".bin", std::ios::binary);
    if (!os) raise(errc::io, "cannot write dataset payload: " + base + ".bin");
    os.write(reinterpret_cast<const char*>(ds.velocity.data()),
             static_cast<std::streamsize>(sizeof(float) * ds.velocity.size()));
    os.write(reinterpret_cast<const char*>(ds.mask.data()),
             static_cast<std::streamsize>(ds.mask.size()));
    os.close();
    if (!os) raise(errc::io, "short write on dataset payload: " + base + ".bin");
}

inline VoxelDataset read_dataset(const std::string& path) {
    std::string base = detail::dataset_base(path);
    std::ifstream js(base + ".json", std::ios::binary);
    if (!js) raise(errc::io, "cannot read dataset header: " + base + ".json");
    nlohmann::ordered_json header = nlohmann::ordered_json::parse(js, nullptr, false);
    if (header.is_discarded() || header.value("magic", "") != "F4DV")
        raise(errc::format, "not an F4DV dataset: " + base + ".json");
    if (header.value("version", 0) != 1)
        raise(errc::format, "unsupported F4DV version in " + base + ".json");
    VoxelDataset ds;
    try {
        auto dims = header.at("dims");
        ds.grid.dims = {dims.at(0).get<int>(), dims.at(1).get<int>(), dims.at(2).get<int>()};
        auto vs = header.at("voxel_size_mm");
        ds.grid.voxel_size =
            Vec3(vs.at(0).get<double>(), vs.at(1).get<double>(), vs.at(2).get<double>()) / 10.0;
        auto org = header.at("origin_cm");
        ds.grid.origin = Vec3(org.at(0).get<double>(), org.at(1).get<double>(),
                              org.at(2).get<double>());
        ds.grid.phases = header.at("phases").get<int>();
        ds.grid.phase_duration = header.at("phase_duration_ms").get<double>() / 1000.0;
        ds.grid.t0 = header.at("t0_s").get<double>();
        ds.p_mean = header.at("p_mean").get<double>();
        ds.provenance = header.value("provenance", nlohmann::ordered_json::object());
    } catch (const nlohmann::json::exception& e) {
        raise(errc::format, std::string("malformed F4DV header: ") + e.what());
    }
    ds.grid.validate();
    std::ifstream is(base + ".bin", std::ios::binary);
    if (!is) raise(errc::io, "cannot read dataset payload: " + base + ".bin");
    std::size_t nvel = 3 * ds.grid.voxel_count() * ds.grid.phases;
    ds.velocity.resize(nvel);
    ds.mask.resize(ds.grid.voxel_count());
    is.read(reinterpret_cast<char*>(ds.velocity.data()),
            static_cast<std::streamsize>(sizeof(float) * nvel));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(float) * nvel))
        raise(errc::format, "F4DV velocity block truncated: " + base + ".bin");
    is.read(reinterpret_cast<char*>(ds.mask.data()),
            static_cast<std::streamsize>(ds.mask.size()));
    if (is.gcount() != static_cast<std::streamsize>(ds.mask.size()))
        raise(errc::format, "F4DV mask block truncated: " + base + ".bin");
    char extra;
    if (is.read(&extra, 1))
        raise(errc::format, "F4DV payload has trailing bytes: " + base + ".bin");
    for (std::uint8_t m : ds.mask)
        if (m > 2) raise(errc::format, "F4DV mask holds values outside {0,1,2}: " + base + ".bin");
    return ds;
}

}  // namespace hemo
