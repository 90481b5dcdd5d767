#pragma once

#include <cmath>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemoflow/analytic_fields.hpp"
#include "hemoflow/domain.hpp"
#include "hemoflow/evaluation.hpp"
#include "hemoflow/mesh.hpp"
#include "hemoflow/neural_field.hpp"
#include "hemoflow/trainer.hpp"

namespace hemo {

using ConfigJson = nlohmann::ordered_json;

namespace config_detail {

inline void require_object(const ConfigJson& j, const std::string& path) {
    require(j.is_object(), errc::config, "config node '" + path + "' must be an object");
}

/// Strict schema walk: any key outside the allowed set is an error naming the
/// full dotted path, so typos never silently fall back to defaults.
inline void check_keys(const ConfigJson& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    require_object(j, path);
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed) known = known || item.key() == k;
        if (known) continue;
        std::string list;
        for (const char* k : allowed) {
            if (!list.empty()) list += ", ";
            list += k;
        }
        raise(errc::config, "unknown config key '" +
                                (path.empty() ? item.key() : path + "." + item.key()) +
                                "' (allowed: " + list + ")");
    }
}

inline Vec3 vec3_at(const ConfigJson& j, const std::string& path) {
    require(j.is_array() && j.size() == 3, errc::config,
            "'" + path + "' must be an array of 3 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Eigen::Vector3i vec3i_at(const ConfigJson& j, const std::string& path) {
    require(j.is_array() && j.size() == 3, errc::config,
            "'" + path + "' must be an array of 3 integers");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

inline ConfigJson vec3_json(const Vec3& v) { return ConfigJson::array({v.x(), v.y(), v.z()}); }

}  // namespace config_detail

// ---- domain ----

struct DomainSpec {
    std::string shape = "pipe";  ///< pipe | channel | curved_tube
    double radius = 0.5;         ///< pipe / curved tube lumen [cm]
    double length = 2.0;         ///< pipe / channel [cm]
    double half_gap = 0.1;       ///< channel [cm]
    double span = 1.0;           ///< channel [cm]
    double bend_radius = 1.0;    ///< curved tube centerline [cm]
    double angle = M_PI / 2.0;   ///< curved tube sweep [rad]
};

inline DomainSpec parse_domain(const ConfigJson& j) {
    DomainSpec d;
    config_detail::require_object(j, "domain");
    d.shape = j.value("shape", d.shape);
    if (d.shape == "pipe") {
        config_detail::check_keys(j, "domain", {"shape", "radius", "length"});
        d.radius = j.value("radius", d.radius);
        d.length = j.value("length", d.length);
    } else if (d.shape == "channel") {
        config_detail::check_keys(j, "domain", {"shape", "half_gap", "length", "span"});
        d.half_gap = j.value("half_gap", d.half_gap);
        d.length = j.value("length", d.length);
        d.span = j.value("span", d.span);
    } else if (d.shape == "curved_tube") {
        config_detail::check_keys(j, "domain", {"shape", "bend_radius", "radius", "angle"});
        d.bend_radius = j.value("bend_radius", d.bend_radius);
        d.radius = j.value("radius", d.radius);
        d.angle = j.value("angle", d.angle);
    } else {
        raise(errc::config, "unknown domain.shape '" + d.shape +
                                "' (known: pipe, channel, curved_tube)");
    }
    return d;
}

inline ConfigJson domain_json(const DomainSpec& d) {
    ConfigJson j;
    j["shape"] = d.shape;
    if (d.shape == "pipe") {
        j["radius"] = d.radius;
        j["length"] = d.length;
    } else if (d.shape == "channel") {
        j["half_gap"] = d.half_gap;
        j["length"] = d.length;
        j["span"] = d.span;
    } else {
        j["bend_radius"] = d.bend_radius;
        j["radius"] = d.radius;
        j["angle"] = d.angle;
    }
    return j;
}

inline std::unique_ptr<ImplicitDomain> make_domain(const DomainSpec& d) {
    if (d.shape == "pipe") return std::make_unique<CircularPipe>(d.radius, d.length);
    if (d.shape == "channel")
        return std::make_unique<SlabChannel>(d.half_gap, d.length, d.span);
    return std::make_unique<CurvedTube>(d.bend_radius, d.radius, d.angle);
}

// ---- rheology ----

struct RheologySpec {
    bool by_hematocrit = true;
    double hematocrit = 45.0;  ///< percent, must match a fitted level
    RheologyModel model{};     ///< used when by_hematocrit is false
};

inline RheologySpec parse_rheology(const ConfigJson& j) {
    RheologySpec r;
    config_detail::require_object(j, "rheology");
    if (j.contains("hematocrit")) {
        config_detail::check_keys(j, "rheology", {"hematocrit"});
        r.hematocrit = j["hematocrit"].get<double>();
        return r;
    }
    config_detail::check_keys(j, "rheology", {"m", "n", "density", "gamma_min"});
    r.by_hematocrit = false;
    require(j.contains("m") && j.contains("n"), errc::config,
            "explicit rheology needs both 'm' and 'n'");
    r.model.m = j["m"].get<double>();
    r.model.n = j["n"].get<double>();
    r.model.density = j.value("density", r.model.density);
    r.model.gamma_min = j.value("gamma_min", r.model.gamma_min);
    return r;
}

inline ConfigJson rheology_json(const RheologySpec& r) {
    ConfigJson j;
    if (r.by_hematocrit) {
        j["hematocrit"] = r.hematocrit;
    } else {
        j["m"] = r.model.m;
        j["n"] = r.model.n;
        j["density"] = r.model.density;
        j["gamma_min"] = r.model.gamma_min;
    }
    return j;
}

inline RheologyModel make_rheology(const RheologySpec& r) {
    if (r.by_hematocrit) return rheology_for_hematocrit(r.hematocrit);
    RheologyModel m = r.model;
    m.validate();
    return m;
}

// ---- ground-truth field ----

struct FieldSpec {
    std::string kind = "pipe_poiseuille";
    double u = 0.0, v = 0.0, w = 0.0, p = 0.0;  ///< uniform
    double pressure_gradient = 10.0;            ///< poiseuille kinds [Ba/cm]
    double p0 = 0.0;                            ///< reference pressure [Ba]
    double mean_gradient = 10.0;                ///< womersley steady part [Ba/cm]
    double omega = 2.0 * M_PI;                  ///< womersley base frequency [rad/s]
    std::vector<WomersleyPipe::Harmonic> harmonics;
};

inline FieldSpec parse_field(const ConfigJson& j) {
    FieldSpec f;
    config_detail::require_object(j, "field");
    f.kind = j.value("kind", f.kind);
    if (f.kind == "uniform") {
        config_detail::check_keys(j, "field", {"kind", "u", "v", "w", "p"});
        f.u = j.value("u", 0.0);
        f.v = j.value("v", 0.0);
        f.w = j.value("w", 0.0);
        f.p = j.value("p", 0.0);
    } else if (f.kind == "plane_poiseuille" || f.kind == "pipe_poiseuille") {
        config_detail::check_keys(j, "field", {"kind", "pressure_gradient", "p0"});
        f.pressure_gradient = j.value("pressure_gradient", f.pressure_gradient);
        f.p0 = j.value("p0", f.p0);
    } else if (f.kind == "womersley") {
        config_detail::check_keys(j, "field",
                                  {"kind", "mean_gradient", "omega", "p0", "harmonics"});
        f.mean_gradient = j.value("mean_gradient", f.mean_gradient);
        f.omega = j.value("omega", f.omega);
        f.p0 = j.value("p0", f.p0);
        if (j.contains("harmonics")) {
            const ConfigJson& hs = j["harmonics"];
            require(hs.is_array(), errc::config, "field.harmonics must be an array");
            for (std::size_t i = 0; i < hs.size(); ++i) {
                std::string path = "field.harmonics[" + std::to_string(i) + "]";
                config_detail::check_keys(hs[i], path, {"k", "g_re", "g_im"});
                f.harmonics.push_back({hs[i].value("k", 1), hs[i].value("g_re", 0.0),
                                       hs[i].value("g_im", 0.0)});
            }
        }
    } else if (f.kind == "manufactured") {
        config_detail::check_keys(j, "field", {"kind"});
    } else {
        raise(errc::config,
              "unknown field.kind '" + f.kind +
                  "' (known: uniform, plane_poiseuille, pipe_poiseuille, womersley, "
                  "manufactured)");
    }
    return f;
}

inline ConfigJson field_json(const FieldSpec& f) {
    ConfigJson j;
    j["kind"] = f.kind;
    if (f.kind == "uniform") {
        j["u"] = f.u;
        j["v"] = f.v;
        j["w"] = f.w;
        j["p"] = f.p;
    } else if (f.kind == "plane_poiseuille" || f.kind == "pipe_poiseuille") {
        j["pressure_gradient"] = f.pressure_gradient;
        j["p0"] = f.p0;
    } else if (f.kind == "womersley") {
        j["mean_gradient"] = f.mean_gradient;
        j["omega"] = f.omega;
        j["p0"] = f.p0;
        j["harmonics"] = ConfigJson::array();
        for (const auto& h : f.harmonics)
            j["harmonics"].push_back({{"k", h.k}, {"g_re", h.g_re}, {"g_im", h.g_im}});
    }
    return j;
}

/// Instantiates the analytic ground truth. Geometry parameters come from the
/// domain spec so the flow always fits the lumen; the womersley kind needs a
/// Newtonian rheology (n = 1) because its harmonics are Newtonian solutions.
inline std::unique_ptr<DifferentiableField> make_field(const FieldSpec& f, const DomainSpec& d,
                                                       const RheologyModel& model) {
    if (f.kind == "uniform")
        return std::make_unique<AnalyticField<UniformFlow>>(UniformFlow{f.u, f.v, f.w, f.p});
    if (f.kind == "plane_poiseuille") {
        require(d.shape == "channel", errc::config,
                "plane_poiseuille ground truth needs domain.shape = channel");
        return std::make_unique<AnalyticField<PlanePoiseuille>>(
            PlanePoiseuille{model.m, model.n, f.pressure_gradient, d.half_gap, f.p0});
    }
    if (f.kind == "pipe_poiseuille") {
        require(d.shape == "pipe", errc::config,
                "pipe_poiseuille ground truth needs domain.shape = pipe");
        return std::make_unique<AnalyticField<PipePoiseuille>>(
            PipePoiseuille{model.m, model.n, f.pressure_gradient, d.radius, f.p0});
    }
    if (f.kind == "womersley") {
        require(d.shape == "pipe", errc::config,
                "womersley ground truth needs domain.shape = pipe");
        require(std::abs(model.n - 1.0) < 1e-12, errc::config,
                "womersley ground truth needs a Newtonian rheology (n = 1)");
        return std::make_unique<AnalyticField<WomersleyPipe>>(
            make_womersley(d.radius, model.m, model.density, f.omega, f.mean_gradient,
                           f.harmonics, f.p0));
    }
    return std::make_unique<AnalyticField<ManufacturedUnsteady>>(ManufacturedUnsteady{});
}

// ---- acquisition grid ----

struct GridSpec {
    Eigen::Vector3i dims{8, 8, 8};
    Vec3 voxel_size{0.15, 0.15, 0.15};  ///< [cm]
    Vec3 origin = Vec3::Zero();         ///< resolved; centered on the domain if absent
    bool auto_origin = true;
    int phases = 1;
    double phase_duration = 0.1;  ///< [s]
    double t0 = 0.0;              ///< [s]
    std::size_t samples_per_voxel = 32;
    std::size_t p_mean_samples = 4096;
};

inline GridSpec parse_grid(const ConfigJson& j) {
    GridSpec g;
    config_detail::check_keys(j, "grid",
                              {"dims", "voxel_size", "origin", "phases", "phase_duration",
                               "t0", "samples_per_voxel", "p_mean_samples"});
    if (j.contains("dims")) g.dims = config_detail::vec3i_at(j["dims"], "grid.dims");
    if (j.contains("voxel_size"))
        g.voxel_size = config_detail::vec3_at(j["voxel_size"], "grid.voxel_size");
    if (j.contains("origin")) {
        g.origin = config_detail::vec3_at(j["origin"], "grid.origin");
        g.auto_origin = false;
    }
    g.phases = j.value("phases", g.phases);
    g.phase_duration = j.value("phase_duration", g.phase_duration);
    g.t0 = j.value("t0", g.t0);
    g.samples_per_voxel = j.value("samples_per_voxel", g.samples_per_voxel);
    g.p_mean_samples = j.value("p_mean_samples", g.p_mean_samples);
    return g;
}

inline ConfigJson grid_json(const GridSpec& g) {
    ConfigJson j;
    j["dims"] = ConfigJson::array({g.dims.x(), g.dims.y(), g.dims.z()});
    j["voxel_size"] = config_detail::vec3_json(g.voxel_size);
    j["origin"] = config_detail::vec3_json(g.origin);
    j["phases"] = g.phases;
    j["phase_duration"] = g.phase_duration;
    j["t0"] = g.t0;
    j["samples_per_voxel"] = g.samples_per_voxel;
    j["p_mean_samples"] = g.p_mean_samples;
    return j;
}

/// Centers an auto-origin grid on the domain's bounding box.
inline void resolve_grid_origin(GridSpec& g, const ImplicitDomain& dom) {
    if (!g.auto_origin) return;
    Box3 box = dom.bounding_box();
    Vec3 extent = g.dims.cast<double>().cwiseProduct(g.voxel_size);
    g.origin = 0.5 * (box.lo + box.hi) - 0.5 * extent;
    g.auto_origin = false;
}

inline VoxelGrid make_grid(const GridSpec& g) {
    VoxelGrid grid{g.dims, g.voxel_size, g.origin, g.phases, g.phase_duration, g.t0};
    grid.validate();
    return grid;
}

// ---- scales / network / training ----

inline ScaleSet parse_scales(const ConfigJson& j) {
    ScaleSet s;
    config_detail::check_keys(
        j, "scales", {"length", "velocity", "pressure", "frequency", "t_min", "shift"});
    s.length = j.value("length", s.length);
    s.velocity = j.value("velocity", s.velocity);
    s.pressure = j.value("pressure", s.pressure);
    s.frequency = j.value("frequency", s.frequency);
    s.t_min = j.value("t_min", s.t_min);
    if (j.contains("shift")) s.shift = config_detail::vec3_at(j["shift"], "scales.shift");
    s.validate();
    return s;
}

inline ConfigJson scales_json(const ScaleSet& s) {
    ConfigJson j;
    j["length"] = s.length;
    j["velocity"] = s.velocity;
    j["pressure"] = s.pressure;
    j["frequency"] = s.frequency;
    j["t_min"] = s.t_min;
    j["shift"] = config_detail::vec3_json(s.shift);
    return j;
}

inline NetworkArchitecture parse_network(const ConfigJson& j) {
    NetworkArchitecture a{4, 64};  // desk-scale default; paper scale is 6 x 256
    config_detail::check_keys(j, "network", {"hidden_layers", "width"});
    a.hidden_layers = j.value("hidden_layers", a.hidden_layers);
    a.width = j.value("width", a.width);
    a.validate();
    return a;
}

inline ConfigJson network_json(const NetworkArchitecture& a) {
    return {{"hidden_layers", a.hidden_layers}, {"width", a.width}};
}

inline StageConfig parse_stage(const ConfigJson& j, const std::string& path,
                               StageConfig stage) {
    config_detail::check_keys(j, path,
                              {"epochs", "steps_per_epoch", "obs_batch", "points_per_voxel",
                               "interior_batch", "refinement_batch", "resample",
                               "boundary_batch", "pressure_batch", "lr", "patience"});
    stage.epochs = j.value("epochs", stage.epochs);
    stage.steps_per_epoch = j.value("steps_per_epoch", stage.steps_per_epoch);
    stage.obs_batch = j.value("obs_batch", stage.obs_batch);
    stage.points_per_voxel = j.value("points_per_voxel", stage.points_per_voxel);
    stage.interior_batch = j.value("interior_batch", stage.interior_batch);
    stage.refinement_batch = j.value("refinement_batch", stage.refinement_batch);
    stage.resample = j.value("resample", stage.resample);
    stage.boundary_batch = j.value("boundary_batch", stage.boundary_batch);
    stage.pressure_batch = j.value("pressure_batch", stage.pressure_batch);
    stage.lr = j.value("lr", stage.lr);
    stage.patience = j.value("patience", stage.patience);
    stage.validate();
    return stage;
}

inline ConfigJson stage_json(const StageConfig& s) {
    ConfigJson j;
    j["epochs"] = s.epochs;
    j["steps_per_epoch"] = s.steps_per_epoch;
    j["obs_batch"] = s.obs_batch;
    j["points_per_voxel"] = s.points_per_voxel;
    j["interior_batch"] = s.interior_batch;
    j["refinement_batch"] = s.refinement_batch;
    j["resample"] = s.resample;
    j["boundary_batch"] = s.boundary_batch;
    j["pressure_batch"] = s.pressure_batch;
    j["lr"] = s.lr;
    j["patience"] = s.patience;
    return j;
}

/// Seed and output directory are injected from the top-level config, so they
/// are not accepted here.
inline TrainerConfig parse_training(const ConfigJson& j) {
    TrainerConfig c;
    config_detail::check_keys(
        j, "training",
        {"stage1", "stage2", "band_delta", "pool_interior", "pool_wall", "pool_band", "alpha",
         "update_period", "refine_capacity", "plateau_factor", "plateau_threshold", "lr_min",
         "f_train", "f_val", "f_test"});
    if (j.contains("stage1")) c.stage1 = parse_stage(j["stage1"], "training.stage1", c.stage1);
    if (j.contains("stage2")) c.stage2 = parse_stage(j["stage2"], "training.stage2", c.stage2);
    c.band_delta = j.value("band_delta", c.band_delta);
    c.pool_interior = j.value("pool_interior", c.pool_interior);
    c.pool_wall = j.value("pool_wall", c.pool_wall);
    c.pool_band = j.value("pool_band", c.pool_band);
    c.alpha = j.value("alpha", c.alpha);
    c.update_period = j.value("update_period", c.update_period);
    c.refine_capacity = j.value("refine_capacity", c.refine_capacity);
    c.plateau_factor = j.value("plateau_factor", c.plateau_factor);
    c.plateau_threshold = j.value("plateau_threshold", c.plateau_threshold);
    c.lr_min = j.value("lr_min", c.lr_min);
    c.f_train = j.value("f_train", c.f_train);
    c.f_val = j.value("f_val", c.f_val);
    c.f_test = j.value("f_test", c.f_test);
    return c;
}

inline ConfigJson training_json(const TrainerConfig& c) {
    ConfigJson j;
    j["stage1"] = stage_json(c.stage1);
    j["stage2"] = stage_json(c.stage2);
    j["band_delta"] = c.band_delta;
    j["pool_interior"] = c.pool_interior;
    j["pool_wall"] = c.pool_wall;
    j["pool_band"] = c.pool_band;
    j["alpha"] = c.alpha;
    j["update_period"] = c.update_period;
    j["refine_capacity"] = c.refine_capacity;
    j["plateau_factor"] = c.plateau_factor;
    j["plateau_threshold"] = c.plateau_threshold;
    j["lr_min"] = c.lr_min;
    j["f_train"] = c.f_train;
    j["f_val"] = c.f_val;
    j["f_test"] = c.f_test;
    return j;
}

// ---- vWERP ----

struct MeshSpec {
    std::string kind = "pipe";  ///< pipe | box | file
    int n_theta = 24, n_radial = 4, n_axial = 10;
    int nx = 8, ny = 4, nz = 8;
    std::string path;
};

struct VwerpSpec {
    MeshSpec mesh;
    int outlet = 1;                 ///< outlet index k (facet tag 1 + k)
    std::string scheme = "second";  ///< first | second
    double stab_coeff = 0.05;
    double rim_blend = 0.4;
    std::vector<double> times;  ///< field sampling times; empty = grid phase mids
};

inline MeshSpec parse_mesh(const ConfigJson& j) {
    MeshSpec m;
    m.kind = j.value("kind", m.kind);
    if (m.kind == "pipe") {
        config_detail::check_keys(j, "vwerp.mesh", {"kind", "n_theta", "n_radial", "n_axial"});
        m.n_theta = j.value("n_theta", m.n_theta);
        m.n_radial = j.value("n_radial", m.n_radial);
        m.n_axial = j.value("n_axial", m.n_axial);
    } else if (m.kind == "box") {
        config_detail::check_keys(j, "vwerp.mesh", {"kind", "nx", "ny", "nz"});
        m.nx = j.value("nx", m.nx);
        m.ny = j.value("ny", m.ny);
        m.nz = j.value("nz", m.nz);
    } else if (m.kind == "file") {
        config_detail::check_keys(j, "vwerp.mesh", {"kind", "path"});
        require(j.contains("path"), errc::config, "vwerp.mesh.kind = file needs a path");
        m.path = j["path"].get<std::string>();
    } else {
        raise(errc::config,
              "unknown vwerp.mesh.kind '" + m.kind + "' (known: pipe, box, file)");
    }
    return m;
}

inline ConfigJson mesh_json(const MeshSpec& m) {
    ConfigJson j;
    j["kind"] = m.kind;
    if (m.kind == "pipe") {
        j["n_theta"] = m.n_theta;
        j["n_radial"] = m.n_radial;
        j["n_axial"] = m.n_axial;
    } else if (m.kind == "box") {
        j["nx"] = m.nx;
        j["ny"] = m.ny;
        j["nz"] = m.nz;
    } else {
        j["path"] = m.path;
    }
    return j;
}

inline VwerpSpec parse_vwerp(const ConfigJson& j) {
    VwerpSpec v;
    config_detail::check_keys(
        j, "vwerp", {"mesh", "outlet", "scheme", "stab_coeff", "rim_blend", "times"});
    if (j.contains("mesh")) v.mesh = parse_mesh(j["mesh"]);
    v.outlet = j.value("outlet", v.outlet);
    v.scheme = j.value("scheme", v.scheme);
    require(v.scheme == "first" || v.scheme == "second", errc::config,
            "vwerp.scheme must be 'first' or 'second'");
    v.stab_coeff = j.value("stab_coeff", v.stab_coeff);
    v.rim_blend = j.value("rim_blend", v.rim_blend);
    v.times = j.value("times", v.times);
    return v;
}

inline ConfigJson vwerp_json(const VwerpSpec& v) {
    ConfigJson j;
    j["mesh"] = mesh_json(v.mesh);
    j["outlet"] = v.outlet;
    j["scheme"] = v.scheme;
    j["stab_coeff"] = v.stab_coeff;
    j["rim_blend"] = v.rim_blend;
    j["times"] = v.times;
    return j;
}

/// Generated meshes take their dimensions from the domain spec so the mesh
/// and the implicit domain always describe the same lumen.
inline SimplexMesh make_vwerp_mesh(const MeshSpec& m, const DomainSpec& d) {
    if (m.kind == "pipe") {
        require(d.shape == "pipe", errc::config,
                "vwerp.mesh.kind = pipe needs domain.shape = pipe");
        return build_pipe_mesh(d.radius, d.length, m.n_theta, m.n_radial, m.n_axial);
    }
    if (m.kind == "box") {
        require(d.shape == "channel", errc::config,
                "vwerp.mesh.kind = box needs domain.shape = channel");
        return build_box_mesh(d.length, d.half_gap, d.span, m.nx, m.ny, m.nz);
    }
    return read_mesh(m.path);
}

inline TimeScheme make_scheme(const std::string& name) {
    return name == "first" ? TimeScheme::first_order : TimeScheme::second_order;
}

// ---- evaluation ----

struct EvalSpec {
    int n_times = 200;
    std::size_t interior_points = 2048;
    std::size_t wall_points = 512;
    double section_inset_voxels = 2.0;  ///< auto section depth, in voxel widths
    std::vector<double> times;          ///< explicit override of the time grid
    std::vector<CrossSection> sections;
    bool auto_sections = true;
};

inline CrossSection parse_section(const ConfigJson& j, const std::string& path) {
    CrossSection sec;
    config_detail::check_keys(j, path,
                              {"name", "origin", "normal", "shape", "radius", "half_u",
                               "half_v", "points", "seed"});
    require(j.contains("name") && j.contains("origin") && j.contains("normal"), errc::config,
            path + " needs name, origin, and normal");
    sec.name = j["name"].get<std::string>();
    sec.origin = config_detail::vec3_at(j["origin"], path + ".origin");
    Vec3 n = config_detail::vec3_at(j["normal"], path + ".normal");
    require(n.norm() > 0.0, errc::config, path + ".normal must be nonzero");
    sec.normal = n.normalized();
    std::string shape = j.value("shape", "disc");
    if (shape == "disc") {
        sec.shape = CrossSection::Shape::disc;
        require(j.contains("radius"), errc::config, path + " disc needs a radius");
        sec.radius = j["radius"].get<double>();
    } else if (shape == "rectangle") {
        sec.shape = CrossSection::Shape::rectangle;
        require(j.contains("half_u") && j.contains("half_v"), errc::config,
                path + " rectangle needs half_u and half_v");
        sec.half_u = j["half_u"].get<double>();
        sec.half_v = j["half_v"].get<double>();
    } else {
        raise(errc::config, path + ".shape must be 'disc' or 'rectangle'");
    }
    sec.points = j.value("points", sec.points);
    sec.seed = j.value("seed", sec.seed);
    sec.validate();
    return sec;
}

inline ConfigJson section_json(const CrossSection& sec) {
    ConfigJson j;
    j["name"] = sec.name;
    j["origin"] = config_detail::vec3_json(sec.origin);
    j["normal"] = config_detail::vec3_json(sec.normal);
    if (sec.shape == CrossSection::Shape::disc) {
        j["shape"] = "disc";
        j["radius"] = sec.radius;
    } else {
        j["shape"] = "rectangle";
        j["half_u"] = sec.half_u;
        j["half_v"] = sec.half_v;
    }
    j["points"] = sec.points;
    j["seed"] = sec.seed;
    return j;
}

inline EvalSpec parse_eval(const ConfigJson& j) {
    EvalSpec e;
    config_detail::check_keys(j, "eval",
                              {"n_times", "interior_points", "wall_points",
                               "section_inset_voxels", "times", "sections"});
    e.n_times = j.value("n_times", e.n_times);
    e.interior_points = j.value("interior_points", e.interior_points);
    e.wall_points = j.value("wall_points", e.wall_points);
    e.section_inset_voxels = j.value("section_inset_voxels", e.section_inset_voxels);
    e.times = j.value("times", e.times);
    if (j.contains("sections")) {
        e.auto_sections = false;
        for (std::size_t i = 0; i < j["sections"].size(); ++i)
            e.sections.push_back(parse_section(
                j["sections"][i], "eval.sections[" + std::to_string(i) + "]"));
    }
    return e;
}

inline ConfigJson eval_json(const EvalSpec& e) {
    ConfigJson j;
    j["n_times"] = e.n_times;
    j["interior_points"] = e.interior_points;
    j["wall_points"] = e.wall_points;
    j["section_inset_voxels"] = e.section_inset_voxels;
    j["times"] = e.times;
    j["sections"] = ConfigJson::array();
    for (const CrossSection& sec : e.sections) j["sections"].push_back(section_json(sec));
    return j;
}

/// Default inlet/outlet sections sit a fixed number of voxel widths inside
/// the ports, clear of partial-volume voxels at the openings.
inline void resolve_sections(EvalSpec& e, const DomainSpec& d, const GridSpec& g) {
    if (!e.auto_sections || !e.sections.empty()) return;
    e.auto_sections = false;
    if (d.shape == "pipe") {
        double inset = e.section_inset_voxels * g.voxel_size.z();
        require(2.0 * inset < d.length, errc::config,
                "auto sections do not fit: pipe shorter than twice the section inset");
        CrossSection in;
        in.name = "inlet";
        in.origin = Vec3(0.0, 0.0, inset);
        in.normal = Vec3::UnitZ();
        in.radius = d.radius;
        in.seed = 0x73656374;
        CrossSection out = in;
        out.name = "outlet0";
        out.origin.z() = d.length - inset;
        out.seed = 0x73656375;
        e.sections = {in, out};
    } else if (d.shape == "channel") {
        double inset = e.section_inset_voxels * g.voxel_size.x();
        require(2.0 * inset < d.length, errc::config,
                "auto sections do not fit: channel shorter than twice the section inset");
        CrossSection in;
        in.name = "inlet";
        in.origin = Vec3(inset, 0.0, d.span / 2.0);
        in.normal = Vec3::UnitX();
        in.shape = CrossSection::Shape::rectangle;
        // frame(): e_u spans -z, e_v spans +y for a +x normal
        in.half_u = d.span / 2.0;
        in.half_v = d.half_gap;
        in.seed = 0x73656374;
        CrossSection out = in;
        out.name = "outlet0";
        out.origin.x() = d.length - inset;
        out.seed = 0x73656375;
        e.sections = {in, out};
    }
    // curved_tube has no default sections; eval requires explicit ones there.
}

// ---- experiment ----

/// Fully resolved experiment description. Parsing applies defaults, rejects
/// unknown keys, and materializes derived values (grid origin, sections), so
/// serializing the result records the exact run configuration.
struct ExperimentConfig {
    std::string output_dir = "out";
    std::uint64_t seed = 1;
    DomainSpec domain;
    RheologySpec rheology;
    FieldSpec field;
    GridSpec grid;
    ScaleSet scales;
    NetworkArchitecture network{4, 64};
    TrainerConfig training;
    VwerpSpec vwerp;
    EvalSpec eval;

    std::vector<double> eval_times() const {
        if (!eval.times.empty()) return eval.times;
        std::vector<double> out;
        int n = std::max(1, eval.n_times);
        double window = grid.phases * grid.phase_duration;
        for (int i = 0; i < n; ++i)
            out.push_back(n == 1 ? grid.t0 + 0.5 * window
                                 : grid.t0 + window * i / double(n - 1));
        return out;
    }

    std::vector<double> vwerp_times() const {
        if (!vwerp.times.empty()) return vwerp.times;
        VoxelGrid g = make_grid(grid);
        std::vector<double> out;
        for (int p = 0; p < g.phases; ++p) out.push_back(g.phase_mid(p));
        return out;
    }
};

inline ExperimentConfig parse_experiment_config(const ConfigJson& j) {
    ExperimentConfig cfg;
    config_detail::check_keys(j, "",
                              {"output_dir", "seed", "domain", "rheology", "field", "grid",
                               "scales", "network", "training", "vwerp", "eval"});
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("domain")) cfg.domain = parse_domain(j["domain"]);
    if (j.contains("rheology")) cfg.rheology = parse_rheology(j["rheology"]);
    if (j.contains("field")) cfg.field = parse_field(j["field"]);
    if (j.contains("grid")) cfg.grid = parse_grid(j["grid"]);
    if (j.contains("scales")) cfg.scales = parse_scales(j["scales"]);
    if (j.contains("network")) cfg.network = parse_network(j["network"]);
    if (j.contains("training")) cfg.training = parse_training(j["training"]);
    if (j.contains("vwerp")) cfg.vwerp = parse_vwerp(j["vwerp"]);
    if (j.contains("eval")) cfg.eval = parse_eval(j["eval"]);

    std::unique_ptr<ImplicitDomain> dom = make_domain(cfg.domain);
    resolve_grid_origin(cfg.grid, *dom);
    make_grid(cfg.grid);  // validates dims/spacing/phases eagerly
    resolve_sections(cfg.eval, cfg.domain, cfg.grid);
    cfg.training.seed = cfg.seed;
    cfg.training.out_dir = cfg.output_dir;
    return cfg;
}

inline ConfigJson experiment_json(const ExperimentConfig& cfg) {
    ConfigJson j;
    j["output_dir"] = cfg.output_dir;
    j["seed"] = cfg.seed;
    j["domain"] = domain_json(cfg.domain);
    j["rheology"] = rheology_json(cfg.rheology);
    j["field"] = field_json(cfg.field);
    j["grid"] = grid_json(cfg.grid);
    j["scales"] = scales_json(cfg.scales);
    j["network"] = network_json(cfg.network);
    j["training"] = training_json(cfg.training);
    j["vwerp"] = vwerp_json(cfg.vwerp);
    j["eval"] = eval_json(cfg.eval);
    return j;
}

// ---- file loading and overrides ----

inline ConfigJson read_config_file(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), errc::io, "cannot open config " + path);
    ConfigJson j = ConfigJson::parse(in, nullptr, false);
    require(!j.is_discarded(), errc::config, "config " + path + " is not valid JSON");
    return j;
}

/// Applies one `dotted.path=value` override. The value is parsed as JSON when
/// possible (numbers, booleans, arrays); anything unparsable stays a string.
inline void apply_override(ConfigJson& root, const std::string& assignment) {
    std::size_t eq = assignment.find('=');
    require(eq != std::string::npos && eq > 0, errc::config,
            "override must look like path.to.key=value, got '" + assignment + "'");
    std::string path = assignment.substr(0, eq);
    ConfigJson value = ConfigJson::parse(assignment.substr(eq + 1), nullptr, false);
    if (value.is_discarded()) value = assignment.substr(eq + 1);

    ConfigJson* node = &root;
    std::size_t begin = 0;
    while (true) {
        std::size_t dot = path.find('.', begin);
        std::string key = path.substr(begin, dot == std::string::npos ? std::string::npos
                                                                      : dot - begin);
        require(!key.empty(), errc::config, "override path has an empty segment: " + path);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        require(node->is_object() || node->is_null(), errc::config,
                "override path crosses a non-object value: " + path);
        begin = dot + 1;
    }
}

inline ExperimentConfig load_experiment_config(const std::string& path,
                                               const std::vector<std::string>& overrides = {}) {
    ConfigJson j = read_config_file(path);
    for (const std::string& o : overrides) apply_override(j, o);
    try {
        return parse_experiment_config(j);
    } catch (const nlohmann::json::exception& e) {
        raise(errc::config, "config " + path + ": " + e.what());
    }
}

/// Every run records the configuration it actually used.
inline void write_resolved_config(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), errc::io, "cannot open " + path + " for writing");
    out << experiment_json(cfg).dump(2) << "\n";
    require(out.good(), errc::io, "failed writing " + path);
}

}  // namespace hemo
