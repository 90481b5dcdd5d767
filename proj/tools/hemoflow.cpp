// Command-line front end: synth | train | eval | vwerp | wk | report.
// Each subcommand wires one pipeline; all numeric behavior lives in the
// headers. Errors exit with the code of their category and print a
// machine-readable record on stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hemoflow/config.hpp"
#include "hemoflow/windkessel.hpp"

namespace fs = std::filesystem;
using namespace hemo;

namespace {

constexpr int kExitUsage = 64;

const char* category_name(errc code) {
    switch (code) {
        case errc::config: return "config";
        case errc::io: return "io";
        case errc::format: return "format";
        case errc::numeric: return "numeric";
        case errc::domain: return "domain";
        case errc::unsupported: return "unsupported";
    }
    return "error";
}

void emit_error_record(int exit_code, const std::string& category,
                       const std::string& message) {
    ConfigJson rec;
    rec["error"] = {{"exit_code", exit_code}, {"category", category}, {"message", message}};
    std::cerr << rec.dump() << "\n";
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
    ExperimentConfig cfg = load_experiment_config(path, sets);
    fs::create_directories(cfg.output_dir);
    write_resolved_config(cfg, cfg.output_dir + "/resolved_config.json");
    return cfg;
}

// ---- synth ----

int run_synth(const std::string& config_path, const std::vector<std::string>& sets) {
    ExperimentConfig cfg = load_config(config_path, sets);
    std::unique_ptr<ImplicitDomain> dom = make_domain(cfg.domain);
    RheologyModel model = make_rheology(cfg.rheology);
    std::unique_ptr<DifferentiableField> field = make_field(cfg.field, cfg.domain, model);

    ConfigJson provenance;
    provenance["generator"] = "synth";
    provenance["field"] = cfg.field.kind;
    provenance["domain"] = cfg.domain.shape;
    provenance["config"] = file_fingerprint(cfg.output_dir + "/resolved_config.json");

    VoxelDataset ds = generate_dataset(*field, *dom, make_grid(cfg.grid),
                                       cfg.grid.samples_per_voxel, cfg.grid.p_mean_samples,
                                       cfg.seed, provenance);
    std::string base = cfg.output_dir + "/dataset";
    write_dataset(ds, base);

    std::size_t lumen = 0;
    for (std::size_t v = 0; v < ds.mask.size(); ++v) lumen += ds.masked_in(v) ? 1 : 0;
    std::cout << "wrote " << base << ".json + " << base << ".bin (" << ds.grid.dims.x()
              << "x" << ds.grid.dims.y() << "x" << ds.grid.dims.z() << " voxels, " << lumen
              << " in lumen, " << ds.grid.phases << " phases)\n";
    return 0;
}

// ---- train ----

int run_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& data_path) {
    ExperimentConfig cfg = load_config(config_path, sets);
    VoxelDataset ds = read_dataset(data_path);
    std::unique_ptr<ImplicitDomain> dom = make_domain(cfg.domain);
    RheologyModel model = make_rheology(cfg.rheology);

    NeuralField field(cfg.network, cfg.scales, cfg.seed);
    TrainResult res = train(field, ds, *dom, model, cfg.training);

    std::cout << "steps " << res.total_steps << ", best validation "
              << fmt(res.best_validation) << "\n"
              << "best checkpoint:  " << res.best_checkpoint << "\n"
              << "final checkpoint: " << res.final_checkpoint << "\n";
    if (res.aborted)
        raise(errc::numeric, "training aborted after rollback: " + res.abort_reason);
    return 0;
}

// ---- eval ----

EvalOptions eval_options(const ExperimentConfig& cfg) {
    EvalOptions opt;
    opt.times = cfg.eval_times();
    opt.interior_points = cfg.eval.interior_points;
    opt.wall_points = cfg.eval.wall_points;
    opt.sections = cfg.eval.sections;
    opt.seed = cfg.seed;
    return opt;
}

int run_eval(const std::string& config_path, const std::vector<std::string>& sets,
             const std::string& checkpoint_path, const std::string& format) {
    ExperimentConfig cfg = load_config(config_path, sets);
    std::unique_ptr<ImplicitDomain> dom = make_domain(cfg.domain);
    RheologyModel model = make_rheology(cfg.rheology);
    std::unique_ptr<DifferentiableField> truth = make_field(cfg.field, cfg.domain, model);
    NeuralField estimate = load_checkpoint(checkpoint_path);

    EvalOptions opt = eval_options(cfg);
    FieldComparison cmp = compare_fields(estimate, *truth, *dom, model, opt);
    EvaluationReport report = build_report(estimate, cmp, opt);
    report.provenance["checkpoint"] = checkpoint_path;
    report.provenance["checkpoint_hash"] = file_fingerprint(checkpoint_path);
    report.provenance["config_hash"] =
        file_fingerprint(cfg.output_dir + "/resolved_config.json");
    report.provenance["reference_field"] = cfg.field.kind;

    std::string path = cfg.output_dir + "/report." + format;
    emit_report(report, path, format);
    std::cout << "velocity R^2        " << fmt(cmp.velocity_r2) << "\n"
              << "pressure rel L2     " << fmt(cmp.pressure_rel_l2) << " (mean-shifted)\n"
              << "wall speed fraction " << fmt(cmp.wall_speed_fraction) << "\n"
              << "pressure drop error " << fmt(cmp.dp_error) << "\n"
              << "wrote " << path << "\n";
    return 0;
}

// ---- vwerp ----

void write_drop_csv(const std::string& path, const PressureDropSeries& series) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), errc::io, "cannot open " + path + " for writing");
    out << "t_s,dp_ba,kinetic_dyn,convective_dyn,viscous_dyn\n";
    for (std::size_t i = 0; i < series.times.size(); ++i)
        out << fmt(series.times[i]) << "," << fmt(series.dp[i]) << ","
            << fmt(series.kinetic[i]) << "," << fmt(series.convective[i]) << ","
            << fmt(series.viscous[i]) << "\n";
    require(out.good(), errc::io, "failed writing " + path);
}

int run_vwerp(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& strategy, const std::string& voxels_path,
              const std::string& checkpoint_path, std::string out_path) {
    ExperimentConfig cfg = load_config(config_path, sets);
    RheologyModel model = make_rheology(cfg.rheology);
    if (out_path.empty()) out_path = cfg.output_dir + "/vwerp.csv";

    bool wants_voxels = strategy == "vWERP_1st" || strategy == "vWERP_2nd";
    bool wants_field = strategy == "PINN" || strategy == "PINN+vWERP_1st" ||
                       strategy == "PINN+vWERP_2nd";
    require(wants_voxels || wants_field, errc::config,
            "unknown strategy '" + strategy +
                "' (known: PINN, vWERP_1st, vWERP_2nd, PINN+vWERP_1st, PINN+vWERP_2nd)");
    require(!wants_voxels || !voxels_path.empty(), errc::config,
            "strategy " + strategy + " needs --voxels");
    require(!wants_field || !checkpoint_path.empty(), errc::config,
            "strategy " + strategy + " needs --checkpoint");

    if (strategy == "PINN") {
        NeuralField estimate = load_checkpoint(checkpoint_path);
        require(cfg.eval.sections.size() >= 2, errc::config,
                "PINN strategy needs inlet and outlet sections");
        PressureDropSeries series;
        series.times = cfg.vwerp_times();
        series.dp = pressure_drop_direct(estimate, cfg.eval.sections[0],
                                         cfg.eval.sections[1], series.times);
        series.kinetic.assign(series.times.size(), 0.0);
        series.convective.assign(series.times.size(), 0.0);
        series.viscous.assign(series.times.size(), 0.0);
        write_drop_csv(out_path, series);
        std::cout << "wrote " << out_path << " (direct pressure drop)\n";
        return 0;
    }

    SimplexMesh mesh = make_vwerp_mesh(cfg.vwerp.mesh, cfg.domain);
    StokesTestField tf = solve_auxiliary_stokes(mesh, cfg.vwerp.outlet, cfg.vwerp.stab_coeff,
                                                cfg.vwerp.rim_blend);
    TimeScheme scheme = make_scheme(cfg.vwerp.scheme);
    if (strategy.size() > 4 && strategy.substr(strategy.size() - 4) == "_1st")
        scheme = TimeScheme::first_order;
    if (strategy.size() > 4 && strategy.substr(strategy.size() - 4) == "_2nd")
        scheme = TimeScheme::second_order;

    SampledVelocityHistory history;
    if (wants_voxels) {
        VoxelDataset ds = read_dataset(voxels_path);
        history = sample_velocity(ds, mesh);
    } else {
        NeuralField estimate = load_checkpoint(checkpoint_path);
        history = sample_velocity(estimate, mesh, cfg.vwerp_times());
    }

    PressureDropSeries series = vwerp_pressure_drop(history, mesh, tf, model, scheme);
    write_drop_csv(out_path, series);
    double peak = 0.0;
    for (double v : series.dp) peak = std::max(peak, std::abs(v));
    std::cout << "wrote " << out_path << " (" << series.times.size() << " intervals, "
              << mesh.tets.size() << " tets, peak |dp| " << fmt(peak) << " Ba";
    if (history.fallback_count > 0)
        std::cout << ", " << history.fallback_count << " vertices clamped to the grid";
    std::cout << ")\n";
    return 0;
}

// ---- wk ----

FlowSeries read_flow_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), errc::io, "cannot open flow series " + path);
    FlowSeries q;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        double t = 0.0, flow = 0.0;
        if (std::sscanf(line.c_str(), "%lf,%lf", &t, &flow) != 2) {
            require(lineno == 1, errc::format,
                    path + ":" + std::to_string(lineno) + ": expected 't,Q' numbers");
            continue;  // header row
        }
        q.times.push_back(t);
        q.flow.push_back(flow);
    }
    return q;
}

int run_wk(int preset, double rp, double rd, double cap, double p0,
           const std::string& flow_path, double dt, const std::string& out_path) {
    WindkesselParams wk;
    if (preset >= 0) {
        auto presets = aortic_outlet_presets();
        require(preset < static_cast<int>(presets.size()), errc::config,
                "windkessel preset index out of range [0,3]");
        wk = presets[static_cast<std::size_t>(preset)];
    } else {
        wk = {rp, rd, cap, p0};
    }
    FlowSeries q = read_flow_csv(flow_path);
    WindkesselResponse res = simulate_windkessel(wk, q, dt);

    std::ofstream out(out_path, std::ios::binary);
    require(out.good(), errc::io, "cannot open " + out_path + " for writing");
    out << "t_s,p_distal,p_outlet\n";
    for (std::size_t i = 0; i < res.times.size(); ++i)
        out << fmt(res.times[i]) << "," << fmt(res.p_distal[i]) << ","
            << fmt(res.p_outlet[i]) << "\n";
    require(out.good(), errc::io, "failed writing " + out_path);
    std::cout << "wrote " << out_path << " (" << res.times.size() << " steps, final p_outlet "
              << fmt(res.p_outlet.back()) << ")\n";
    return 0;
}

// ---- report ----

int run_report(const std::vector<std::string>& inputs, const std::string& out_path,
               const std::string& format) {
    require(!inputs.empty(), errc::config, "report merge needs at least one input");
    EvaluationReport merged;
    merged.provenance["sources"] = ConfigJson::object();
    for (const std::string& path : inputs) {
        EvaluationReport part = read_report(path);
        ConfigJson entry;
        entry["fingerprint"] = file_fingerprint(path);
        entry["provenance"] = part.provenance;
        merged.provenance["sources"][path] = std::move(entry);
        for (ReportRecord& r : part.records) merged.records.push_back(std::move(r));
    }
    emit_report(merged, out_path, format);
    std::cout << "wrote " << out_path << " (" << merged.records.size() << " records from "
              << inputs.size() << " reports)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hemoflow: voxel flow synthesis, neural flow reconstruction, and "
                 "pressure-drop estimation (CGS units)"};
    app.require_subcommand(1);

    std::string config_path, data_path, checkpoint_path, voxels_path, out_path;
    std::string strategy = "vWERP_2nd", format = "json";
    std::vector<std::string> sets, inputs;
    int wk_preset = -1;
    double wk_rp = 1.0, wk_rd = 1.0, wk_c = 1.0, wk_p0 = 0.0, wk_dt = 1e-3;
    std::string wk_flow, wk_out = "windkessel.csv";

    CLI::App* synth = app.add_subcommand("synth", "generate a voxel dataset from an "
                                                  "analytic field");
    synth->add_option("--config", config_path, "experiment config (JSON)")->required();
    synth->add_option("--set", sets, "override config values: dotted.path=value");

    CLI::App* train_cmd = app.add_subcommand("train", "fit the neural flow field to a "
                                                      "voxel dataset");
    train_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    train_cmd->add_option("--data", data_path, "dataset base path or .json/.bin")->required();
    train_cmd->add_option("--set", sets, "override config values: dotted.path=value");

    CLI::App* eval_cmd = app.add_subcommand("eval", "score a checkpoint against the "
                                                    "configured reference field");
    eval_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    eval_cmd->add_option("--checkpoint", checkpoint_path, "trained field checkpoint")
        ->required();
    eval_cmd->add_option("--format", format, "report format: json | csv")
        ->check(CLI::IsMember({"json", "csv"}));
    eval_cmd->add_option("--set", sets, "override config values: dotted.path=value");

    CLI::App* vwerp_cmd = app.add_subcommand("vwerp", "estimate the pressure drop from "
                                                      "voxels or a checkpoint");
    vwerp_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    vwerp_cmd->add_option("--strategy", strategy,
                          "PINN | vWERP_1st | vWERP_2nd | PINN+vWERP_1st | PINN+vWERP_2nd");
    vwerp_cmd->add_option("--voxels", voxels_path, "F4DV dataset (vWERP_* strategies)");
    vwerp_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint (PINN* strategies)");
    vwerp_cmd->add_option("--out", out_path, "output CSV path");
    vwerp_cmd->add_option("--set", sets, "override config values: dotted.path=value");

    CLI::App* wk_cmd = app.add_subcommand("wk", "integrate a 3-element windkessel against "
                                                "a flow series");
    wk_cmd->add_option("--preset", wk_preset, "aortic outlet preset index 0..3");
    wk_cmd->add_option("--rp", wk_rp, "proximal resistance");
    wk_cmd->add_option("--rd", wk_rd, "distal resistance");
    wk_cmd->add_option("--c", wk_c, "capacitance");
    wk_cmd->add_option("--p0", wk_p0, "initial distal pressure");
    wk_cmd->add_option("--flow", wk_flow, "CSV flow series: t,Q per row")->required();
    wk_cmd->add_option("--dt", wk_dt, "RK4 step [s]");
    wk_cmd->add_option("--out", wk_out, "output CSV path");

    CLI::App* report_cmd = app.add_subcommand("report", "merge evaluation reports");
    report_cmd->add_option("--inputs", inputs, "report JSON files")->required();
    report_cmd->add_option("--out", out_path, "merged output path")->required();
    report_cmd->add_option("--format", format, "json | csv")
        ->check(CLI::IsMember({"json", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        emit_error_record(kExitUsage, "usage", e.what());
        std::cerr << app.help();
        return kExitUsage;
    }

    try {
        if (*synth) return run_synth(config_path, sets);
        if (*train_cmd) return run_train(config_path, sets, data_path);
        if (*eval_cmd) return run_eval(config_path, sets, checkpoint_path, format);
        if (*vwerp_cmd)
            return run_vwerp(config_path, sets, strategy, voxels_path, checkpoint_path,
                             out_path);
        if (*wk_cmd) return run_wk(wk_preset, wk_rp, wk_rd, wk_c, wk_p0, wk_flow, wk_dt,
                                   wk_out);
        if (*report_cmd) return run_report(inputs, out_path, format);
    } catch (const hemo::Error& e) {
        emit_error_record(e.exit_code(), category_name(e.code()), e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        emit_error_record(1, "internal", e.what());
        return 1;
    }
    return 0;
}
