#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <limits>

#include "hemoflow/losses.hpp"
#include "hemoflow/optimizer.hpp"
#include "hemoflow/refinement.hpp"
#include "hemoflow/sampling.hpp"

namespace hemo {

/// Per-stage loop sizes and optimizer settings. Steps are optimizer updates;
/// an epoch groups steps between validation/refinement events.
struct StageConfig {
    int epochs = 10;
    int steps_per_epoch = 100;
    std::size_t obs_batch = 512;
    std::size_t points_per_voxel = 16;  ///< QMC points per voxel (stage 2 observation)
    std::size_t interior_batch = 4096;
    std::size_t refinement_batch = 2048;  ///< refinement points appended per physics batch
    std::size_t resample = 128;           ///< RAR-G insertions per epoch
    std::size_t boundary_batch = 4096;    ///< wall + band points per step
    std::size_t pressure_batch = 128;     ///< QMC points per pressure region
    double lr = 1e-3;
    int patience = 10;

    void validate() const {
        // epochs = 0 skips the stage entirely (data-only or physics-only runs)
        require(epochs >= 0 && steps_per_epoch >= 1, errc::config,
                "stage needs nonnegative epochs and positive steps");
        require(obs_batch > 0, errc::config, "stage needs a positive observation batch");
        require(lr > 0, errc::config, "learning rate must be positive");
        require(patience >= 1, errc::config, "patience must be at least 1");
    }
};

struct TrainerConfig {
    StageConfig stage1{5, 200, 512, 16, 4096, 2048, 128, 4096, 128, 1e-3, 10};
    StageConfig stage2{15, 200, 512, 16, 4096, 2048, 128, 4096, 128, 1e-3, 5};

    double band_delta = 0.0;  ///< near-wall band thickness; 0 = 1.5 x max voxel edge
    std::size_t pool_interior = 65536;
    std::size_t pool_wall = 16384;
    std::size_t pool_band = 16384;

    double alpha = 0.99;  ///< balancing EMA factor after the cold start
    int update_period = 10;
    std::size_t refine_capacity = 1280;

    double plateau_factor = 0.5;
    double plateau_threshold = 1e-3;
    double lr_min = 1e-6;

    double f_train = 0.90, f_val = 0.05, f_test = 0.05;
    std::uint64_t seed = 1;
    std::string out_dir = "train_out";
    std::vector<PressureRegion> pressure_regions;  ///< empty = whole domain x cycle
};

/// One log record per epoch; serialized as a JSON line.
struct EpochRecord {
    int stage = 0;
    int epoch = 0;
    std::int64_t step = 0;
    std::array<double, kLossComponents> losses{};  // unweighted component values
    LossWeights weights;
    double lr = 0.0;
    double validation = 0.0;
    double elapsed_ms = 0.0;
};

struct TrainResult {
    double best_validation = std::numeric_limits<double>::infinity();
    std::int64_t total_steps = 0;
    std::vector<EpochRecord> log;
    std::string best_checkpoint;
    std::string final_checkpoint;
    bool aborted = false;
    std::string abort_reason;
};

namespace detail {

inline nlohmann::ordered_json record_json(const EpochRecord& r) {
    nlohmann::ordered_json losses, weights;
    for (int i = 0; i < kLossComponents; ++i) {
        losses[kLossComponentNames[i]] = r.losses[i];
        weights[kLossComponentNames[i]] = r.weights.w[i];
    }
    return nlohmann::ordered_json{{"stage", r.stage},   {"epoch", r.epoch},
                                  {"step", r.step},     {"losses", losses},
                                  {"weights", weights}, {"lr", r.lr},
                                  {"validation", r.validation}, {"elapsed_ms", r.elapsed_ms}};
}

/// Draws `count` spacetime points as a contiguous window of the
/// Halton-ordered pool starting at a random offset. The window inherits the
/// pool's low discrepancy, so batch gradients carry far less variance than
/// independent picks; the random start keeps successive steps decorrelated.
/// Times stratify the window across the cycle via a shifted radical inverse.
inline std::vector<SpacetimePoint> draw_batch(const std::vector<Vec3>& pool, std::size_t count,
                                              double t0, double duration, Rng& rng) {
    std::vector<SpacetimePoint> out(count);
    const std::size_t start = rng.below(pool.size());
    const double shift = rng.uniform();
    for (std::size_t i = 0; i < count; ++i) {
        double u = radical_inverse(i, 2) + shift;
        out[i] = {pool[(start + i) % pool.size()], t0 + (u - std::floor(u)) * duration};
    }
    return out;
}

/// Contiguous window of the pre-shuffled split: without-replacement at
/// window granularity, so batches cycle through every observation.
inline std::vector<ObsIndex> draw_obs(const std::vector<ObsIndex>& split, std::size_t count,
                                      Rng& rng) {
    std::vector<ObsIndex> out(count);
    const std::size_t start = rng.below(split.size());
    for (std::size_t i = 0; i < count; ++i) out[i] = split[(start + i) % split.size()];
    return out;
}

}  // namespace detail

/// Runs the two-stage curriculum on `field` in place.
///
/// Stage 1 fits the voxel data as point measurements at voxel centers: only
/// the observation loss, no quadrature and no derivative evaluations, so the
/// network settles near the data before physics turns on. Stage 2 trains the
/// full objective: QMC observation operator, pressure anchor, momentum +
/// continuity residuals over interior and refinement collocation points, and
/// the no-slip term, with gradient-variance balancing (cold start at the
/// first step, EMA updates every `update_period` steps) and greedy residual
/// refinement once per epoch. Validation is the observation loss on the
/// validation split; plateau scheduling and best-checkpoint tracking key off
/// it. On a numerical abort the parameters roll back to the last completed
/// step and a checkpoint is still written.
inline TrainResult train(NeuralField& field, const VoxelDataset& ds, const ImplicitDomain& dom,
                         const RheologyModel& model, const TrainerConfig& cfg) {
    cfg.stage1.validate();
    cfg.stage2.validate();
    model.validate();
    require(cfg.update_period >= 1, errc::config, "update period must be positive");
    std::filesystem::create_directories(cfg.out_dir);

    DatasetSplit split = split_dataset(ds, cfg.f_train, cfg.f_val, cfg.f_test, cfg.seed);
    require(!split.train.empty(), errc::config, "training split is empty");
    require(!split.val.empty(), errc::config, "validation split is empty");

    double delta = cfg.band_delta > 0.0 ? cfg.band_delta : 1.5 * ds.grid.voxel_size.maxCoeff();
    PointSet interior = sample_interior(dom, cfg.pool_interior, mix_seed(cfg.seed, 0x696e74));
    PointSet band = sample_boundary_band(dom, delta, cfg.pool_band, mix_seed(cfg.seed, 0x626e64));
    WallSet wall = sample_wall(dom, cfg.pool_wall, mix_seed(cfg.seed, 0x77616c));

    std::vector<PressureRegion> regions = cfg.pressure_regions;
    if (regions.empty())
        regions.push_back({dom.bounding_box(), ds.grid.t0, ds.grid.t0 + ds.grid.duration()});

    const double t0 = ds.grid.t0;
    const double duration = ds.grid.duration();
    const Eigen::Index n_params = field.net().params().size();

    TrainResult result;
    std::ofstream log_stream(cfg.out_dir + "/training_log.jsonl", std::ios::trunc);
    if (!log_stream) raise(errc::io, "cannot write training log in " + cfg.out_dir);

    InverseDirichlet balance;
    balance.alpha = cfg.alpha;
    balance.update_period = cfg.update_period;
    RefinementSet refined;
    refined.capacity = cfg.refine_capacity;

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_params);
    std::array<Eigen::VectorXd, kLossComponents> comp_grads;
    Eigen::VectorXd theta_good = field.net().params();
    std::int64_t stage2_step = 0;

    auto validate_now = [&](int stage, int epoch) {
        std::uint64_t vseed = mix_seed(cfg.seed, 0x76616c, stage, epoch);
        if (stage == 1) return loss_observation_pointwise(field, ds, split.val);
        return loss_observation(field, dom, ds, split.val, cfg.stage2.points_per_voxel, vseed);
    };

    auto save_best = [&](double val) {
        if (val < result.best_validation) {
            result.best_validation = val;
            result.best_checkpoint = cfg.out_dir + "/checkpoint_best.nf";
            save_checkpoint(field, result.best_checkpoint);
        }
    };

    for (int stage = 1; stage <= 2; ++stage) {
        const StageConfig& sc = stage == 1 ? cfg.stage1 : cfg.stage2;
        // Fresh optimizer and schedule per stage: the stage-2 objective is a
        // different function, so stage-1 moments would mislead it.
        AdamOptimizer adam;
        PlateauScheduler sched;
        sched.lr = sc.lr;
        sched.factor = cfg.plateau_factor;
        sched.patience = sc.patience;
        sched.rel_threshold = cfg.plateau_threshold;
        sched.lr_min = cfg.lr_min;
        adam.lr = sc.lr;

        for (int epoch = 0; epoch < sc.epochs; ++epoch) {
            auto tic = std::chrono::steady_clock::now();
            std::array<double, kLossComponents> epoch_losses{};
            PhysicsBatch last_physics;
            std::vector<SpacetimePoint> last_physics_pts;

            try {
                for (int step = 0; step < sc.steps_per_epoch; ++step) {
                    Rng rng(mix_seed(cfg.seed, 0x737470 + stage, epoch, step));
                    grad.setZero();
                    std::array<double, kLossComponents> values{};

                    if (stage == 1) {
                        auto batch = detail::draw_obs(
                            split.train, std::min(sc.obs_batch, split.train.size()), rng);
                        values[0] = loss_observation_pointwise(field, ds, batch, 1.0, &grad);
                    } else {
                        bool cold = stage2_step == 0;
                        bool rebalance =
                            cold || stage2_step % balance.update_period == 0;

                        auto obs_batch = detail::draw_obs(
                            split.train, std::min(sc.obs_batch, split.train.size()), rng);
                        std::vector<SpacetimePoint> phys =
                            detail::draw_batch(interior.points, sc.interior_batch, t0,
                                               duration, rng);
                        std::size_t extra = std::min(sc.refinement_batch, refined.size());
                        for (std::size_t i = 0; i < extra; ++i)
                            phys.push_back(refined.points[rng.below(refined.size())]);
                        std::vector<SpacetimePoint> bc(sc.boundary_batch);
                        {
                            // Alternate wall and band windows (1:1 enforcement).
                            std::size_t w0 = rng.below(wall.points.size());
                            std::size_t b0 = rng.below(band.points.size());
                            double shift = rng.uniform();
                            for (std::size_t i = 0; i < sc.boundary_batch; ++i) {
                                const Vec3& x =
                                    (i % 2 == 0)
                                        ? wall.points[(w0 + i / 2) % wall.points.size()]
                                        : band.points[(b0 + i / 2) % band.points.size()];
                                double u = radical_inverse(i, 2) + shift;
                                bc[i] = {x, t0 + (u - std::floor(u)) * duration};
                            }
                        }
                        std::uint64_t qseed = mix_seed(cfg.seed, 0x716d63, epoch, step);
                        // The anchor keeps one fixed quadrature for the whole
                        // run: reseeding per step makes its error scale with
                        // the pressure spread itself, and that noise, amplified
                        // by lambda_p, drowns the physics signal on the
                        // pressure head once the axial gradient starts to form.
                        std::uint64_t anchor_seed = mix_seed(cfg.seed, 0x616e6368);

                        if (rebalance) {
                            for (auto& g : comp_grads) {
                                if (g.size() != n_params) g = Eigen::VectorXd::Zero(n_params);
                                g.setZero();
                            }
                            values[0] = loss_observation(field, dom, ds, obs_batch,
                                                         sc.points_per_voxel, qseed, 1.0,
                                                         &comp_grads[0]);
                            values[1] = loss_pressure(field, dom, regions, ds.p_mean,
                                                      sc.pressure_batch, anchor_seed, 1.0,
                                                      &comp_grads[1]);
                            std::array<Eigen::VectorXd, 4> phys_grads;
                            last_physics = loss_physics(field, model, phys, nullptr, nullptr,
                                                        &phys_grads);
                            for (int c = 0; c < 4; ++c) {
                                values[2 + c] = last_physics.mean_square[c];
                                comp_grads[2 + c] = std::move(phys_grads[c]);
                            }
                            values[6] = loss_boundary(field, bc, 1.0, &comp_grads[6]);

                            double saved_alpha = balance.alpha;
                            if (cold) balance.alpha = 0.0;
                            balance.update(comp_grads);
                            balance.alpha = saved_alpha;
                            for (int i = 0; i < kLossComponents; ++i)
                                grad += balance.weights.w[i] * comp_grads[i];
                        } else {
                            values[0] = loss_observation(field, dom, ds, obs_batch,
                                                         sc.points_per_voxel, qseed,
                                                         balance.weights.w[0], &grad);
                            values[0] /= balance.weights.w[0] > 0 ? balance.weights.w[0] : 1.0;
                            values[1] = loss_pressure(field, dom, regions, ds.p_mean,
                                                      sc.pressure_batch, anchor_seed,
                                                      balance.weights.w[1], &grad);
                            values[1] /= balance.weights.w[1] > 0 ? balance.weights.w[1] : 1.0;
                            std::array<double, 4> lam = balance.weights.physics();
                            last_physics = loss_physics(field, model, phys, &lam, &grad);
                            for (int c = 0; c < 4; ++c)
                                values[2 + c] = last_physics.mean_square[c];
                            values[6] = loss_boundary(field, bc, balance.weights.w[6], &grad);
                            values[6] /= balance.weights.w[6] > 0 ? balance.weights.w[6] : 1.0;
                        }
                        last_physics_pts = std::move(phys);
                        ++stage2_step;
                    }

                    for (double v : values)
                        require(std::isfinite(v), errc::numeric, "loss diverged");
                    adam.lr = sched.lr;
                    adam.step(field.net().params(), grad);
                    theta_good = field.net().params();
                    ++result.total_steps;
                    for (int i = 0; i < kLossComponents; ++i)
                        epoch_losses[i] += values[i] / sc.steps_per_epoch;
                }
            } catch (const Error& e) {
                field.net().params() = theta_good;
                save_checkpoint(field, cfg.out_dir + "/checkpoint_last_good.nf");
                result.aborted = true;
                result.abort_reason = e.what();
                result.final_checkpoint = cfg.out_dir + "/checkpoint_last_good.nf";
                return result;
            }

            if (stage == 2 && !last_physics_pts.empty())
                rar_g_refine(refined, last_physics_pts, last_physics.scores, sc.resample);

            double val = validate_now(stage, epoch);
            sched.observe(val);
            save_best(val);

            EpochRecord rec;
            rec.stage = stage;
            rec.epoch = epoch;
            rec.step = result.total_steps;
            rec.losses = epoch_losses;
            rec.weights = balance.weights;
            rec.lr = sched.lr;
            rec.validation = val;
            rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - tic)
                                 .count();
            result.log.push_back(rec);
            log_stream << detail::record_json(rec).dump() << '\n';
        }
    }

    result.final_checkpoint = cfg.out_dir + "/checkpoint_final.nf";
    save_checkpoint(field, result.final_checkpoint);
    if (result.best_checkpoint.empty()) result.best_checkpoint = result.final_checkpoint;
    return result;
}

}  // namespace hemo
