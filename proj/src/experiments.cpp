#include "sgl/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "sgl/csv.hpp"
#include "sgl/density.hpp"
#include "sgl/errors.hpp"
#include "sgl/objectives.hpp"
#include "sgl/svg.hpp"
#include "sgl/theory.hpp"
#include "sgl/training.hpp"

namespace sgl {

namespace {

namespace fs = std::filesystem;

CsvTable trajectory_table(const std::vector<TrainRecord>& records) {
    CsvTable t;
    t.header = {"epoch", "tau", "dsm_loss", "sm_loss", "kl", "rkhs_norm"};
    for (const auto& r : records) {
        t.rows.push_back({static_cast<double>(r.epoch), r.tau, r.dsm_loss, r.sm_loss, r.kl,
                          r.rkhs_norm});
    }
    return t;
}

struct RunTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

// Run one closure per item with at most `workers` threads.
void parallel_for(int n_items, int workers, const std::function<void(int)>& body) {
    if (workers <= 1 || n_items <= 1) {
        for (int i = 0; i < n_items; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(n_items);
    for (int w = 0; w < std::min(workers, n_items); ++w) {
        pool.emplace_back([&, w]() {
            for (int i = w; i < n_items; i += workers) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

std::vector<std::uint64_t> replicate_seeds(const RunContext& ctx, int count) {
    std::vector<std::uint64_t> seeds(count);
    for (int i = 0; i < count; ++i) seeds[i] = derive_stream(ctx.master_seed, i);
    return seeds;
}

TrainSeeds seeds_for_run(std::uint64_t run_seed) {
    return TrainSeeds{derive_stream(run_seed, 101), derive_stream(run_seed, 202),
                      derive_stream(run_seed, 303)};
}

}  // namespace

int run_kl_dynamics(const RunContext& ctx) {
    RunTimer timer;
    fs::create_directories(ctx.out_dir);
    const LinearSde sde = sde_from_config(ctx.cfg);
    const GaussianMixture gm = target_from_config(ctx.cfg);
    TrainConfig tc = train_config_from(ctx.cfg);
    const int n_seeds = static_cast<int>(ctx.cfg.get_int("experiment", "replicates", 3));
    const int window = static_cast<int>(ctx.cfg.get_int("detect", "smoothing_window", 25));
    const int patience = static_cast<int>(ctx.cfg.get_int("detect", "patience", 10));

    RunManifest manifest;
    manifest.config_text = ctx.cfg.serialize();
    manifest.master_seed = ctx.master_seed;
    manifest.run_seeds = replicate_seeds(ctx, n_seeds);

    struct Outcome {
        std::vector<TrainRecord> records;
        bool diverged = false;
    };
    std::vector<Outcome> outcomes(n_seeds);

    parallel_for(n_seeds, ctx.workers, [&](int i) {
        TrainConfig run_tc = tc;
        run_tc.seeds = seeds_for_run(manifest.run_seeds[i]);
        const Dataset data = sample_mixture(gm, run_tc.n, run_tc.seeds.data);
        auto model = model_from_config(ctx.cfg, sde, run_tc.seeds.init);
        try {
            TrainTrajectory traj = train(*model, sde, data, run_tc, gm);
            outcomes[i].records = std::move(traj.records);
        } catch (const DivergenceError& err) {
            outcomes[i].records = err.partial;
            outcomes[i].diverged = true;
        }
    });

    bool any_diverged = false;
    for (int i = 0; i < n_seeds; ++i) {
        const std::string csv = ctx.out_dir + "/trajectory_seed" + std::to_string(i) + ".csv";
        write_csv(trajectory_table(outcomes[i].records), csv);
        manifest.add(csv);
        const std::string svg = ctx.out_dir + "/kl_vs_epoch_seed" + std::to_string(i) + ".svg";
        PlotOptions opt;
        opt.title = "KL divergence dynamics (seed " + std::to_string(i) + ")";
        opt.log_y = true;
        emit_plot_from_csv(csv, "epoch", {"kl"}, svg, opt);
        manifest.add(svg);

        if (outcomes[i].diverged) {
            any_diverged = true;
            std::cout << "seed " << i << ": training diverged after "
                      << outcomes[i].records.size() << " evals\n";
            continue;
        }
        std::vector<double> kl;
        for (const auto& r : outcomes[i].records) kl.push_back(r.kl);
        if (static_cast<int>(kl.size()) > window + patience) {
            const EarlyStopResult es = early_stop_detect(kl, window, patience);
            const int min_epoch = outcomes[i].records[es.min_index].epoch;
            std::cout << "seed " << i << ": early-stop epoch " << min_epoch
                      << (es.turning_point ? "" : " (no turning point)") << ", smoothed KL "
                      << format_number(smooth_series(kl, window)[es.min_index]) << "\n";
        }
    }

    manifest.wall_clock_sec = timer.seconds();
    manifest.write(ctx.out_dir);
    return any_diverged ? kExitDivergence : kExitOk;
}

int run_modes_shift(const RunContext& ctx) {
    RunTimer timer;
    fs::create_directories(ctx.out_dir);
    const LinearSde sde = sde_from_config(ctx.cfg);
    TrainConfig tc = train_config_from(ctx.cfg);
    std::vector<double> mu_list = ctx.cfg.get_array("target", "mu_list", {3.0, 15.0});
    if (mu_list.empty()) throw ConfigError("modes-shift needs a non-empty target.mu_list");
    std::vector<double> snap_epochs = ctx.cfg.get_array("experiment", "snapshot_epochs",
                                                        {100.0, 1000.0, 1900.0});

    RunManifest manifest;
    manifest.config_text = ctx.cfg.serialize();
    manifest.master_seed = ctx.master_seed;
    manifest.run_seeds = replicate_seeds(ctx, static_cast<int>(mu_list.size()));

    struct ModeOutcome {
        std::vector<TrainRecord> records;
        std::vector<std::pair<int, DensityGrid>> snapshots;
        double best_kl = std::numeric_limits<double>::infinity();
        int best_epoch = 0;
        TwoModeFit best_fit;
        bool diverged = false;
    };
    std::vector<ModeOutcome> outcomes(mu_list.size());

    parallel_for(static_cast<int>(mu_list.size()), ctx.workers, [&](int i) {
        const GaussianMixture gm = target_with_mu(mu_list[i]);
        TrainConfig run_tc = tc;
        // Identical budgets across mu: same seeds, epochs, optimizer.
        run_tc.seeds = seeds_for_run(derive_stream(ctx.master_seed, 7));
        const Dataset data = sample_mixture(gm, run_tc.n, run_tc.seeds.data);
        auto model = model_from_config(ctx.cfg, sde, run_tc.seeds.init);
        const Grid grid = gm.standard_grid(run_tc.grid_points);
        auto& out = outcomes[i];

        auto on_eval = [&](int epoch, const ScoreModel& mdl) {
            const Eigen::VectorXd sv = mdl.values_1d(grid.points(), sde.t_min());
            if (!sv.allFinite()) return;
            DensityGrid q;
            try {
                q = density_from_values(sv, grid);
            } catch (const NumericalError&) {
                return;
            }
            const double kl = kl_quadrature(density_on_grid(gm, grid), q);
            if (std::isfinite(kl) && kl < out.best_kl) {
                out.best_kl = kl;
                out.best_epoch = epoch;
                out.best_fit = fit_two_modes(q.x, q.p);
            }
            for (double se : snap_epochs) {
                if (epoch == static_cast<int>(se)) out.snapshots.emplace_back(epoch, q);
            }
        };
        try {
            TrainTrajectory traj = train(*model, sde, data, run_tc, gm, on_eval);
            out.records = std::move(traj.records);
        } catch (const DivergenceError& err) {
            out.records = err.partial;
            out.diverged = true;
        }
    });

    CsvTable summary;
    summary.header = {"mu", "best_kl", "best_epoch", "dominant_weight", "mean_neg", "mean_pos",
                      "diverged"};
    bool any_diverged = false;
    for (std::size_t i = 0; i < mu_list.size(); ++i) {
        const auto& out = outcomes[i];
        any_diverged = any_diverged || out.diverged;
        const std::string tag = "mu" + format_number(mu_list[i]);
        const std::string csv = ctx.out_dir + "/trajectory_" + tag + ".csv";
        write_csv(trajectory_table(out.records), csv);
        manifest.add(csv);
        for (const auto& [epoch, q] : out.snapshots) {
            CsvTable dt;
            dt.header = {"x", "p"};
            for (Eigen::Index j = 0; j < q.x.size(); ++j) dt.rows.push_back({q.x[j], q.p[j]});
            const std::string dpath =
                ctx.out_dir + "/density_" + tag + "_epoch" + std::to_string(epoch) + ".csv";
            write_csv(dt, dpath);
            manifest.add(dpath);
            PlotOptions opt;
            opt.title = "model density, " + tag + ", epoch " + std::to_string(epoch);
            const std::string dsvg =
                ctx.out_dir + "/density_" + tag + "_epoch" + std::to_string(epoch) + ".svg";
            emit_plot_from_csv(dpath, "x", {"p"}, dsvg, opt);
            manifest.add(dsvg);
        }
        summary.rows.push_back({mu_list[i], out.best_kl, static_cast<double>(out.best_epoch),
                                out.best_fit.dominant_weight(), out.best_fit.mean_neg,
                                out.best_fit.mean_pos, out.diverged ? 1.0 : 0.0});
        std::cout << "mu=" << mu_list[i] << ": best KL " << format_number(out.best_kl)
                  << " at epoch " << out.best_epoch << ", dominant mode weight "
                  << format_number(out.best_fit.dominant_weight())
                  << (out.diverged ? " (diverged)" : "") << "\n";
    }
    const std::string sumpath = ctx.out_dir + "/summary.csv";
    write_csv(summary, sumpath);
    manifest.add(sumpath);

    manifest.wall_clock_sec = timer.seconds();
    manifest.write(ctx.out_dir);
    return any_diverged ? kExitDivergence : kExitOk;
}

int run_capacity_sweep(const RunContext& ctx) {
    RunTimer timer;
    fs::create_directories(ctx.out_dir);
    const LinearSde sde = sde_from_config(ctx.cfg);
    const GaussianMixture gm = target_from_config(ctx.cfg);
    TrainConfig tc = train_config_from(ctx.cfg);
    std::vector<double> m_list = ctx.cfg.get_array("capacity", "m_list",
                                                   {2.0, 8.0, 32.0, 128.0, 512.0});
    const double criterion = ctx.cfg.get_double("capacity", "kl_criterion", 0.1);
    const int max_epochs = static_cast<int>(ctx.cfg.get_int("capacity", "max_epochs", 10000));
    const int checkpoint = static_cast<int>(ctx.cfg.get_int("capacity", "epoch_checkpoint", 1000));

    RunManifest manifest;
    manifest.config_text = ctx.cfg.serialize();
    manifest.master_seed = ctx.master_seed;
    manifest.run_seeds = replicate_seeds(ctx, static_cast<int>(m_list.size()));

    struct CapOutcome {
        double kl_at_checkpoint = std::numeric_limits<double>::quiet_NaN();
        int first_met = -1;
        std::vector<TrainRecord> records;
        bool diverged = false;
    };
    std::vector<CapOutcome> outcomes(m_list.size());

    parallel_for(static_cast<int>(m_list.size()), ctx.workers, [&](int i) {
        TrainConfig run_tc = tc;
        run_tc.epochs = max_epochs;
        // Identical data/noise budget per width; only capacity varies.
        run_tc.seeds = seeds_for_run(derive_stream(ctx.master_seed, 11));
        ConfigFile model_cfg = ctx.cfg;
        model_cfg.set("model", "hidden", ConfigValue{m_list[i]});
        model_cfg.set("model", "width", ConfigValue{m_list[i]});
        const Dataset data = sample_mixture(gm, run_tc.n, run_tc.seeds.data);
        auto model = model_from_config(model_cfg, sde, run_tc.seeds.init);
        auto& out = outcomes[i];
        run_tc.stop_kl_threshold = criterion;
        run_tc.stop_min_epoch = checkpoint;
        try {
            TrainTrajectory traj = train(*model, sde, data, run_tc, gm);
            out.records = std::move(traj.records);
        } catch (const DivergenceError& err) {
            out.records = err.partial;
            out.diverged = true;
        }
        for (const auto& r : out.records) {
            if (r.epoch == checkpoint) out.kl_at_checkpoint = r.kl;
            if (out.first_met < 0 && r.kl <= criterion) out.first_met = r.epoch;
        }
    });

    CsvTable summary;
    summary.header = {"m", "kl_at_checkpoint", "first_epoch_meeting_criterion", "generalizes",
                      "diverged"};
    for (std::size_t i = 0; i < m_list.size(); ++i) {
        const auto& out = outcomes[i];
        summary.rows.push_back({m_list[i], out.kl_at_checkpoint,
                                static_cast<double>(out.first_met),
                                out.first_met >= 0 ? 1.0 : 0.0, out.diverged ? 1.0 : 0.0});
        std::cout << "m=" << m_list[i] << ": KL@" << checkpoint << " = "
                  << format_number(out.kl_at_checkpoint) << ", criterion "
                  << (out.first_met >= 0 ? "met at epoch " + std::to_string(out.first_met)
                                         : "NOT met (max epoch reached)")
                  << "\n";
        const std::string csv =
            ctx.out_dir + "/trajectory_m" + format_number(m_list[i]) + ".csv";
        write_csv(trajectory_table(out.records), csv);
        manifest.add(csv);
    }
    const std::string sumpath = ctx.out_dir + "/summary.csv";
    write_csv(summary, sumpath);
    manifest.add(sumpath);
    PlotOptions opt;
    opt.title = "KL at epoch " + std::to_string(checkpoint) + " vs width";
    opt.log_x = true;
    opt.log_y = true;
    const std::string svg = ctx.out_dir + "/capacity.svg";
    emit_plot_from_csv(sumpath, "m", {"kl_at_checkpoint"}, svg, opt);
    manifest.add(svg);

    manifest.wall_clock_sec = timer.seconds();
    manifest.write(ctx.out_dir);
    bool any_diverged = false;
    for (const auto& out : outcomes) any_diverged = any_diverged || out.diverged;
    return any_diverged ? kExitDivergence : kExitOk;
}

int run_bounds(const RunContext& ctx) {
    RunTimer timer;
    fs::create_directories(ctx.out_dir);
    BoundConstants consts;
    consts.c1 = ctx.cfg.get_double("bounds", "c1", 1.0);
    consts.c2 = ctx.cfg.get_double("bounds", "c2", 1.0);
    consts.c3 = ctx.cfg.get_double("bounds", "c3", 1.0);
    consts.c4 = ctx.cfg.get_double("bounds", "c4", 1.0);
    consts.c5 = ctx.cfg.get_double("bounds", "c5", 1.0);
    consts.irreducible_loss = ctx.cfg.get_double("bounds", "irreducible_loss", 0.0);
    consts.poly_mu_degree = static_cast<int>(ctx.cfg.get_int("bounds", "poly_mu_degree", 6));
    const double prior_gap = ctx.cfg.get_double("bounds", "prior_gap", 0.0);
    const std::vector<double> n_list =
        ctx.cfg.get_array("bounds", "n_list", {1e2, 1e3, 1e4, 1e5});
    const std::vector<double> mu_list = ctx.cfg.get_array("bounds", "mu_list", {1.0});

    RunManifest manifest;
    manifest.config_text = ctx.cfg.serialize();
    manifest.master_seed = ctx.master_seed;

    CsvTable table;
    table.header = {"tau", "m",   "n",          "mu",        "stat",  "disc",
                    "opt", "approx", "irreducible", "prior_gap", "total", "tau_es"};
    for (double n : n_list) {
        const double m = n;
        const double tes = tau_es(n);
        for (double mu : mu_list) {
            for (double tau : {1.0, tes, 2.0 * tes, 4.0 * tes}) {
                const BoundReport rep = mu == 1.0 ? thm1_bound(tau, m, n, consts, prior_gap)
                                                  : thm2_bound(tau, m, n, mu, consts, prior_gap);
                table.rows.push_back({tau, m, n, mu, rep.stat, rep.disc, rep.opt, rep.approx,
                                      rep.irreducible, rep.prior_gap, rep.total(), tes});
            }
        }
    }
    const std::string path = ctx.out_dir + "/bound_reports.csv";
    write_csv(table, path);
    manifest.add(path);

    CsvTable scaling;
    scaling.header = {"n", "tau_es", "optimal_tau", "scaled_total"};
    for (double n : n_list) {
        const OptimalTau opt = optimal_tau(n, n, consts, prior_gap);
        const double total = thm1_bound(tau_es(n), n, n, consts, prior_gap).total();
        scaling.rows.push_back({n, tau_es(n), opt.tau, total * std::pow(n, 0.4)});
        std::cout << "n=" << n << ": tau_es " << format_number(tau_es(n)) << ", optimal tau "
                  << format_number(opt.tau) << (opt.at_boundary ? " (boundary)" : "")
                  << ", bound(tau_es) * n^{2/5} = " << format_number(total * std::pow(n, 0.4))
                  << "\n";
    }
    const std::string spath = ctx.out_dir + "/bounds_scaling.csv";
    write_csv(scaling, spath);
    manifest.add(spath);
    PlotOptions opt;
    opt.log_x = true;
    opt.title = "optimal tau vs n (m = n)";
    const std::string svg = ctx.out_dir + "/optimal_tau.svg";
    emit_plot_from_csv(spath, "n", {"tau_es", "optimal_tau"}, svg, opt);
    manifest.add(svg);

    manifest.wall_clock_sec = timer.seconds();
    manifest.write(ctx.out_dir);
    return kExitOk;
}

int run_mc_gap(const RunContext& ctx) {
    RunTimer timer;
    fs::create_directories(ctx.out_dir);
    const LinearSde sde = sde_from_config(ctx.cfg);
    const GaussianMixture gm = target_from_config(ctx.cfg);
    std::vector<double> m_dbl =
        ctx.cfg.get_array("mcgap", "m_list", {16, 32, 64, 128, 256, 512, 1024});
    std::vector<int> m_list(m_dbl.begin(), m_dbl.end());
    const int m_ref = static_cast<int>(ctx.cfg.get_int("mcgap", "m_ref", 16384));
    const int n_mc = static_cast<int>(ctx.cfg.get_int("mcgap", "n_mc", 32768));
    const std::uint64_t feature_seed =
        static_cast<std::uint64_t>(ctx.cfg.get_int("mcgap", "feature_seed", 7));

    RunManifest manifest;
    manifest.config_text = ctx.cfg.serialize();
    manifest.master_seed = ctx.master_seed;

    Rng rng(derive_stream(ctx.master_seed, 5));
    const auto points = mc_gap_estimate(feature_seed, sde, gm, m_list, m_ref, n_mc, rng);

    CsvTable table;
    table.header = {"m", "gap", "stderr"};
    std::vector<double> ms, gaps;
    for (const auto& p : points) {
        table.rows.push_back({static_cast<double>(p.m), p.gap, p.stderr_});
        ms.push_back(p.m);
        gaps.push_back(p.gap);
    }
    const std::string path = ctx.out_dir + "/mc_gap.csv";
    write_csv(table, path);
    manifest.add(path);
    const double slope = loglog_slope(ms, gaps);
    std::cout << "Monte-Carlo gap log-log slope vs m: " << format_number(slope) << "\n";

    PlotOptions opt;
    opt.log_x = true;
    opt.log_y = true;
    opt.title = "Monte-Carlo gap vs width";
    const std::string svg = ctx.out_dir + "/mc_gap.svg";
    emit_plot_from_csv(path, "m", {"gap"}, svg, opt);
    manifest.add(svg);

    manifest.wall_clock_sec = timer.seconds();
    manifest.write(ctx.out_dir);
    return kExitOk;
}

int run_verify(const RunContext& ctx) {
    RunTimer timer;
    fs::create_directories(ctx.out_dir);
    RunManifest manifest;
    manifest.config_text = ctx.cfg.serialize();
    manifest.master_seed = ctx.master_seed;

    const auto results = run_all_properties(ctx.master_seed, ctx.out_dir);
    CsvTable table;
    table.header = {"index", "measured", "bound", "pass"};
    bool all_pass = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        all_pass = all_pass && r.pass;
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": measured "
                  << format_number(r.measured) << ", bound " << format_number(r.bound)
                  << (r.note.empty() ? "" : " (" + r.note + ")") << "\n";
        table.rows.push_back({static_cast<double>(i), r.measured, r.bound, r.pass ? 1.0 : 0.0});
    }
    std::cout << (all_pass ? "verify: all " : "verify: FAILURES among ") << results.size()
              << " properties\n";
    const std::string path = ctx.out_dir + "/verify_report.csv";
    write_csv(table, path);
    manifest.add(path);
    std::ofstream names(ctx.out_dir + "/verify_names.txt");
    for (const auto& r : results) names << r.name << "\n";
    names.close();
    manifest.add(ctx.out_dir + "/verify_names.txt");

    manifest.wall_clock_sec = timer.seconds();
    manifest.write(ctx.out_dir);
    return all_pass ? kExitOk : kExitPropertyFailure;
}

int run_experiment(const std::string& kind, const RunContext& ctx) {
    if (kind == "kl-dynamics") return run_kl_dynamics(ctx);
    if (kind == "modes-shift") return run_modes_shift(ctx);
    if (kind == "capacity-sweep") return run_capacity_sweep(ctx);
    if (kind == "bounds") return run_bounds(ctx);
    if (kind == "mc-gap") return run_mc_gap(ctx);
    if (kind == "verify") return run_verify(ctx);
    throw ConfigError("unknown experiment kind: " + kind);
}

}  // namespace sgl
