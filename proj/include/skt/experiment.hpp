#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "skt/config.hpp"
#include "skt/fom.hpp"
#include "skt/io.hpp"
#include "skt/pid.hpp"
#include "skt/pod.hpp"

namespace skt {

inline SpatialGrid make_grid(const ExperimentConfig& c) {
    if (c.dim == 1) return SpatialGrid::line(c.x_min, c.x_max, c.nx);
    return SpatialGrid::rectangle(c.x_min, c.x_max, c.nx, c.y_min, c.y_max, c.ny);
}

/// Initial fields: the coexistence equilibrium with multiplicative noise, or
/// one of the two smooth positive profiles used for the entropy studies.
inline StateVector initial_state(const ExperimentConfig& c, const SpatialGrid& grid) {
    if (c.init_kind == "perturbed") {
        return random_perturbed_initial(grid, c.params, c.amplitude, c.seed);
    }
    const int n = grid.num_nodes();
    StateVector u;
    u.u1.resize(n);
    u.u2.resize(n);
    u.t = 0.0;
    if (c.init_kind == "entropy1d") {
        for (int i = 0; i < n; ++i) {
            const double x = grid.node_x(i);
            u.u1(i) = std::exp(0.5 * std::sin(x));
            u.u2(i) = std::exp(0.5 * std::cos(2.0 * x));
        }
        return u;
    }
    if (c.init_kind == "entropy2d") {
        constexpr double pi = std::numbers::pi;
        for (int i = 0; i < n; ++i) {
            const double x = grid.node_x(i);
            const double y = grid.node_y(i);
            u.u1(i) = 0.5 * std::sin(pi * (x + y)) + 1.0;
            u.u2(i) = 0.5 * std::cos(pi * (x - y)) + 1.0;
        }
        return u;
    }
    throw ConfigError("unknown init.kind: " + c.init_kind);
}

/// One reduction outcome, as reported in the summary table.
struct RomRow {
    double tol_ric = 0.0;
    std::string method;                  // gpod | ppod
    bool fallback = false;               // windowed run without a transition
    int modes_u = 0, modes_v = 0;        // global mode counts
    int modes_i1_u = 0, modes_i1_v = 0;  // first-window mode counts
    int modes_i2_u = 0, modes_i2_v = 0;  // second-window mode counts
    double err_u = std::numeric_limits<double>::quiet_NaN();
    double err_v = std::numeric_limits<double>::quiet_NaN();
    double t_transition = std::numeric_limits<double>::quiet_NaN();
    double interface_residual_u = 0.0;
    double interface_residual_v = 0.0;
    double offline_seconds = 0.0;
    double online_seconds = 0.0;
    bool valid = false;
    std::string failure;
};

struct ExperimentReport {
    std::filesystem::path out_dir;
    long fom_steps = 0;
    std::size_t num_snapshots = 0;
    bool steady_reached = false;
    double t_final = 0.0;
    bool entropy_defined = false;
    bool entropy_decays = false;
    double entropy_max_rise = 0.0;
    long entropy_clamped = 0;
    double fom_seconds = 0.0;
    std::vector<RomRow> rows;
    bool valid = false;
    std::string failure;
};

namespace detail {

/// Short label for tolerances and time stamps in file names and tables.
inline std::string format_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace detail

/// Summary table, one row per reduction. Global rows fill the modes_u/modes_v
/// pair; windowed rows fill the four per-window counts instead.
inline void emit_tables(const std::filesystem::path& path, const std::vector<RomRow>& rows) {
    auto out = detail::open_out(path, std::ios::out);
    out << "tol_ric,method,modes_u,modes_v,modes_i1_u,modes_i1_v,modes_i2_u,modes_i2_v,"
           "err_u,err_v\n";
    for (const auto& r : rows) {
        out << detail::format_short(r.tol_ric) << ',' << r.method << ',';
        if (r.method == "ppod" && !r.fallback) {
            out << ",," << r.modes_i1_u << ',' << r.modes_i1_v << ','
                << r.modes_i2_u << ',' << r.modes_i2_v << ',';
        } else {
            out << r.modes_u << ',' << r.modes_v << ",,,,,";
        }
        out << detail::format_double(r.err_u) << ',' << detail::format_double(r.err_v) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Field dumps at the stored snapshot times nearest the requested ones.
/// 1D runs produce one x,u1,u2 file per time; 2D runs produce one grid file
/// per species and time plus an index sidecar mapping grid to flat indices.
inline std::vector<std::filesystem::path> emit_fields(const std::filesystem::path& out_dir,
                                                      const SpatialGrid& grid,
                                                      const SnapshotMatrix& snap1,
                                                      const SnapshotMatrix& snap2,
                                                      const std::vector<double>& times) {
    if (snap1.times.empty()) throw std::invalid_argument("emit_fields: no stored snapshots");
    const double t_lo = snap1.times.front();
    const double t_hi = snap1.times.back();
    const double slack = 1e-9 * std::max(1.0, std::abs(t_hi));
    std::vector<std::filesystem::path> written;
    bool wrote_index = false;
    for (double t : times) {
        if (t < t_lo - slack || t > t_hi + slack) {
            throw std::out_of_range("emit_fields: time " + detail::format_short(t) +
                                    " outside the stored range [" + detail::format_short(t_lo) +
                                    ", " + detail::format_short(t_hi) + "]");
        }
        std::size_t best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < snap1.times.size(); ++j) {
            const double dist = std::abs(snap1.times[j] - t);
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        const auto col = static_cast<Eigen::Index>(best);
        const std::string label = detail::format_short(snap1.times[best]);
        if (grid.dim == 1) {
            auto path = out_dir / ("field_t" + label + ".csv");
            write_field_csv(path, grid, snap1.data.col(col), snap2.data.col(col));
            written.push_back(std::move(path));
        } else {
            auto path1 = out_dir / ("field_u1_t" + label + ".csv");
            auto path2 = out_dir / ("field_u2_t" + label + ".csv");
            write_field_grid(path1, grid, snap1.data.col(col));
            write_field_grid(path2, grid, snap2.data.col(col));
            written.push_back(std::move(path1));
            written.push_back(std::move(path2));
            if (!wrote_index) {
                auto idx = out_dir / "grid_index.csv";
                write_grid_index(idx, grid);
                written.push_back(std::move(idx));
                wrote_index = true;
            }
        }
    }
    return written;
}

/// Output directory resolution: an explicit override wins, otherwise the
/// configured directory; relative paths land under $SKT_OUT_ROOT when set.
inline std::filesystem::path resolve_out_dir(const ExperimentConfig& c,
                                             const std::optional<std::string>& override_dir = {}) {
    std::filesystem::path dir = override_dir ? *override_dir : c.out_dir;
    if (dir.is_relative()) {
        if (const char* root = std::getenv("SKT_OUT_ROOT")) {
            dir = std::filesystem::path(root) / dir;
        }
    }
    return dir;
}

/// Per-snapshot diagnostics of a reconstructed trajectory.
inline DiagnosticsSeries trajectory_diagnostics(const SpatialGrid& grid, const SktParams& params,
                                                const Mat& u1, const Mat& u2,
                                                const std::vector<double>& times) {
    if (u1.cols() != u2.cols() ||
        static_cast<std::size_t>(u1.cols()) != times.size()) {
        throw std::invalid_argument("trajectory_diagnostics: column/time count mismatch");
    }
    DiagnosticsSeries d;
    const Vec w = trapezoid_weights(grid);
    const double measure = domain_measure(grid);
    bool have_entropy = true;
    EntropyWeights ew;
    try {
        ew = EntropyWeights::for_params(params);
    } catch (const std::domain_error&) {
        have_entropy = false;
    }
    for (Eigen::Index j = 0; j < u1.cols(); ++j) {
        d.times.push_back(times[static_cast<std::size_t>(j)]);
        if (have_entropy) {
            const auto [e, clamped] = entropy_clamped(u1.col(j), u2.col(j), ew, grid);
            d.entropy.push_back(e);
            d.clamped_nodes += clamped;
        } else {
            d.entropy.push_back(std::numeric_limits<double>::quiet_NaN());
        }
        d.dens_u1.push_back(w.dot(u1.col(j)) / measure);
        d.dens_u2.push_back(w.dot(u2.col(j)) / measure);
        if (j == 0) {
            d.relchg_u1.push_back(std::numeric_limits<double>::quiet_NaN());
            d.relchg_u2.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
            const double n1 = l2_norm(Vec(u1.col(j)), w);
            const double n2 = l2_norm(Vec(u2.col(j)), w);
            d.relchg_u1.push_back(n1 > 0.0 ? l2_norm(Vec(u1.col(j) - u1.col(j - 1)), w) / n1
                                           : std::numeric_limits<double>::quiet_NaN());
            d.relchg_u2.push_back(n2 > 0.0 ? l2_norm(Vec(u2.col(j) - u2.col(j - 1)), w) / n2
                                           : std::numeric_limits<double>::quiet_NaN());
        }
    }
    return d;
}

namespace detail {

struct RomJob {
    double tol_ric = 0.0;
    std::string method;
};

inline std::vector<RomJob> planned_jobs(const ExperimentConfig& c) {
    std::vector<RomJob> jobs;
    if (!c.sweep_tols.empty()) {
        auto methods = c.sweep_methods;
        if (methods.empty()) methods = {"gpod", "ppod"};
        for (double tol : c.sweep_tols) {
            for (const auto& m : methods) jobs.push_back({tol, m});
        }
    } else if (c.rom_mode != "none") {
        jobs.push_back({c.tol_ric, c.rom_mode});
    }
    return jobs;
}

inline std::string row_tag(const RomRow& row) {
    return row.method + "_" + format_short(row.tol_ric);
}

inline void write_report_csv(const std::filesystem::path& path, const ExperimentReport& report) {
    auto out = open_out(path, std::ios::out);
    out << "key,value\n";
    out << "valid," << (report.valid ? 1 : 0) << '\n';
    out << "fom_steps," << report.fom_steps << '\n';
    out << "num_snapshots," << report.num_snapshots << '\n';
    out << "steady_reached," << (report.steady_reached ? 1 : 0) << '\n';
    out << "t_final," << format_double(report.t_final) << '\n';
    out << "entropy_defined," << (report.entropy_defined ? 1 : 0) << '\n';
    out << "entropy_decays," << (report.entropy_decays ? 1 : 0) << '\n';
    out << "entropy_max_rise," << format_double(report.entropy_max_rise) << '\n';
    out << "entropy_clamped," << report.entropy_clamped << '\n';
    for (const auto& row : report.rows) {
        const std::string tag = row_tag(row);
        out << tag << "_valid," << (row.valid ? 1 : 0) << '\n';
        if (row.method == "ppod") {
            out << tag << "_fallback," << (row.fallback ? 1 : 0) << '\n';
            if (!row.fallback) {
                out << tag << "_t_transition," << format_double(row.t_transition) << '\n';
                out << tag << "_interface_residual_u," << format_double(row.interface_residual_u)
                    << '\n';
                out << tag << "_interface_residual_v," << format_double(row.interface_residual_v)
                    << '\n';
            }
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline void write_timings_csv(const std::filesystem::path& path, const ExperimentReport& report) {
    auto out = open_out(path, std::ios::out);
    out << "stage,seconds\n";
    out << "fom," << format_double(report.fom_seconds) << '\n';
    for (const auto& row : report.rows) {
        const std::string tag = row_tag(row);
        out << tag << "_offline," << format_double(row.offline_seconds) << '\n';
        out << tag << "_online," << format_double(row.online_seconds) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

} // namespace detail

/// Full pipeline behind the command-line driver: integrate the full model,
/// persist snapshots and diagnostics, run every requested reduction, and
/// write the summary, table, timing, and field artifacts into out_dir.
/// Timing numbers stay out of report.csv and tables.csv so that repeated
/// runs with the same configuration and seed produce byte-identical files.
inline ExperimentReport run_experiment(const ExperimentConfig& config,
                                       const std::filesystem::path& out_dir,
                                       std::ostream* log = nullptr) {
    ExperimentReport report;
    report.out_dir = out_dir;
    std::filesystem::create_directories(out_dir);

    const SpatialGrid grid = make_grid(config);
    const FomOperators ops = assemble_fom(grid, config.params);
    const StateVector u0 = initial_state(config, grid);

    detail::StageClock clock;
    clock.start();
    const FomResult fom = integrate_fom(ops, u0, {config.dt, config.t_end},
                                        {config.tol_st, config.stop_on_steady},
                                        config.store_every);
    report.fom_seconds = clock.stop();

    report.fom_steps = fom.diag.size() > 0 ? static_cast<long>(fom.diag.size()) - 1 : 0;
    report.num_snapshots = fom.snap1.times.size();
    report.steady_reached = fom.steady_reached;
    report.t_final = fom.t_final;
    report.entropy_clamped = fom.diag.clamped_nodes;
    report.entropy_defined = !fom.diag.entropy.empty() && !std::isnan(fom.diag.entropy.front());
    if (report.entropy_defined) {
        const auto decay = check_entropy_decay(fom.diag.entropy);
        report.entropy_decays = decay.monotone;
        report.entropy_max_rise = decay.max_violation;
    }
    if (log) {
        *log << "fom: " << report.fom_steps << " steps to t = " << fom.t_final
             << (fom.steady_reached ? " (steady)" : "") << ", "
             << report.num_snapshots << " snapshots\n";
    }

    write_snapshots(out_dir / "fom_u1.skts", fom.snap1);
    write_snapshots(out_dir / "fom_u2.skts", fom.snap2);
    write_diagnostics_csv(out_dir / "diagnostics.csv", fom.diag);

    if (!fom.valid) {
        report.failure = fom.failure;
        emit_tables(out_dir / "tables.csv", report.rows);
        detail::write_report_csv(out_dir / "report.csv", report);
        detail::write_timings_csv(out_dir / "timings.csv", report);
        return report;
    }

    const auto jobs = detail::planned_jobs(config);
    FomResult train;
    const FomResult* train_ref = &fom;
    if (config.t_train && !jobs.empty()) {
        Eigen::Index m_train = 0;
        while (m_train < fom.snap1.data.cols() &&
               fom.snap1.times[static_cast<std::size_t>(m_train)] <= *config.t_train + 1e-9) {
            ++m_train;
        }
        if (m_train < 2) {
            throw ConfigError("time.t_train leaves fewer than two training snapshots");
        }
        if (m_train < fom.snap1.data.cols()) {
            train.snap1.data = fom.snap1.data.leftCols(m_train);
            train.snap2.data = fom.snap2.data.leftCols(m_train);
            train.snap1.times.assign(fom.snap1.times.begin(),
                                     fom.snap1.times.begin() + m_train);
            train.snap2.times = train.snap1.times;
            train_ref = &train;
            if (log) {
                *log << "training window: " << m_train << " of " << report.num_snapshots
                     << " snapshots (t <= " << *config.t_train << ")\n";
            }
        }
    }

    RsvdParams rsvd;
    rsvd.oversample = config.oversample;
    rsvd.power_iters = config.power_iters;
    rsvd.seed = config.seed;

    for (const auto& job : jobs) {
        RomRow row;
        row.tol_ric = job.tol_ric;
        row.method = job.method;
        const std::string tag = detail::row_tag(row);
        StageTimings timings;
        Mat lifted1, lifted2;
        if (job.method == "gpod") {
            const GpodResult res =
                run_gpod(ops, *train_ref, fom, job.tol_ric, config.dt, rsvd, &timings);
            row.valid = res.valid;
            row.failure = res.failure;
            row.modes_u = res.k1;
            row.modes_v = res.k2;
            row.err_u = res.err1;
            row.err_v = res.err2;
            if (res.valid) {
                write_reduced_model(out_dir / ("model_" + tag + ".sktr"), res.model);
                SnapshotMatrix reduced;
                reduced.data = res.reduced_states;
                reduced.times = fom.snap1.times;
                write_snapshots(out_dir / ("reduced_" + tag + ".skts"), reduced);
                lifted1 = res.lifted1;
                lifted2 = res.lifted2;
            }
        } else {
            const PpodResult res = run_ppod(ops, *train_ref, fom, job.tol_ric, config.tol_pid,
                                            config.dt, rsvd, &timings);
            row.valid = res.valid;
            row.failure = res.failure;
            row.fallback = res.fallback;
            row.err_u = res.err1;
            row.err_v = res.err2;
            if (res.fallback) {
                row.modes_u = res.global.k1;
                row.modes_v = res.global.k2;
                if (res.valid) {
                    write_reduced_model(out_dir / ("model_" + tag + ".sktr"), res.global.model);
                }
            } else {
                row.modes_i1_u = res.k1_w1;
                row.modes_i1_v = res.k2_w1;
                row.modes_i2_u = res.k1_w2;
                row.modes_i2_v = res.k2_w2;
                row.t_transition = res.t_transition;
                row.interface_residual_u = res.interface_residual1;
                row.interface_residual_v = res.interface_residual2;
                if (res.valid) {
                    write_reduced_model(out_dir / ("model_" + tag + "_w1.sktr"), res.model_w1);
                    write_reduced_model(out_dir / ("model_" + tag + "_w2.sktr"), res.model_w2);
                }
            }
            if (res.valid) {
                lifted1 = res.lifted1;
                lifted2 = res.lifted2;
            }
        }
        row.offline_seconds = timings.offline_seconds;
        row.online_seconds = timings.online_seconds;
        if (row.valid) {
            const auto diag =
                trajectory_diagnostics(grid, config.params, lifted1, lifted2, fom.snap1.times);
            write_diagnostics_csv(out_dir / ("rom_diag_" + tag + ".csv"), diag);
        }
        if (log) {
            *log << tag << ": ";
            if (!row.valid) {
                *log << "failed (" << row.failure << ")\n";
            } else if (row.method == "ppod" && !row.fallback) {
                *log << "windows (" << row.modes_i1_u << '+' << row.modes_i1_v << ", "
                     << row.modes_i2_u << '+' << row.modes_i2_v << ") at t = "
                     << row.t_transition << ", err (" << row.err_u << ", " << row.err_v << ")\n";
            } else {
                *log << "modes (" << row.modes_u << ", " << row.modes_v << "), err ("
                     << row.err_u << ", " << row.err_v << ")\n";
            }
        }
        report.rows.push_back(std::move(row));
    }

    report.valid = true;
    emit_tables(out_dir / "tables.csv", report.rows);
    detail::write_report_csv(out_dir / "report.csv", report);
    detail::write_timings_csv(out_dir / "timings.csv", report);
    if (!config.fields_at.empty()) {
        emit_fields(out_dir, grid, fom.snap1, fom.snap2, config.fields_at);
    }
    return report;
}

/// Re-run a persisted global reduced model over its stored horizon and
/// compare against the persisted reduced trajectory.
struct ReplayResult {
    std::string model_file;
    double max_deviation = 0.0;
    bool matches = false;
};

inline ReplayResult replay_reduced(const std::filesystem::path& model_path,
                                   const std::filesystem::path& reduced_path, double dt,
                                   double tol = 1e-12) {
    const ReducedModel model = read_reduced_model(model_path);
    const SnapshotMatrix stored = read_snapshots(reduced_path);
    if (stored.data.cols() < 1) {
        throw std::runtime_error("replay: empty reduced trajectory in " + reduced_path.string());
    }
    if (stored.data.rows() != model.ops.k1 + model.ops.k2) {
        throw std::runtime_error("replay: model and trajectory dimensions differ");
    }
    const double t0 = stored.times.front();
    const double t_end = stored.times.back();
    const Vec z0 = stored.data.col(0);
    const ReducedTrajectory traj =
        t_end > t0 ? integrate_rom(model.ops, z0, {dt, t_end - t0}, t0) : ReducedTrajectory{};
    ReplayResult out;
    out.model_file = model_path.filename().string();
    if (t_end > t0 && !traj.valid) {
        throw std::runtime_error("replay: reduced integration failed (" + traj.failure + ")");
    }
    for (Eigen::Index j = 0; j < stored.data.cols(); ++j) {
        const long idx = detail::snapshot_step_index(stored.times[static_cast<std::size_t>(j)],
                                                     t0, dt);
        if (idx < 0 || (t_end > t0 && idx >= traj.states.cols())) {
            throw std::runtime_error("replay: stored time outside the recomputed trajectory");
        }
        const Vec z = t_end > t0 ? Vec(traj.states.col(idx)) : z0;
        const double dev = (z - stored.data.col(j)).lpNorm<Eigen::Infinity>();
        out.max_deviation = std::max(out.max_deviation, dev);
    }
    out.matches = out.max_deviation <= tol;
    return out;
}

} // namespace skt
