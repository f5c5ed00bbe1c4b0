#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "skt/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Experiment configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "Output directory (overrides output.dir)");
    cmd->add_option("--seed", opts.seed, "Random seed (overrides init.seed)");
    cmd->add_flag("--quiet", opts.quiet, "Suppress progress output");
}

skt::ExperimentConfig load_config(const CommonOpts& opts) {
    auto config = skt::load_experiment_config(fs::path(opts.config_path));
    if (opts.seed) config.seed = *opts.seed;
    return config;
}

int run_pipeline(const skt::ExperimentConfig& config, const CommonOpts& opts,
                 bool require_all_rows) {
    const auto out_dir = skt::resolve_out_dir(config, opts.out_dir);
    std::ostream* log = opts.quiet ? nullptr : &std::cout;
    const auto report = skt::run_experiment(config, out_dir, log);
    if (!opts.quiet) std::cout << "wrote " << out_dir.string() << "\n";
    if (!report.valid) {
        std::cerr << "error: " << report.failure << "\n";
        return 2;
    }
    const auto invalid = std::count_if(report.rows.begin(), report.rows.end(),
                                       [](const skt::RomRow& r) { return !r.valid; });
    if (invalid > 0) {
        for (const auto& row : report.rows) {
            if (!row.valid) std::cerr << "error: " << row.method << " failed: " << row.failure << "\n";
        }
        if (require_all_rows || invalid == static_cast<long>(report.rows.size())) return 2;
    }
    return 0;
}

int cmd_replay(const CommonOpts& opts) {
    const auto config = load_config(opts);
    const auto out_dir = skt::resolve_out_dir(config, opts.out_dir);
    std::vector<std::string> tags;
    if (fs::is_directory(out_dir)) {
        for (const auto& entry : fs::directory_iterator(out_dir)) {
            const auto name = entry.path().filename().string();
            if (name.starts_with("reduced_gpod_") && name.ends_with(".skts")) {
                tags.push_back(name.substr(8, name.size() - 8 - 5));
            }
        }
    }
    if (tags.empty()) {
        throw skt::ConfigError("no stored global reduced trajectories under " + out_dir.string());
    }
    std::sort(tags.begin(), tags.end());
    bool all_match = true;
    for (const auto& tag : tags) {
        const auto result = skt::replay_reduced(out_dir / ("model_" + tag + ".sktr"),
                                                out_dir / ("reduced_" + tag + ".skts"), config.dt);
        if (!opts.quiet) {
            std::cout << result.model_file << ": max deviation " << result.max_deviation
                      << (result.matches ? " (ok)" : " (MISMATCH)") << "\n";
        }
        all_match = all_match && result.matches;
    }
    if (!all_match) {
        std::cerr << "error: replay deviates from the stored reduced trajectory\n";
        return 2;
    }
    return 0;
}

int cmd_tables(const CommonOpts& opts) {
    const auto config = load_config(opts);
    const auto out_dir = skt::resolve_out_dir(config, opts.out_dir);
    const auto path = out_dir / "tables.csv";
    if (!fs::exists(path)) {
        throw skt::ConfigError("no summary table at " + path.string() + "; run a reduction first");
    }
    const auto table = skt::read_csv(path);
    std::vector<std::size_t> width(table.header.size());
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        width[c] = table.header[c].size();
        for (const auto& row : table.rows) width[c] = std::max(width[c], row[c].size());
    }
    auto print_row = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::cout << std::left << std::setw(static_cast<int>(width[c]) + 2) << cells[c];
        }
        std::cout << "\n";
    };
    print_row(table.header);
    for (const auto& row : table.rows) print_row(row);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-diffusion pattern formation: full-order runs and reduced models"};
    app.require_subcommand(1);

    CommonOpts fom_opts, rom_opts, sweep_opts, replay_opts, tables_opts;
    auto* fom = app.add_subcommand("fom", "Integrate the full-order model only");
    add_common(fom, fom_opts);
    auto* rom = app.add_subcommand("rom", "Full-order run plus the configured reduction");
    add_common(rom, rom_opts);
    auto* sweep = app.add_subcommand("sweep", "Full-order run plus a tolerance sweep");
    add_common(sweep, sweep_opts);
    auto* replay = app.add_subcommand("replay", "Re-run stored reduced models and compare");
    add_common(replay, replay_opts);
    auto* tables = app.add_subcommand("tables", "Print the summary table of a finished run");
    add_common(tables, tables_opts);

    try {
        app.parse(argc, argv);

        if (fom->parsed()) {
            auto config = load_config(fom_opts);
            config.rom_mode = "none";
            config.sweep_tols.clear();
            return run_pipeline(config, fom_opts, false);
        }
        if (rom->parsed()) {
            auto config = load_config(rom_opts);
            config.sweep_tols.clear();
            if (config.rom_mode == "none") {
                throw skt::ConfigError("rom.mode must be gpod or ppod for the rom command");
            }
            return run_pipeline(config, rom_opts, true);
        }
        if (sweep->parsed()) {
            auto config = load_config(sweep_opts);
            if (config.sweep_tols.empty()) {
                throw skt::ConfigError("the sweep command needs a non-empty sweep.tols list");
            }
            return run_pipeline(config, sweep_opts, false);
        }
        if (replay->parsed()) return cmd_replay(replay_opts);
        if (tables->parsed()) return cmd_tables(tables_opts);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const skt::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
