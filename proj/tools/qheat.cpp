#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qheat/qheat.hpp"

#ifndef QHEAT_PRESET_DIR
#define QHEAT_PRESET_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace qheat;

namespace {

enum Exit { kOk = 0, kConfig = 2, kSolver = 3, kValidation = 4 };

std::string timestamp() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

std::vector<std::string> provenance(const config::json& cfg, const SolverOptions& o) {
    return {std::string("tool: qheat ") + kVersion,
            "config_hash: " + config::config_hash(cfg),
            std::string("scheme: ") + to_string(o.scheme),
            "tolerances: epsrel=" + io::format_number(o.rate.fourier.quad.epsrel) +
                " abs_scale=" + io::format_number(o.rate.fourier.abs_scale) +
                " chi_step=" + io::format_number(o.chi_step),
            "generated: " + timestamp()};
}

int threads_option(int requested) { return requested > 0 ? requested : transport::default_threads(); }

void write_table(const fs::path& path, const io::Table& t, const std::vector<std::string>& prov,
                 const std::string& format) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::ConfigError, "cannot write " + path.string());
    io::write_provenance(os, prov);
    if (format == "jsonl")
        io::write_jsonl(os, t);
    else
        io::write_csv(os, t);
}

// ---------------------------------------------------------------- current

int cmd_current(const std::string& path) {
    const auto raw = config::read_json_file(path);
    const auto cfg = config::from_json(raw);
    const auto m = make_model(cfg.system, cfg.solver);
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = make_generator(m, Terminal::R);
    const auto ss = steady_state(g);
    const auto before = rates::clamped_rate_count().load();

    std::printf("scheme: %s\n", to_string(cfg.solver.scheme));
    for (Terminal t : cfg.system.terminals()) {
        const double i = transport::terminal_current(m, t, ss);
        std::printf("current[%s]: %.12e\n", to_string(t), i);
    }
    const auto c = cumulant(g, cfg.noise ? 2 : 1, cfg.solver.chi_step, &ss);
    std::printf("fcs_current[R]: %.12e\n", c.current);
    if (cfg.noise) std::printf("noise[R]: %.12e\n", c.noise);
    std::printf("steady_state_residual: %.3e\n", ss.residual);
    std::printf("clamped_rates: %llu\n", static_cast<unsigned long long>(rates::clamped_rate_count().load() - before));
    std::printf("seconds: %.3f\n",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return kOk;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(const std::string& path, const std::string& out, std::string format, int threads) {
    const auto raw = config::read_json_file(path);
    const auto cfg = config::from_json(raw);
    if (!cfg.sweep) throw Error(ErrorKind::ConfigError, "sweep: missing required key");
    if (format.empty()) format = cfg.output.format;
    std::string target = out.empty() ? cfg.output.path : out;
    if (target.empty()) throw Error(ErrorKind::ConfigError, "output.path: no output file given (use -o)");
    const auto prov = provenance(raw, cfg.solver);
    const auto& sw = *cfg.sweep;
    const char* axis = transport::to_string(sw.axis);

    io::Table t;
    std::size_t failed = 0, total = sw.grid.size();
    if (cfg.system.topology == Topology::ThreeTerminal && sw.axis == transport::SweepAxis::TR) {
        const auto rep = transport::amplification_scan(cfg.system, sw.grid, cfg.solver, 1e-3, threads);
        t = io::Table{"sweep", {"t_r", "i_lh", "i_lc", "i_r", "beta_lh", "beta_lc", "theta", "identity_residual",
                                "divergent_flag", "scheme", "status"}};
        t.plot_x = "t_r";
        t.plot_y = {"beta_lh", "i_r"};
        for (const auto& r : rep.rows) {
            failed += !r.ok;
            t.add({r.t_r, r.currents.lh, r.currents.lc, r.currents.r, r.beta_lh, r.beta_lc,
                   static_cast<long long>(r.theta), r.identity_residual, r.divergent,
                   std::string(to_string(cfg.solver.scheme)), r.ok ? std::string("ok") : "failed: " + r.error});
        }
    } else {
        transport::SweepSpec spec;
        spec.base = cfg.system;
        spec.axis = sw.axis;
        spec.grid = sw.grid;
        spec.solver = cfg.solver;
        spec.normalize = sw.normalize;
        spec.noise = cfg.noise;
        spec.t0 = sw.t0;
        spec.threads = threads;
        const auto table = transport::current_sweep(spec);
        std::optional<transport::NdtcReport> nd;
        try {
            nd = transport::detect_ndtc(table);
        } catch (const Error&) {
        }
        t.name = "sweep";
        t.columns = {axis, "current", "normalized_current", "slope", "has_ndtc"};
        t.plot_x = axis;
        t.plot_y = {"current"};
        for (Terminal term : cfg.system.terminals()) t.columns.push_back(std::string("i_") + to_string(term));
        if (cfg.noise) t.columns.push_back("noise");
        for (const char* c : {"residual", "scheme", "status"}) t.columns.push_back(c);
        std::size_t ok_index = 0;
        for (const auto& r : table.rows) {
            failed += !r.ok;
            const double nan = std::numeric_limits<double>::quiet_NaN();
            std::vector<io::Cell> row{r.x, r.ok ? r.current : nan, r.ok ? r.normalized : nan,
                                      (r.ok && nd) ? nd->slopes[ok_index++] : nan, nd ? nd->has_ndtc : false};
            for (Terminal term : cfg.system.terminals())
                row.push_back(r.ok ? r.currents.at(term) : nan);
            if (cfg.noise) row.push_back(r.noise.value_or(nan));
            row.push_back(r.residual);
            row.push_back(std::string(to_string(cfg.solver.scheme)));
            row.push_back(r.ok ? std::string("ok") : "failed: " + r.error);
            t.add(std::move(row));
        }
    }
    write_table(target, t, prov, format);
    std::printf("wrote %zu rows to %s (%zu failed)\n", t.rows.size(), target.c_str(), failed);
    return (total > 0 && failed == total) ? kSolver : kOk;
}

// ---------------------------------------------------------------- reproduce

int cmd_reproduce(const std::string& id, const std::string& out, std::string preset, const std::string& format,
                  int threads) {
    if (preset.empty()) {
        const char* env = std::getenv("QHEAT_PRESET_DIR");
        preset = (fs::path(env ? env : QHEAT_PRESET_DIR) / (id + ".json")).string();
    }
    const auto raw = config::read_json_file(preset);
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = figures::run(id, raw, threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(out);
    const SolverOptions solver =
        raw.contains("solver") ? config::parse_solver(config::Reader(raw.at("solver"), "solver")) : SolverOptions{};
    auto prov = provenance(raw, solver);
    prov.insert(prov.begin() + 1, "figure: " + id);
    const std::string ext = format == "jsonl" ? ".jsonl" : ".csv";
    for (const auto& t : res.tables) {
        const fs::path data = fs::path(out) / (t.name + ext);
        write_table(data, t, prov, format);
        if (format != "jsonl" && !t.plot_x.empty()) {
            std::ofstream gp(fs::path(out) / (t.name + ".gp"));
            io::write_gnuplot(gp, t, data.filename().string());
        }
    }

    std::ofstream sum(fs::path(out) / (id + "_summary.txt"));
    for (const auto& c : res.checks) {
        const std::string line = std::string(c.pass ? "PASS" : "FAIL") + "  " + c.name + "  (" + c.detail + ")";
        std::printf("%s\n", line.c_str());
        sum << line << '\n';
    }
    std::printf("%s: %s in %.1f s, data in %s\n", id.c_str(), res.pass() ? "PASS" : "FAIL", secs, out.c_str());
    return res.pass() ? kOk : kValidation;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const std::string& grid) {
    const auto rep = validate::run(grid == "full" ? validate::Grid::Full : validate::Grid::Small);
    std::printf("%-20s %-62s %12s %10s %6s %8s\n", "suite", "check", "max_resid", "tolerance", "status", "seconds");
    for (const auto& r : rep.rows)
        std::printf("%-20s %-62s %12.3e %10.1e %6s %8.2f\n", r.suite.c_str(), r.check.c_str(), r.max_residual,
                    r.tolerance, r.pass ? "pass" : "FAIL", r.seconds);
    std::printf("total wall-clock: %.2f s (budget 300 s)\n", rep.seconds);
    return rep.pass() ? kOk : kValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady-state heat transport in nonequilibrium two-qubit spin-boson systems"};
    app.set_version_flag("--version", std::string("qheat ") + kVersion);
    app.require_subcommand(1);

    std::string cfg, out, format, preset, grid = "small", figure;
    int threads = 0;

    auto* cur = app.add_subcommand("current", "Single-point currents for a run config");
    cur->add_option("-c,--config", cfg, "Run config (JSON)")->required();

    auto* sw = app.add_subcommand("sweep", "Parameter sweep written as CSV or JSON lines");
    sw->add_option("-c,--config", cfg, "Run config (JSON) with a sweep section")->required();
    sw->add_option("-o,--output", out, "Output file (overrides output.path)");
    sw->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    sw->add_option("--threads", threads, "Worker threads (default: QHEAT_THREADS or all cores)");

    auto* rep = app.add_subcommand("reproduce", "Regenerate the data behind one figure");
    rep->add_option("figure", figure, "Figure id")->required()->check(CLI::IsMember(figures::figure_ids()));
    rep->add_option("-o,--output", out, "Output directory")->required();
    rep->add_option("--preset", preset, "Preset file (default: bundled preset)");
    rep->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
    rep->add_option("--threads", threads, "Worker threads (default: QHEAT_THREADS or all cores)");

    auto* val = app.add_subcommand("validate", "Cross-module invariant suite");
    val->add_option("--grid", grid, "small or full")->check(CLI::IsMember({"small", "full"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*cur) return cmd_current(cfg);
        if (*sw) return cmd_sweep(cfg, out, format, threads_option(threads));
        if (*rep) return cmd_reproduce(figure, out, preset, format.empty() ? "csv" : format, threads_option(threads));
        if (*val) return cmd_validate(grid);
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", to_string(e.kind()), e.what());
        return e.kind() == ErrorKind::ConfigError ? kConfig : kSolver;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kSolver;
    }
    return kOk;
}
