#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
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

struct Outcome {
    bool pass = true;
    std::vector<std::string> details;

    void add(bool ok, const std::string& what) {
        pass = pass && ok;
        details.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
    }
};

std::string num(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

int g_failed = 0;

void report(int id, const std::string& title, const Outcome& o, double seconds) {
    std::printf("[%s] criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), seconds);
    for (const auto& d : o.details) std::printf("         %s\n", d.c_str());
    std::fflush(stdout);
    if (!o.pass) ++g_failed;
}

template <class F>
void criterion(int id, const std::string& title, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        f(o);
    } catch (const std::exception& e) {
        o.add(false, std::string("exception: ") + e.what());
    }
    report(id, title, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

SystemSpec device(double alpha_l, double alpha_r, double t_l, double t_r, double eps, double u) {
    SystemSpec s;
    s.u = u;
    s.left = {eps, 1.0};
    s.right = {eps, 1.0};
    s.baths[Terminal::L] = {alpha_l, 5.0, t_l};
    s.baths[Terminal::R] = {alpha_r, 5.0, t_r};
    return s;
}

SolverOptions scheme(Scheme s, RedfieldForm f = RedfieldForm::Full) {
    SolverOptions o;
    o.scheme = s;
    o.redfield_form = f;
    return o;
}

double current_r(const SystemSpec& s, const SolverOptions& o) {
    return transport::solve_point(s, o).currents.at(Terminal::R);
}

config::json preset(const std::string& id) {
    return config::read_json_file(std::string(QHEAT_PRESET_DIR) + "/" + id + ".json");
}

void figure_checks(Outcome& o, const std::string& id, int threads) {
    const auto res = figures::run(id, preset(id), threads);
    for (const auto& c : res.checks) o.add(c.pass, id + ": " + c.name + " (" + c.detail + ")");
}

std::vector<double> bias_grid() {
    std::vector<double> g;
    for (int i = 0; i <= 19; ++i) g.push_back(0.2 * i);
    return g;
}

transport::NdtcReport ndtc_of(const SystemSpec& base, Scheme sc, int threads) {
    transport::SweepSpec s;
    s.base = base;
    s.axis = transport::SweepAxis::DeltaT;
    s.grid = bias_grid();
    s.solver = scheme(sc);
    s.normalize = true;
    s.t0 = 2.0;
    s.threads = threads;
    const auto t = transport::current_sweep(s);
    if (t.failures() > 0) throw Error(ErrorKind::InvalidArgument, "sweep had failed points");
    return transport::detect_ndtc(t);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QHEAT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string payload(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::string out;
    for (std::string line; std::getline(in, line);)
        if (line.rfind("# generated:", 0) != 0) out += line + '\n';
    return out;
}

}  // namespace

int main() {
    const int threads = transport::default_threads();
    const auto t_start = std::chrono::steady_clock::now();
    std::printf("qheat acceptance suite (%d threads)\n", threads);

    criterion(1, "NE-PTRE matches Redfield at alpha=0.01 and NIBA at alpha=5 within 2%", [&](Outcome& o) {
        for (double eps : {0.0, 1.0}) {
            const auto weak = device(0.01, 0.01, 1.5, 0.5, eps, 0.1);
            const double a = current_r(weak, scheme(Scheme::NePtre));
            const double b = current_r(weak, scheme(Scheme::Redfield));
            const double gap_w = std::abs(a - b) / std::abs(b);
            o.add(gap_w < 0.02, "alpha=0.01 eps=" + num(eps) + ": |I_neptre-I_redfield|/|I_redfield| = " + num(gap_w));
            const auto strong = device(5.0, 5.0, 1.5, 0.5, eps, 0.1);
            const double c = current_r(strong, scheme(Scheme::NePtre));
            const double d = current_r(strong, scheme(Scheme::Niba));
            const double gap_s = std::abs(c - d) / std::abs(d);
            o.add(gap_s < 0.02, "alpha=5 eps=" + num(eps) + ": |I_neptre-I_niba|/|I_niba| = " + num(gap_s) +
                                    " (I_neptre=" + num(c) + ", I_niba=" + num(d) + ")");
        }
    });

    criterion(2, "NDTC presence and absence matrix", [&](Outcome& o) {
        struct Case {
            std::string label;
            SystemSpec spec;
            Scheme sc;
            bool expect;
        };
        const std::vector<Case> cases = {
            {"alpha=5 eps=1 U=0.1 [neptre]", device(5, 5, 2, 2, 1, 0.1), Scheme::NePtre, true},
            {"alpha=0.05 eps=1 U=0.1 [neptre]", device(0.05, 0.05, 2, 2, 1, 0.1), Scheme::NePtre, false},
            {"alpha=5 eps=0 U=0.1 [niba]", device(5, 5, 2, 2, 0, 0.1), Scheme::Niba, false},
            {"alpha=5 eps=1 U=0.8 [niba]", device(5, 5, 2, 2, 1, 0.8), Scheme::Niba, false},
            {"alpha_L=0.05 alpha_R=3 [neptre]", device(0.05, 3, 2, 2, 1, 0.1), Scheme::NePtre, true},
        };
        for (const auto& c : cases) {
            const auto r = ndtc_of(c.spec, c.sc, threads);
            std::string d = c.label + ": NDTC " + (r.has_ndtc ? "present" : "absent") + ", expected " +
                            (c.expect ? "present" : "absent");
            if (r.turnover) d += ", turnover " + num(*r.turnover);
            o.add(r.has_ndtc == c.expect, d);
        }
        std::vector<double> ar;
        for (double a = 0.2; a <= 3.0 + 1e-9; a += 0.2) ar.push_back(a);
        const auto rep = transport::partial_coupling_scan(device(0.05, 0.05, 2, 2, 1, 0.1), 0.05, ar, bias_grid(),
                                                          scheme(Scheme::NePtre), 2.0, threads);
        const bool ok = rep.onset && *rep.onset >= 0.8 && *rep.onset <= 1.6;
        o.add(ok, "alpha_R onset of NDTC at alpha_L=0.05: " + (rep.onset ? num(*rep.onset) : std::string("none")) +
                      " (window [0.8, 1.6])");
    });

    criterion(3, "loop currents decay past the turnover and low-bias response is linear",
              [&](Outcome& o) { figure_checks(o, "fig4", threads); });

    criterion(4, "heat amplification in the three-terminal device", [&](Outcome& o) {
        figure_checks(o, "fig6", threads);
        figure_checks(o, "fig7", threads);
    });

    criterion(5, "oracle equivalences", [&](Outcome& o) {
        double pop = 0.0, loops = 0.0, fcs = 0.0, prop = 0.0;
        for (double alpha : {0.05, 1.0, 5.0})
            for (double eps : {0.0, 1.0}) {
                const auto s = device(alpha, alpha, 1.5, 0.5, eps, 0.1);
                for (const auto& opt : {scheme(Scheme::NePtre), scheme(Scheme::Niba), scheme(Scheme::Redfield),
                                        scheme(Scheme::Redfield, RedfieldForm::Population)}) {
                    const auto m = make_model(s, opt);
                    const auto g = make_generator(m, Terminal::R);
                    const auto ss = steady_state(g);
                    const double a = *m->analytic_current(Terminal::R, ss);
                    const double c = cumulant(g, 1, opt.chi_step, &ss).current;
                    fcs = std::max(fcs, std::abs(c - a) / std::abs(a));
                    if (opt.scheme == Scheme::Niba) {
                        const auto& nm = static_cast<const NibaModel&>(*m);
                        pop = std::max(pop, (analytic_niba_populations(nm.table()) - ss.population()).cwiseAbs().maxCoeff());
                        const double i = niba_current(nm.table(), ss.population());
                        loops = std::max(loops, std::abs(loop_currents(nm.table(), s.u).total - i) / std::abs(i));
                    }
                    if (alpha == 0.05 && opt.scheme != Scheme::Niba) {
                        CMat4 rho0 = CMat4::Zero();
                        rho0(0, 0) = 1.0;
                        const auto tr = propagate_dynamics(g, rho0, {0.0, 1e2, 1e4, 1e5});
                        prop = std::max(prop, (tr.rho.back() - ss.rho).cwiseAbs().maxCoeff());
                    }
                }
            }
        o.add(pop < 1e-10, "NIBA closed-form populations vs null space: " + num(pop) + " (tol 1e-10)");
        o.add(loops < 1e-10, "NIBA current vs loop-current form, relative: " + num(loops) + " (tol 1e-10)");
        o.add(fcs < 1e-6, "first cumulant vs analytic current, all schemes, relative: " + num(fcs) + " (tol 1e-6)");
        o.add(prop < 1e-8, "propagated state vs null-space state: " + num(prop) + " (tol 1e-8)");
    });

    criterion(6, "invariant suite (validate, small grid)", [&](Outcome& o) {
        const auto rep = validate::run(validate::Grid::Small);
        for (const auto& r : rep.rows)
            o.add(r.pass, r.suite + ": " + r.check + ": " + num(r.max_residual) + " (tol " + num(r.tolerance) + ")");
        o.add(rep.seconds < 300.0, "wall-clock " + num(rep.seconds) + " s (budget 300 s)");
    });

    criterion(7, "reproduce fig3 twice gives identical numeric payloads", [&](Outcome& o) {
        const fs::path root = fs::temp_directory_path() / ("qheat_acceptance_" + std::to_string(::getpid()));
        const fs::path a = root / "a", b = root / "b";
        const int ca = run_cli("reproduce fig3 -o " + a.string());
        const int cb = run_cli("reproduce fig3 -o " + b.string() + " --threads 1");
        o.add(ca == 0 && cb == 0, "exit codes " + std::to_string(ca) + " and " + std::to_string(cb));
        std::size_t files = 0;
        for (const auto& e : fs::directory_iterator(a)) {
            const fs::path other = b / e.path().filename();
            const bool same = fs::exists(other) && payload(e.path()) == payload(other);
            o.add(same, e.path().filename().string() + (same ? " identical" : " differs"));
            ++files;
        }
        o.add(files > 0, std::to_string(files) + " files compared");
        fs::remove_all(root);
    });

    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    std::printf("acceptance: %d of 7 criteria failed, %.1f s\n", g_failed, total);
    return g_failed == 0 ? 0 : 1;
}
