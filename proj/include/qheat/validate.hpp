#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qheat/bath.hpp"
#include "qheat/rates.hpp"
#include "qheat/solvers.hpp"
#include "qheat/transport.hpp"

namespace qheat::validate {

enum class Grid { Small, Full };

/// Deliberate defects for exercising the report.
struct Faults {
    bool flip_rate_sign = false;  // evaluates forward rates at -E
};

struct Row {
    std::string suite;
    std::string check;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    double seconds = 0.0;
    int samples = 0;
};

struct Report {
    std::vector<Row> rows;
    double seconds = 0.0;
    bool pass() const {
        for (const auto& r : rows)
            if (!r.pass) return false;
        return true;
    }
};

struct Point {
    double alpha, t_l, t_r, epsilon, u;
};

inline std::vector<Point> grid_points(Grid g) {
    std::vector<double> alphas = g == Grid::Small ? std::vector<double>{0.05, 5.0}
                                                  : std::vector<double>{0.01, 0.1, 1.0, 5.0, 10.0};
    std::vector<std::pair<double, double>> temps =
        g == Grid::Small ? std::vector<std::pair<double, double>>{{1.5, 0.5}}
                         : std::vector<std::pair<double, double>>{{1.5, 0.5}, {2.0, 2.0}, {3.0, 1.0}};
    std::vector<double> eps = {0.0, 1.0};
    std::vector<double> us = g == Grid::Small ? std::vector<double>{0.1} : std::vector<double>{0.1, 0.8};
    std::vector<Point> out;
    for (double a : alphas)
        for (auto [tl, tr] : temps)
            for (double e : eps)
                for (double u : us) out.push_back({a, tl, tr, e, u});
    return out;
}

inline SystemSpec two_terminal(const Point& p) {
    SystemSpec s;
    s.u = p.u;
    s.left = {p.epsilon, 1.0};
    s.right = {p.epsilon, 1.0};
    s.baths[Terminal::L] = {p.alpha, 5.0, p.t_l};
    s.baths[Terminal::R] = {p.alpha, 5.0, p.t_r};
    return s;
}

inline SystemSpec three_terminal(double alpha_l, double alpha_r, double t_r) {
    SystemSpec s;
    s.topology = Topology::ThreeTerminal;
    s.baths[Terminal::Lh] = {alpha_l, 5.0, 2.0};
    s.baths[Terminal::Lc] = {alpha_l, 5.0, 0.2};
    s.baths[Terminal::R] = {alpha_r, 5.0, t_r};
    return s;
}

/// Accumulates the worst residual of one check.
class Tracker {
public:
    Tracker(std::string suite, std::string check, double tol)
        : row_{std::move(suite), std::move(check), 0.0, tol}, start_(std::chrono::steady_clock::now()) {}

    void add(double residual) {
        ++row_.samples;
        if (!std::isfinite(residual)) residual = std::numeric_limits<double>::infinity();
        row_.max_residual = std::max(row_.max_residual, residual);
    }

    Row done() {
        row_.pass = row_.samples > 0 && row_.max_residual < row_.tolerance;
        row_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        return row_;
    }

private:
    Row row_;
    std::chrono::steady_clock::time_point start_;
};

inline const Scheme kSchemes[3] = {Scheme::Redfield, Scheme::NePtre, Scheme::Niba};

inline Report run(Grid grid = Grid::Small, Faults faults = {}) {
    const auto t_start = std::chrono::steady_clock::now();
    const auto pts = grid_points(grid);
    Report rep;

    {
        Tracker t("kms", "NIBA kappa(E)/kappa(-E) = exp(E/T)", 1e-6);
        for (const auto& p : pts) {
            const auto s = two_terminal(p);
            for (Side side : {Side::Left, Side::Right}) {
                const auto b = s.side_baths(side).front();
                rates::NibaRateEngine eng(bath::BathKernel(b), 1.0);
                const auto en = local_basis_energies(s.u, s.left.epsilon, s.right.epsilon);
                const auto& flips = side == Side::Left ? rates::kLeftFlips : rates::kRightFlips;
                for (auto [i, j] : flips) {
                    const double e = en[i] - en[j];
                    if (std::abs(e) < 1e-12) continue;
                    const double fwd = eng.kappa(faults.flip_rate_sign ? -e : e);
                    const double ratio = fwd / eng.kappa(-e);
                    t.add(std::abs(ratio / std::exp(e / b.temperature) - 1.0));
                }
            }
        }
        rep.rows.push_back(t.done());
    }
    {
        Tracker t("kms", "Redfield emission/absorption weight ratio = exp(w/T)", 1e-10);
        for (const auto& p : pts)
            for (double w : {0.3, 1.0, 2.2}) {
                const bath::BathSpec b{p.alpha, 5.0, p.t_r};
                const double up = bath::emission_weight(b, faults.flip_rate_sign ? -w : w);
                t.add(std::abs(up / bath::emission_weight(b, -w) / std::exp(w / b.temperature) - 1.0));
            }
        rep.rows.push_back(t.done());
    }
    {
        Tracker t("renormalization", "eta^2 exp(Q(0)) = 1", 1e-10);
        for (const auto& p : pts)
            for (double temp : {p.t_l, p.t_r}) {
                const bath::BathSpec b{p.alpha, 5.0, temp};
                const double eta = bath::renorm_factor(b, bath::PhaseMethod::Quadrature);
                t.add(std::abs(eta * eta * std::exp(bath::phase_closed_form(b, 0.0).real()) - 1.0));
            }
        rep.rows.push_back(t.done());
    }

    Tracker trace("generator", "trace preservation |1^T L(0)|", 1e-10);
    Tracker g0("generator", "G(0) = 0", 1e-10);
    Tracker noise("cumulants", "noise cumulant >= -1e-8 (max negative part)", 1e-8);
    Tracker fcs("oracles", "FCS first cumulant vs analytic current (relative)", 1e-6);
    Tracker pop("oracles", "NIBA analytic populations vs null space", 1e-10);
    Tracker loops("oracles", "NIBA current vs loop-current form (relative)", 1e-10);
    Tracker flux("oracles", "Redfield population flux vs emission formula", 1e-10);
    for (const auto& p : pts) {
        const auto s = two_terminal(p);
        for (Scheme sc : kSchemes) {
            SolverOptions o;
            o.scheme = sc;
            if (sc == Scheme::Redfield) o.redfield_form = RedfieldForm::Population;
            const auto m = make_model(s, o);
            const auto g = make_generator(m, Terminal::R);
            const CMat l0 = g(0.0);
            trace.add((superop::trace_row(g.dim) * l0).cwiseAbs().maxCoeff());
            const auto ss = steady_state(g);
            g0.add(std::abs(cgf(g, cplx(0.0, 0.0), ss)));
            const auto c = cumulant(g, 2, o.chi_step, &ss);
            noise.add(std::max(0.0, -c.noise));
            if (const auto a = m->analytic_current(Terminal::R, ss)) {
                const double scale = std::max(std::abs(*a), 1e-300);
                if (std::abs(*a) > 1e-14) fcs.add(std::abs(c.current - *a) / scale);
            }
            if (sc == Scheme::Niba) {
                const auto& nm = static_cast<const NibaModel&>(*m);
                pop.add((analytic_niba_populations(nm.table()) - ss.population()).cwiseAbs().maxCoeff());
                const double i = niba_current(nm.table(), ss.population());
                const double lc = loop_currents(nm.table(), s.u).total;
                loops.add(std::abs(i - lc) / std::max(std::abs(i), 1e-30));
            }
            if (sc == Scheme::Redfield) {
                const auto& rm = static_cast<const RedfieldPopulationModel&>(*m);
                flux.add(std::abs(rm.emission_formula(Terminal::R, ss.population()) -
                                  rm.net_flux(Terminal::R, ss.population())));
            }
        }
    }
    for (Tracker* t : {&trace, &g0, &noise, &fcs, &pop, &loops, &flux}) rep.rows.push_back(t->done());

    {
        Tracker t("oracles", "rotated-contour half-Fourier vs real-axis panels (relative)", 1e-8);
        for (double a : {0.05, 5.0})
            for (double w : {-1.2, 0.7, 2.0}) {
                const bath::BathKernel k(bath::BathSpec{a, 5.0, 1.5});
                auto f = [&](cplx tau) { return bath::niba_kernel_decaying(k.eta_sq(), 1.0, k.phase(tau)); };
                const cplx rot = quad::half_fourier<cplx>(f, w, k.scales()).value;
                const cplx pan = quad::half_fourier_panels(f, w, 0.1).value;
                t.add(std::abs(rot - pan) / std::abs(pan));
            }
        rep.rows.push_back(t.done());
    }

    std::vector<std::array<double, 3>> three = {{0.05, 0.05, 0.5}, {5.0, 5.0, 0.5}, {5.0, 5.0, 1.0},
                                                {0.05, 3.0, 0.5},  {3.0, 0.1, 0.5}};
    if (grid == Grid::Small) three.resize(3);
    for (Scheme sc : {Scheme::Niba, Scheme::NePtre}) {
        Tracker t("energy_conservation", std::string("three-terminal |sum I_v| [") + to_string(sc) + "]", 1e-8);
        for (const auto& [al, ar, tr] : three) {
            SolverOptions o;
            o.scheme = sc;
            t.add(std::abs(transport::three_terminal_currents(three_terminal(al, ar, tr), o).sum()));
        }
        rep.rows.push_back(t.done());
    }

    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rep;
}

}  // namespace qheat::validate
