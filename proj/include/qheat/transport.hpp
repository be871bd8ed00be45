#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qheat/error.hpp"
#include "qheat/model.hpp"
#include "qheat/solvers.hpp"

namespace qheat::transport {

// ---------------------------------------------------------------- concurrency

/// Worker count from QHEAT_THREADS (0 or unset = hardware concurrency).
inline int default_threads() {
    int n = 0;
    if (const char* env = std::getenv("QHEAT_THREADS")) n = std::atoi(env);
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    return std::max(1, n);
}

/// Runs f(i) for i in [0, n) on up to `threads` workers. Each index is
/// written by exactly one worker, so results stored by index are ordered.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        });
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------- sweeps

enum class SweepAxis { DeltaT, AlphaBoth, AlphaRight, TR, Epsilon, U };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::DeltaT: return "delta_t";
        case SweepAxis::AlphaBoth: return "alpha";
        case SweepAxis::AlphaRight: return "alpha_r";
        case SweepAxis::TR: return "t_r";
        case SweepAxis::Epsilon: return "epsilon";
        case SweepAxis::U: return "u";
    }
    return "?";
}

struct SweepSpec {
    SystemSpec base;
    SweepAxis axis = SweepAxis::DeltaT;
    std::vector<double> grid;
    SolverOptions solver;
    bool normalize = false;
    bool noise = false;
    double t0 = 2.0;  // mean temperature for DeltaT sweeps
    int threads = 1;
};

/// Device at grid value x. DeltaT places T_L = t0 + x/2, T_R = t0 - x/2.
inline SystemSpec apply_axis(const SystemSpec& base, SweepAxis axis, double x, double t0) {
    SystemSpec s = base;
    switch (axis) {
        case SweepAxis::DeltaT:
            if (s.topology != Topology::TwoTerminal)
                throw Error(ErrorKind::InvalidArgument, "delta_t sweeps need a two-terminal device");
            s.baths.at(Terminal::L).temperature = t0 + 0.5 * x;
            s.baths.at(Terminal::R).temperature = t0 - 0.5 * x;
            break;
        case SweepAxis::AlphaBoth:
            for (auto& [t, b] : s.baths) b.alpha = x;
            break;
        case SweepAxis::AlphaRight: s.baths.at(Terminal::R).alpha = x; break;
        case SweepAxis::TR: s.baths.at(Terminal::R).temperature = x; break;
        case SweepAxis::Epsilon:
            s.left.epsilon = x;
            s.right.epsilon = x;
            break;
        case SweepAxis::U: s.u = x; break;
    }
    return s;
}

struct PointResult {
    std::map<Terminal, double> currents;
    std::optional<double> noise;  // second cumulant of the R terminal
    double residual = 0.0;
};

/// Current into R (and the other terminals) at one device point.
inline double terminal_current(const std::shared_ptr<const Model>& m, Terminal t, const SteadyState& ss) {
    if (auto a = m->analytic_current(t, ss)) return *a;
    return flux_current(make_generator(m, t), ss);
}

inline PointResult solve_point(const SystemSpec& spec, const SolverOptions& opt, bool noise = false) {
    const auto m = make_model(spec, opt);
    const auto g = make_generator(m, Terminal::R);
    const SteadyState ss = steady_state(g);
    PointResult r;
    r.residual = ss.residual;
    for (Terminal t : spec.terminals()) r.currents[t] = terminal_current(m, t, ss);
    if (noise) r.noise = cumulant(g, 2, opt.chi_step, &ss).noise;
    return r;
}

struct SweepRow {
    double x = 0.0;
    double current = 0.0;  // into R
    double normalized = 0.0;
    std::map<Terminal, double> currents;
    std::optional<double> noise;
    double residual = 0.0;
    bool ok = true;
    std::string error;
};

struct SweepTable {
    SweepAxis axis = SweepAxis::DeltaT;
    Scheme scheme = Scheme::NePtre;
    std::vector<SweepRow> rows;

    std::vector<double> xs() const {
        std::vector<double> v;
        for (const auto& r : rows)
            if (r.ok) v.push_back(r.x);
        return v;
    }
    std::vector<double> currents(bool normalized = false) const {
        std::vector<double> v;
        for (const auto& r : rows)
            if (r.ok) v.push_back(normalized ? r.normalized : r.current);
        return v;
    }
    std::size_t failures() const {
        return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.ok; }));
    }
};

inline SweepTable current_sweep(const SweepSpec& spec) {
    SweepTable out;
    out.axis = spec.axis;
    out.scheme = spec.solver.scheme;
    out.rows.resize(spec.grid.size());
    parallel_for(spec.grid.size(), spec.threads, [&](std::size_t i) {
        SweepRow& row = out.rows[i];
        row.x = spec.grid[i];
        try {
            const auto p = solve_point(apply_axis(spec.base, spec.axis, row.x, spec.t0), spec.solver, spec.noise);
            row.currents = p.currents;
            row.current = p.currents.at(Terminal::R);
            row.noise = p.noise;
            row.residual = p.residual;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
    });
    double peak = 0.0;
    for (const auto& r : out.rows)
        if (r.ok) peak = std::max(peak, std::abs(r.current));
    for (auto& r : out.rows)
        if (r.ok) r.normalized = (spec.normalize && peak > 0.0) ? r.current / peak : r.current;
    return out;
}

// ---------------------------------------------------------------- NDTC

struct NdtcReport {
    bool has_ndtc = false;
    std::vector<double> slopes;
    std::optional<double> turnover;  // vertex of the quadratic through the first local maximum
    std::optional<std::size_t> peak_index;
};

/// Negative slopes below -rel_tol * max|y| / span count as NDTC.
inline NdtcReport detect_ndtc(const std::vector<double>& x, const std::vector<double>& y, double rel_tol = 1e-6) {
    if (x.size() != y.size()) throw Error(ErrorKind::InvalidArgument, "grid and values differ in length");
    const std::size_t n = x.size();
    if (n < 4) throw Error(ErrorKind::TooFewPoints, "NDTC detection needs at least 4 points");
    NdtcReport r;
    r.slopes.resize(n);
    r.slopes[0] = (y[1] - y[0]) / (x[1] - x[0]);
    r.slopes[n - 1] = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i) r.slopes[i] = (y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1]);

    double scale = 0.0;
    for (double v : y) scale = std::max(scale, std::abs(v));
    const double tol = rel_tol * scale / std::abs(x[n - 1] - x[0]);
    r.has_ndtc = std::any_of(r.slopes.begin(), r.slopes.end(), [&](double s) { return s < -tol; });

    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(y[i] >= y[i - 1] && y[i] > y[i + 1])) continue;
        r.peak_index = i;
        const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
        const double d1 = (y[i] - y[i - 1]) / (x1 - x0), d2 = (y[i + 1] - y[i]) / (x2 - x1);
        const double a = (d2 - d1) / (x2 - x0);
        r.turnover = a < 0.0 ? 0.5 * (x0 + x1) - d1 / (2.0 * a) : x1;
        break;
    }
    return r;
}

inline NdtcReport detect_ndtc(const SweepTable& t, double rel_tol = 1e-6) {
    return detect_ndtc(t.xs(), t.currents(), rel_tol);
}

// ---------------------------------------------------------------- decompositions

inline LoopCurrents loop_decomposition(const rates::NibaRateTable& table, double u) {
    require_symmetric(table);
    return loop_currents(table, u);
}

/// Net pairwise transition currents J_nm (0-based eigenstate indices, n < m)
/// of the population-form Redfield current into terminal t.
inline std::map<std::pair<int, int>, double> transition_current_decomposition(const Model& model,
                                                                               const SteadyState& ss,
                                                                               Terminal t = Terminal::R) {
    const auto* pm = dynamic_cast<const RedfieldPopulationModel*>(&model);
    if (!pm || ss.scheme != Scheme::Redfield)
        throw Error(ErrorKind::SchemeMismatch, "transition currents need the population-form Redfield scheme");
    const auto p = ss.population();
    const auto& op = pm->full().channel(t).ops[0].op;
    const auto& e = pm->eig().values;
    const auto& b = model.spec().bath(t);
    auto directed = [&](int n, int m) {
        const double w = e(m) - e(n);
        return 0.5 * w * bath::emission_weight(b, w) * std::norm(op(n, m)) * p(m);
    };
    std::map<std::pair<int, int>, double> out;
    for (int n = 0; n < 4; ++n)
        for (int m = n + 1; m < 4; ++m) out[{n, m}] = directed(n, m) + directed(m, n);
    return out;
}

// ---------------------------------------------------------------- three terminals

struct ThreeTerminalCurrents {
    double lh = 0.0, lc = 0.0, r = 0.0;
    double residual = 0.0;
    double sum() const { return lh + lc + r; }
};

inline ThreeTerminalCurrents three_terminal_currents(const SystemSpec& spec, const SolverOptions& opt) {
    if (spec.topology != Topology::ThreeTerminal)
        throw Error(ErrorKind::InvalidArgument, "three_terminal_currents needs a three-terminal device");
    const auto p = solve_point(spec, opt);
    return {p.currents.at(Terminal::Lh), p.currents.at(Terminal::Lc), p.currents.at(Terminal::R), p.residual};
}

struct AmplificationRow {
    double t_r = 0.0;
    ThreeTerminalCurrents currents;
    double d_lh = 0.0, d_lc = 0.0, d_r = 0.0;  // d I / d T_R
    double beta_lh = 0.0;
    double beta_lc = 0.0;   // from the directly computed I_Lc slope
    int theta = 1;          // sign of dI_Lh/dI_R
    double identity_residual = 0.0;  // |beta_lc - |beta_lh + theta||
    bool divergent = false;
    bool ok = true;
    std::string error;
};

struct AmplificationReport {
    std::vector<AmplificationRow> rows;
    double max_beta_lh(bool finite_only = false) const {
        double m = 0.0;
        for (const auto& r : rows)
            if (r.ok && !(finite_only && r.divergent)) m = std::max(m, r.beta_lh);
        return m;
    }
    double max_identity_residual() const {
        double m = 0.0;
        for (const auto& r : rows)
            if (r.ok && !r.divergent) m = std::max(m, r.identity_residual);
        return m;
    }
    std::optional<double> turnover() const {
        for (std::size_t i = 0; i + 1 < rows.size(); ++i)
            if (rows[i].ok && rows[i + 1].ok && rows[i].d_r > 0.0 && rows[i + 1].d_r <= 0.0) {
                const double a = rows[i].d_r, b = rows[i + 1].d_r;
                return rows[i].t_r + (rows[i + 1].t_r - rows[i].t_r) * a / (a - b);
            }
        return std::nullopt;
    }
};

/// beta factors from T_R central differences with one Richardson step.
inline AmplificationReport amplification_scan(const SystemSpec& spec, const std::vector<double>& tr_grid,
                                              const SolverOptions& opt, double dt_step = 1e-3, int threads = 1) {
    if (spec.topology != Topology::ThreeTerminal)
        throw Error(ErrorKind::InvalidArgument, "amplification needs a three-terminal device");
    AmplificationReport rep;
    rep.rows.resize(tr_grid.size());
    parallel_for(tr_grid.size(), threads, [&](std::size_t i) {
        AmplificationRow& row = rep.rows[i];
        row.t_r = tr_grid[i];
        try {
            auto at = [&](double tr) { return three_terminal_currents(apply_axis(spec, SweepAxis::TR, tr, 0.0), opt); };
            row.currents = at(row.t_r);
            const auto p1 = at(row.t_r + dt_step), m1 = at(row.t_r - dt_step);
            const auto p2 = at(row.t_r + 0.5 * dt_step), m2 = at(row.t_r - 0.5 * dt_step);
            auto der = [&](double ThreeTerminalCurrents::*f) {
                const double coarse = (p1.*f - m1.*f) / (2.0 * dt_step);
                const double fine = (p2.*f - m2.*f) / dt_step;
                return (4.0 * fine - coarse) / 3.0;
            };
            row.d_lh = der(&ThreeTerminalCurrents::lh);
            row.d_lc = der(&ThreeTerminalCurrents::lc);
            row.d_r = der(&ThreeTerminalCurrents::r);
            row.beta_lh = std::abs(row.d_lh / row.d_r);
            row.beta_lc = std::abs(row.d_lc / row.d_r);
            row.theta = (row.d_lh / row.d_r) >= 0.0 ? 1 : -1;
            row.identity_residual = std::abs(row.beta_lc - std::abs(row.beta_lh + row.theta));
            row.divergent = std::abs(row.d_r) < 1e-10 * std::abs(row.d_lh);
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
    });
    for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) {
        auto& a = rep.rows[i];
        auto& b = rep.rows[i + 1];
        if (a.ok && b.ok && (a.d_r > 0.0) != (b.d_r > 0.0)) a.divergent = b.divergent = true;
    }
    return rep;
}

// ---------------------------------------------------------------- partial coupling

struct PartialCouplingRow {
    double alpha_r = 0.0;
    NdtcReport ndtc;
    SweepTable sweep;
};

struct PartialCouplingReport {
    std::vector<PartialCouplingRow> rows;
    std::optional<double> onset;  // smallest alpha_R with NDTC
};

inline PartialCouplingReport partial_coupling_scan(const SystemSpec& base, double alpha_l,
                                                   const std::vector<double>& alpha_r_grid,
                                                   const std::vector<double>& dt_grid, const SolverOptions& opt,
                                                   double t0 = 2.0, int threads = 1) {
    if (base.topology != Topology::TwoTerminal)
        throw Error(ErrorKind::InvalidArgument, "partial coupling scan needs a two-terminal device");
    PartialCouplingReport rep;
    for (double ar : alpha_r_grid) {
        SweepSpec s;
        s.base = base;
        s.base.baths.at(Terminal::L).alpha = alpha_l;
        s.base.baths.at(Terminal::R).alpha = ar;
        s.axis = SweepAxis::DeltaT;
        s.grid = dt_grid;
        s.solver = opt;
        s.normalize = true;
        s.t0 = t0;
        s.threads = threads;
        PartialCouplingRow row;
        row.alpha_r = ar;
        row.sweep = current_sweep(s);
        row.ndtc = detect_ndtc(row.sweep);
        if (row.ndtc.has_ndtc && (!rep.onset || ar < *rep.onset)) rep.onset = ar;
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

}  // namespace qheat::transport
