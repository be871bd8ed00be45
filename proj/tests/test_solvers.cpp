#include "catch_amalgamated.hpp"

#include "qheat/solvers.hpp"

using namespace qheat;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SystemSpec device(double alpha, double t_l, double t_r, double eps = 1.0, double u = 0.1) {
    SystemSpec s;
    s.u = u;
    s.left = {eps, 1.0};
    s.right = {eps, 1.0};
    s.baths[Terminal::L] = {alpha, 5.0, t_l};
    s.baths[Terminal::R] = {alpha, 5.0, t_r};
    return s;
}

SolverOptions options(Scheme s, RedfieldForm f = RedfieldForm::Full) {
    SolverOptions o;
    o.scheme = s;
    o.redfield_form = f;
    return o;
}

const SolverOptions kAll[] = {options(Scheme::NePtre), options(Scheme::Niba), options(Scheme::Redfield),
                              options(Scheme::Redfield, RedfieldForm::Population)};

}  // namespace

TEST_CASE("generators preserve the trace", "[solvers]") {
    for (const auto& o : kAll) {
        const auto g = make_generator(make_model(device(0.5, 1.5, 0.5), o), Terminal::R);
        CHECK((superop::trace_row(g.dim) * g(0.0)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("steady states are physical", "[solvers]") {
    for (const auto& o : kAll) {
        const auto g = make_generator(make_model(device(0.5, 1.5, 0.5), o), Terminal::R);
        const auto ss = steady_state(g);
        CHECK(ss.residual < 1e-10);
        CHECK_THAT(ss.rho.trace().real(), WithinAbs(1.0, 1e-12));
        CHECK((ss.rho - ss.rho.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
        Eigen::SelfAdjointEigenSolver<CMat4> es(ss.rho);
        CHECK(es.eigenvalues().minCoeff() > -1e-10);
        CHECK(std::abs(cgf(g, cplx(0.0, 0.0), ss)) < 1e-10);
    }
}

TEST_CASE("first cumulant equals the analytic current", "[solvers]") {
    for (const auto& o : kAll)
        for (double alpha : {0.05, 2.0}) {
            const auto m = make_model(device(alpha, 1.5, 0.5), o);
            const auto g = make_generator(m, Terminal::R);
            const auto ss = steady_state(g);
            const auto a = m->analytic_current(Terminal::R, ss);
            REQUIRE(a.has_value());
            const auto c = cumulant(g, 2, o.chi_step, &ss);
            CHECK_THAT(c.current, WithinRel(*a, 1e-6));
            CHECK(c.noise > 0.0);
            CHECK(*a > 0.0);
        }
}

TEST_CASE("equilibrium carries no current", "[solvers]") {
    for (const auto& o : kAll)
        for (double alpha : {0.05, 0.5, 5.0}) {
            auto at = [&](double t_l, double t_r) {
                const auto m = make_model(device(alpha, t_l, t_r), o);
                return *m->analytic_current(Terminal::R, steady_state(make_generator(m, Terminal::R)));
            };
            const double eq = at(1.0, 1.0);
            if (o.scheme == Scheme::NePtre)
                CHECK(std::abs(eq) < 1e-5 * std::abs(at(1.5, 0.5)));
            else
                CHECK(std::abs(eq) < 1e-15);
        }
}

TEST_CASE("NIBA closed forms", "[solvers][niba]") {
    for (double eps : {0.0, 1.0})
        for (double alpha : {0.5, 5.0}) {
            const auto m = make_model(device(alpha, 1.5, 0.5, eps), options(Scheme::Niba));
            const auto& nm = static_cast<const NibaModel&>(*m);
            const auto ss = steady_state(make_generator(m, Terminal::R));
            CHECK((analytic_niba_populations(nm.table()) - ss.population()).cwiseAbs().maxCoeff() < 1e-10);
            const double i = niba_current(nm.table(), ss.population());
            CHECK_THAT(loop_currents(nm.table(), 0.1).total, WithinRel(i, 1e-10));
            CHECK_THAT(*m->analytic_current(Terminal::R, ss), WithinRel(i, 1e-10));
            const auto parts = niba_current_components(nm.table(), ss.population());
            CHECK_THAT(parts[0] - parts[1], WithinRel(i, 1e-12));
        }
}

TEST_CASE("NIBA loop currents vanish without interaction", "[solvers][niba]") {
    const auto m = make_model(device(5.0, 1.5, 0.5, 1.0, 0.0), options(Scheme::Niba));
    const auto& nm = static_cast<const NibaModel&>(*m);
    CHECK(loop_currents(nm.table(), 0.0).total == 0.0);
    const auto ss = steady_state(make_generator(m, Terminal::R));
    CHECK(std::abs(niba_current(nm.table(), ss.population())) < 1e-12);
}

TEST_CASE("Redfield population flux equals the emission formula", "[solvers][redfield]") {
    const auto m = make_model(device(0.05, 1.5, 0.5), options(Scheme::Redfield, RedfieldForm::Population));
    const auto& rm = static_cast<const RedfieldPopulationModel&>(*m);
    const auto ss = steady_state(make_generator(m, Terminal::R));
    CHECK_THAT(rm.emission_formula(Terminal::R, ss.population()), WithinRel(rm.net_flux(Terminal::R, ss.population()), 1e-10));
}

TEST_CASE("full and population Redfield agree at weak coupling", "[solvers][redfield]") {
    const auto s = device(0.002, 1.5, 0.5);
    const auto full = make_model(s, options(Scheme::Redfield));
    const auto pop = make_model(s, options(Scheme::Redfield, RedfieldForm::Population));
    const double a = *full->analytic_current(Terminal::R, steady_state(make_generator(full, Terminal::R)));
    const double b = *pop->analytic_current(Terminal::R, steady_state(make_generator(pop, Terminal::R)));
    CHECK_THAT(a, WithinRel(b, 1e-2));
}

TEST_CASE("time evolution relaxes to the null-space state", "[solvers][dynamics]") {
    const auto g = build_redfield_generator(device(0.05, 1.5, 0.5), RedfieldForm::Full, Terminal::R);
    const auto ss = steady_state(g);
    CMat4 rho0 = CMat4::Zero();
    rho0(0, 0) = 1.0;
    const auto tr = propagate_dynamics(g, rho0, {0.0, 10.0, 1e3, 4e4});
    REQUIRE(tr.rho.size() == 4);
    for (const auto& r : tr.rho) CHECK_THAT(r.trace().real(), WithinAbs(1.0, 1e-9));
    CHECK((tr.rho.back() - ss.rho).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("no tunneling leaves only coherent motion", "[solvers]") {
    auto s = device(0.5, 1.5, 0.5);
    s.left.delta = 0.0;
    s.right.delta = 0.0;
    const auto m = make_model(s, options(Scheme::NePtre));
    const CMat l = m->generator(Terminal::R, 0.0);
    const auto& cm = static_cast<const detail::ChannelModel&>(*m);
    CMat4 h = CMat4::Zero();
    for (int i = 0; i < 4; ++i) h(i, i) = cm.eig().values(i);
    const CMat coherent = cplx(0.0, -1.0) * (superop::left(h) - superop::right(h));
    CHECK((l - coherent).cwiseAbs().maxCoeff() < 1e-14);
    CHECK_THROWS_AS(steady_state(make_generator(m, Terminal::R)), Error);
}

TEST_CASE("counting field validation", "[solvers]") {
    const auto m = make_model(device(0.5, 1.5, 0.5), options(Scheme::Niba));
    CHECK_THROWS_AS(make_generator(m, Terminal::Lh), Error);
    const auto g = make_generator(m, Terminal::R);
    CHECK_THROWS_AS(cumulant(g, 3), Error);
    const auto other = steady_state(build_redfield_generator(device(0.5, 1.5, 0.5), RedfieldForm::Full, Terminal::R));
    CHECK_THROWS_AS(m->analytic_current(Terminal::R, other), Error);
}

TEST_CASE("flux current matches the cumulant", "[solvers]") {
    const auto g = build_neptre_generator(device(1.0, 1.5, 0.5), SolverOptions{}, Terminal::R);
    const auto ss = steady_state(g);
    CHECK_THAT(flux_current(g, ss), WithinRel(cumulant(g, 1, 1e-4, &ss).current, 1e-6));
}
