#include "catch_amalgamated.hpp"

#include "qheat/bath.hpp"
#include "qheat/quadrature.hpp"

using namespace qheat;
using namespace qheat::bath;

TEST_CASE("spectral density and Bose factor", "[bath]") {
    const BathSpec b{0.5, 5.0, 1.0};
    CHECK(spectral_density(b, 0.0) == 0.0);
    CHECK(spectral_density_odd(b, -1.3) == -spectral_density(b, 1.3));
    CHECK_THROWS_AS(spectral_density(b, -1.0), Error);
    CHECK_THROWS_AS(bose_occupation(1.0, 0.0), Error);
    CHECK_THAT(bose_occupation(1.0, 1.0), Catch::Matchers::WithinRel(1.0 / (std::exp(1.0) - 1.0), 1e-14));
    CHECK(emission_weight(b, 0.0) == 0.0);
}

TEST_CASE("closed-form phase agrees with frequency quadrature", "[bath]") {
    for (double alpha : {0.05, 5.0})
        for (double temp : {0.3, 1.5})
            for (double tau : {0.0, 0.1, 0.7, 3.0, 12.0}) {
                const BathSpec b{alpha, 5.0, temp};
                const cplx c = phase_closed_form(b, cplx(tau, 0.0));
                const cplx q = phase_quadrature(b, tau);
                CHECK(std::abs(c - q) <= 1e-8 * std::max(1.0, std::abs(q)));
            }
}

TEST_CASE("phase is Hermitian in time", "[bath]") {
    const BathSpec b{1.0, 5.0, 0.8};
    for (double tau : {0.2, 1.0, 5.0})
        CHECK(std::abs(phase_closed_form(b, cplx(-tau, 0.0)) - std::conj(phase_closed_form(b, cplx(tau, 0.0)))) < 1e-13);
}

TEST_CASE("renormalization factor", "[bath]") {
    for (double alpha : {0.01, 1.0, 5.0})
        for (double temp : {0.2, 2.0}) {
            const BathSpec b{alpha, 5.0, temp};
            const double closed = renorm_factor(b, PhaseMethod::ClosedForm);
            const double quad = renorm_factor(b, PhaseMethod::Quadrature);
            CHECK_THAT(closed, Catch::Matchers::WithinRel(quad, 1e-10));
            CHECK_THAT(closed * closed * std::exp(phase_closed_form(b, 0.0).real()), Catch::Matchers::WithinAbs(1.0, 1e-12));
            CHECK(closed > 0.0);
            CHECK(closed <= 1.0);
        }
    CHECK(renorm_factor(BathSpec{0.0, 5.0, 1.0}) == 1.0);
}

TEST_CASE("NIBA kernel limits", "[bath]") {
    const BathKernel k(BathSpec{2.0, 5.0, 1.0});
    CHECK(std::abs(niba_kernel(k, 1.0, 0.0) - cplx(0.25, 0.0)) < 1e-14);
    const cplx late = niba_kernel(k, 1.0, 200.0);
    CHECK(std::abs(late - cplx(0.25 * k.eta_sq(), 0.0)) < 1e-6);
}

TEST_CASE("composite kernel adds the phases", "[bath]") {
    const BathSpec hot{1.0, 5.0, 2.0}, cold{1.0, 5.0, 0.2};
    const BathKernel k(std::vector<BathSpec>{hot, cold});
    for (double tau : {0.0, 0.5, 4.0})
        CHECK(std::abs(k.phase(tau) - composite_phase(hot, cold, tau)) < 1e-14);
    CHECK_THAT(k.eta(), Catch::Matchers::WithinRel(renorm_factor(hot) * renorm_factor(cold), 1e-10));
    CHECK_THROWS_AS(BathKernel(std::vector<BathSpec>{}), Error);
}

TEST_CASE("invalid baths are rejected", "[bath]") {
    CHECK_THROWS_AS((BathSpec{-1.0, 5.0, 1.0}.validate()), Error);
    CHECK_THROWS_AS((BathSpec{1.0, 0.0, 1.0}.validate()), Error);
    CHECK_THROWS_AS((BathSpec{1.0, 5.0, 0.0}.validate()), Error);
}
