#include "catch_amalgamated.hpp"

#include "qheat/rates.hpp"

using namespace qheat;
using namespace qheat::rates;
using namespace qheat::bath;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("NIBA rate obeys detailed balance", "[rates]") {
    for (double alpha : {0.05, 1.0, 5.0})
        for (double temp : {0.5, 1.5}) {
            NibaRateEngine eng(BathKernel(BathSpec{alpha, 5.0, temp}), 1.0);
            for (double e : {0.2, 0.8, 1.2, 2.0})
                CHECK_THAT(eng.kappa(e) / eng.kappa(-e), WithinRel(std::exp(e / temp), 1e-6));
        }
}

TEST_CASE("weak-coupling NIBA rate reduces to the one-phonon rate", "[rates]") {
    const BathSpec b{1e-3, 5.0, 1.0};
    NibaRateEngine eng(BathKernel(b), 1.0);
    const double eta2 = std::pow(renorm_factor(b), 2);
    for (double e : {0.5, 1.2, -0.8}) {
        const double want = eta2 * 0.25 * phase_spectrum(b, e);
        CHECK_THAT(eng.kappa(e), WithinRel(want, 5e-3));
    }
}

TEST_CASE("polaron rate matches the two-phonon expansion at weak coupling", "[rates]") {
    const BathSpec b{2e-3, 5.0, 1.0};
    PolaronRateEngine eng(BathKernel(b), 1.0);
    for (double w : {0.6, 1.4})
        for (Sign s : {Sign::Plus, Sign::Minus}) {
            const double num = 2.0 * eng.gamma(s, w)[0].real();
            const double est = 2.0 * gamma_x_lowest_order(eng.kernel(), 1.0, w, s);
            CHECK_THAT(num, WithinRel(est, 2e-2));
        }
}

TEST_CASE("polaron rates satisfy KMS in the full transform", "[rates]") {
    const BathSpec b{1.0, 5.0, 0.7};
    PolaronRateEngine eng(BathKernel(b), 1.0);
    for (double w : {0.4, 1.1}) {
        const double up = 2.0 * eng.gamma(Sign::Plus, w)[0].real();
        const double down = 2.0 * eng.gamma(Sign::Plus, -w)[0].real();
        CHECK_THAT(up / down, WithinRel(std::exp(w / b.temperature), 1e-6));
    }
}

TEST_CASE("gamma minus is the conjugate mirror of gamma plus", "[rates]") {
    PolaronRateEngine eng(BathKernel(BathSpec{0.5, 5.0, 1.0}), 1.0);
    const auto p = eng.gamma(Sign::Plus, -0.9);
    const auto m = eng.gamma(Sign::Minus, 0.9);
    CHECK(std::abs(m[0] - std::conj(p[0])) < 1e-15);
    CHECK(std::abs(m[1] - std::conj(p[1])) < 1e-15);
}

TEST_CASE("shifted rate with zero shift equals the plain rate", "[rates]") {
    PolaronRateEngine eng(BathKernel(BathSpec{0.5, 5.0, 1.0}), 1.0);
    const auto a = eng.gamma(Sign::Plus, 0.7);
    const auto b = eng.gamma_shifted(Sign::Plus, 0.7, 0.0);
    CHECK(a == b);
    const std::vector<double> zero{0.0};
    CHECK(eng.gamma_partial(Sign::Plus, 0.7, zero) == a);
}

TEST_CASE("sequential rates", "[rates]") {
    const BathSpec b{0.1, 5.0, 1.0};
    const double e = 1.2;
    const double emit = redfield_sequential_rate(b, e, Direction::Emit);
    const double absorb = redfield_sequential_rate(b, e, Direction::Absorb);
    CHECK_THAT(emit / absorb, WithinRel(std::exp(e), 1e-12));
    CHECK_THAT(emit, WithinRel(0.5 * spectral_density(b, e) * (1.0 + bose_occupation(1.0, e)), 1e-14));
    CHECK_THROWS_AS(redfield_sequential_rate(b, 0.0, Direction::Emit), Error);
}

TEST_CASE("NIBA rate table covers single flips only", "[rates]") {
    SystemSpec s;
    s.baths[Terminal::L] = {1.0, 5.0, 1.5};
    s.baths[Terminal::R] = {1.0, 5.0, 0.5};
    NibaRateEngine l(BathKernel(s.bath(Terminal::L)), 1.0), r(BathKernel(s.bath(Terminal::R)), 1.0);
    const auto t = make_niba_table(s, l, r);
    for (auto [i, j] : kRightFlips) CHECK(t.right(i, j) > 0.0);
    for (auto [i, j] : kLeftFlips) CHECK(t.left(i, j) > 0.0);
    CHECK(t.right(0, 3) == 0.0);
    CHECK(t.left(0, 1) == 0.0);
    CHECK_THAT(t.right(0, 1) / t.right(1, 0), WithinRel(std::exp(t.gap(0, 1) / 0.5), 1e-6));
    CHECK(std::abs(niba_rate(r, 0.7, 0.3) - std::exp(cplx(0.0, 0.21)) * r.kappa(0.7)) < 1e-15);
}

TEST_CASE("rate clamping", "[rates]") {
    CHECK(clamp_rate(0.5, 1.0, 1e-12) == 0.5);
    const auto before = clamped_rate_count().load();
    CHECK(clamp_rate(-1e-14, 1.0, 1e-12) == 0.0);
    CHECK(clamped_rate_count().load() == before + 1);
    CHECK_THROWS_AS(clamp_rate(-1e-3, 1.0, 1e-12), Error);
}
