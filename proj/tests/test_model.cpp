#include "catch_amalgamated.hpp"

#include "qheat/model.hpp"

using namespace qheat;
using Catch::Matchers::WithinAbs;

namespace {

SystemSpec two_qubits(double u, double eps) {
    SystemSpec s;
    s.u = u;
    s.left = {eps, 1.0};
    s.right = {eps, 1.0};
    s.baths[Terminal::L] = {0.1, 5.0, 1.5};
    s.baths[Terminal::R] = {0.1, 5.0, 0.5};
    return s;
}

}  // namespace

TEST_CASE("lab Hamiltonian matches the local-basis layout", "[model]") {
    const Mat4 h = build_lab_hamiltonian(two_qubits(0.1, 1.0));
    Mat4 want;
    want << 1.1, 0.5, 0.5, 0.0,
            0.5, -0.1, 0.0, 0.5,
            0.5, 0.0, -0.1, 0.5,
            0.0, 0.5, 0.5, -0.9;
    CHECK((h - want).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("polaron Hamiltonian scales tunneling by eta", "[model]") {
    const Mat4 h = build_polaron_hamiltonian(two_qubits(0.1, 1.0), {0.4, 0.8});
    CHECK_THAT(h(0, 2), WithinAbs(0.2, 1e-15));
    CHECK_THAT(h(1, 3), WithinAbs(0.2, 1e-15));
    CHECK_THAT(h(0, 1), WithinAbs(0.4, 1e-15));
    CHECK_THAT(h(2, 3), WithinAbs(0.4, 1e-15));
    CHECK_THROWS_AS(build_polaron_hamiltonian(two_qubits(0.1, 1.0), {1.2, 1.0}), Error);
}

TEST_CASE("eigensystem diagonalizes and is sign fixed", "[model]") {
    const Mat4 h = build_lab_hamiltonian(two_qubits(0.3, 0.7));
    const auto es = eigensystem(h);
    CHECK((es.vectors * es.values.asDiagonal() * es.vectors.transpose() - h).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((es.vectors.transpose() * es.vectors - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < 3; ++i) CHECK(es.values(i) <= es.values(i + 1));
    for (int c = 0; c < 4; ++c) {
        Eigen::Index k = 0;
        es.vectors.col(c).cwiseAbs().maxCoeff(&k);
        CHECK(es.vectors(k, c) > 0.0);
    }
}

TEST_CASE("asymmetric input is rejected", "[model]") {
    Mat4 h = Mat4::Identity();
    h(0, 1) = 1.0;
    CHECK_THROWS_AS(eigensystem(h), Error);
}

TEST_CASE("Bohr components reconstruct the operator", "[model]") {
    for (double eps : {0.0, 1.0}) {
        const auto es = eigensystem(build_lab_hamiltonian(two_qubits(0.1, eps)));
        for (Side s : {Side::Left, Side::Right})
            for (const auto& op : {pauli::sx(), pauli::sy(), pauli::sz()}) {
                const auto c = make_coupling(s, pauli::on(s, op), es);
                CMat4 sum = CMat4::Zero();
                for (const auto& b : c.components) sum += b.proj;
                CHECK((sum - c.op).cwiseAbs().maxCoeff() < 1e-13);
                CHECK((c.op - c.op.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
                for (const auto& b : c.components)
                    for (int n = 0; n < 4; ++n)
                        for (int m = 0; m < 4; ++m)
                            if (std::abs(b.proj(n, m)) > 0.0)
                                CHECK_THAT(es.values(m) - es.values(n), WithinAbs(b.omega, 1e-9));
            }
    }
}

TEST_CASE("local energies and gaps", "[model]") {
    const auto e = local_basis_energies(0.1, 1.0, 1.0);
    CHECK_THAT(e[0] - e[1], WithinAbs(1.2, 1e-15));
    CHECK_THAT(e[2] - e[3], WithinAbs(0.8, 1e-15));
    CHECK_THAT(e[0] - e[2], WithinAbs(e[1] - e[3] + 4 * 0.1, 1e-15));
}

TEST_CASE("system validation", "[model]") {
    auto s = two_qubits(0.1, 1.0);
    CHECK_NOTHROW(s.validate());
    s.baths.erase(Terminal::R);
    CHECK_THROWS_AS(s.validate(), Error);
    auto t = two_qubits(0.1, 1.0);
    t.left.delta = -1.0;
    CHECK_THROWS_AS(t.validate(), Error);
    auto three = two_qubits(0.1, 1.0);
    three.topology = Topology::ThreeTerminal;
    CHECK_THROWS_AS(three.validate(), Error);
}
