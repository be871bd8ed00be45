// model.hpp: two-qubit device description, lab/polaron Hamiltonians and
// Bohr-frequency decomposition of coupling operators.
//
// Product basis order: |uu>, |ud>, |du>, |dd> (index 2*left + right, up = 0).

#pragma once

#include "qheat/bath.hpp"
#include "qheat/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <vector>

namespace qheat {

using cplx = std::complex<double>;
using Mat4 = Eigen::Matrix4d;
using CMat4 = Eigen::Matrix4cd;
using Vec4 = Eigen::Vector4d;

enum class Topology { TwoTerminal, ThreeTerminal };
enum class Side { Left, Right };
enum class Terminal { L, Lh, Lc, R };

inline const char* to_string(Terminal t) {
    switch (t) {
        case Terminal::L: return "L";
        case Terminal::Lh: return "Lh";
        case Terminal::Lc: return "Lc";
        case Terminal::R: return "R";
    }
    return "?";
}

inline Side side_of(Terminal t) { return t == Terminal::R ? Side::Right : Side::Left; }

struct QubitSpec {
    double epsilon = 1.0;
    double delta = 1.0;
    bool operator==(const QubitSpec&) const = default;
};

struct SystemSpec {
    double u = 0.1;
    QubitSpec left{};
    QubitSpec right{};
    Topology topology = Topology::TwoTerminal;
    std::map<Terminal, bath::BathSpec> baths{};

    const QubitSpec& qubit(Side s) const { return s == Side::Left ? left : right; }
    QubitSpec& qubit(Side s) { return s == Side::Left ? left : right; }

    const bath::BathSpec& bath(Terminal t) const {
        auto it = baths.find(t);
        if (it == baths.end()) throw Error(ErrorKind::InvalidArgument, std::string("no bath for terminal ") + to_string(t));
        return it->second;
    }

    std::vector<Terminal> terminals() const {
        return topology == Topology::TwoTerminal ? std::vector<Terminal>{Terminal::L, Terminal::R}
                                                 : std::vector<Terminal>{Terminal::Lh, Terminal::Lc, Terminal::R};
    }

    /// Baths attached to one side, in terminal order.
    std::vector<bath::BathSpec> side_baths(Side s) const {
        if (s == Side::Right) return {bath(Terminal::R)};
        if (topology == Topology::TwoTerminal) return {bath(Terminal::L)};
        return {bath(Terminal::Lh), bath(Terminal::Lc)};
    }

    bool symmetric_splitting() const { return left.epsilon == right.epsilon; }

    void validate() const {
        if (!std::isfinite(u)) throw Error(ErrorKind::InvalidArgument, "u must be finite");
        for (const auto* q : {&left, &right}) {
            if (!std::isfinite(q->epsilon)) throw Error(ErrorKind::InvalidArgument, "epsilon must be finite");
            if (!(q->delta >= 0.0) || !std::isfinite(q->delta))
                throw Error(ErrorKind::InvalidArgument, "delta must be >= 0");
        }
        const auto want = terminals();
        if (baths.size() != want.size())
            throw Error(ErrorKind::InvalidArgument, "bath set does not match topology");
        for (Terminal t : want) bath(t).validate();
    }

    bool operator==(const SystemSpec&) const = default;
};

namespace pauli {

inline Eigen::Matrix2cd sx() { Eigen::Matrix2cd m; m << 0, 1, 1, 0; return m; }
inline Eigen::Matrix2cd sy() { Eigen::Matrix2cd m; m << 0, cplx(0, -1), cplx(0, 1), 0; return m; }
inline Eigen::Matrix2cd sz() { Eigen::Matrix2cd m; m << 1, 0, 0, -1; return m; }

inline CMat4 kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
    CMat4 r;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return r;
}

/// Single-qubit operator acting on one side of the pair.
inline CMat4 on(Side s, const Eigen::Matrix2cd& op) {
    const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
    return s == Side::Left ? kron(op, id) : kron(id, op);
}

} // namespace pauli

/// Diagonal of U sz sz + sum_v eps_v/2 sz_v, i.e. E_1..E_4.
inline std::array<double, 4> local_basis_energies(double u, double eps_l, double eps_r) {
    return {u + 0.5 * (eps_l + eps_r), -u + 0.5 * (eps_l - eps_r), -u - 0.5 * (eps_l - eps_r),
            u - 0.5 * (eps_l + eps_r)};
}

struct Renormalization {
    double left = 1.0;
    double right = 1.0;
    double operator[](Side s) const { return s == Side::Left ? left : right; }
};

inline Mat4 build_polaron_hamiltonian(const SystemSpec& spec, Renormalization eta) {
    for (double e : {eta.left, eta.right})
        if (!(e >= 0.0 && e <= 1.0)) throw Error(ErrorKind::InvalidArgument, "eta must lie in [0, 1]");
    const auto e = local_basis_energies(spec.u, spec.left.epsilon, spec.right.epsilon);
    Mat4 h = Mat4::Zero();
    for (int i = 0; i < 4; ++i) h(i, i) = e[static_cast<std::size_t>(i)];
    const double tl = 0.5 * eta.left * spec.left.delta;
    const double tr = 0.5 * eta.right * spec.right.delta;
    h(0, 2) = h(2, 0) = tl;
    h(1, 3) = h(3, 1) = tl;
    h(0, 1) = h(1, 0) = tr;
    h(2, 3) = h(3, 2) = tr;
    return h;
}

/// Bare (lab-frame) system Hamiltonian, i.e. eta = 1.
inline Mat4 build_lab_hamiltonian(const SystemSpec& spec) { return build_polaron_hamiltonian(spec, {1.0, 1.0}); }

struct Eigensystem {
    Vec4 values;   // ascending
    Mat4 vectors;  // columns
};

inline Eigensystem eigensystem(const Mat4& h) {
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw Error(ErrorKind::NonSymmetric, "Hamiltonian is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat4> es(h);
    Eigensystem out{es.eigenvalues(), es.eigenvectors()};
    for (int c = 0; c < 4; ++c) {
        Eigen::Index k = 0;
        out.vectors.col(c).cwiseAbs().maxCoeff(&k);
        if (out.vectors(k, c) < 0.0) out.vectors.col(c) *= -1.0;
    }
    return out;
}

struct BohrComponent {
    double omega;
    CMat4 proj;  // eigenbasis
};

/// Splits `op` (product basis) into components P(w) with
/// P(w)_{nm} = <n|op|m> for E_m - E_n = w. Empty components are dropped.
inline std::vector<BohrComponent> bohr_decompose(const CMat4& op, const Eigensystem& es, double freq_tol = 1e-9) {
    if (!(freq_tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "freq_tol must be > 0");
    const CMat4 v = es.vectors.cast<cplx>();
    const CMat4 a = v.adjoint() * op * v;

    struct Entry { double w; int n, m; };
    std::vector<Entry> entries;
    for (int n = 0; n < 4; ++n)
        for (int m = 0; m < 4; ++m) entries.push_back({es.values(m) - es.values(n), n, m});
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) { return x.w < y.w; });

    const double drop = 1e-15 * std::max(1.0, a.cwiseAbs().maxCoeff());
    std::vector<BohrComponent> out;
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i + 1;
        while (j < entries.size() && entries[j].w - entries[j - 1].w <= freq_tol) ++j;
        BohrComponent c{0.0, CMat4::Zero()};
        for (std::size_t k = i; k < j; ++k) {
            c.omega += entries[k].w;
            c.proj(entries[k].n, entries[k].m) = a(entries[k].n, entries[k].m);
        }
        c.omega /= static_cast<double>(j - i);
        if (std::abs(c.omega) <= freq_tol) c.omega = 0.0;
        if (c.proj.cwiseAbs().maxCoeff() > drop) out.push_back(std::move(c));
        i = j;
    }
    return out;
}

/// An operator together with its Bohr components, both in the eigenbasis.
struct CouplingOperator {
    Side side;
    CMat4 op;  // eigenbasis
    std::vector<BohrComponent> components;
};

inline CouplingOperator make_coupling(Side s, const CMat4& op_product, const Eigensystem& es) {
    const CMat4 v = es.vectors.cast<cplx>();
    return {s, v.adjoint() * op_product * v, bohr_decompose(op_product, es)};
}

/// Polaron-frame data shared by the NE-PTRE solver.
struct PolaronFrame {
    Renormalization eta;
    Mat4 h_prime;
    Eigensystem eig;
    // sigma_x and sigma_y of each side: index [side][axis].
    std::array<std::array<CouplingOperator, 2>, 2> coupling;

    const CouplingOperator& op(Side s, bath::Axis a) const {
        return coupling[s == Side::Left ? 0 : 1][a == bath::Axis::X ? 0 : 1];
    }
};

inline PolaronFrame make_polaron_frame(const SystemSpec& spec, Renormalization eta) {
    const Mat4 h = build_polaron_hamiltonian(spec, eta);
    const Eigensystem es = eigensystem(h);
    auto mk = [&](Side s) {
        return std::array<CouplingOperator, 2>{make_coupling(s, pauli::on(s, pauli::sx()), es),
                                               make_coupling(s, pauli::on(s, pauli::sy()), es)};
    };
    return PolaronFrame{eta, h, es, {mk(Side::Left), mk(Side::Right)}};
}

} // namespace qheat
