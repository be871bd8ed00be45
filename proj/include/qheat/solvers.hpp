// solvers.hpp: counting-field tilted generators (NE-PTRE, Redfield, NIBA),
// steady states, cumulant generating function, cumulants and dynamics.
//
// Density matrices are vectorized by column stacking: vec(A X B) = (B^T kron A) vec(X).
// Heat currents are positive when energy flows into the counted bath.

#pragma once

#include "qheat/bath.hpp"
#include "qheat/error.hpp"
#include "qheat/model.hpp"
#include "qheat/rates.hpp"

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <boost/numeric/odeint/external/eigen/eigen.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qheat {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

enum class Scheme { Redfield, NePtre, Niba };
enum class RedfieldForm { Full, Population };

inline const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::Redfield: return "redfield";
        case Scheme::NePtre: return "neptre";
        case Scheme::Niba: return "niba";
    }
    return "?";
}

struct SolverOptions {
    Scheme scheme = Scheme::NePtre;
    RedfieldForm redfield_form = RedfieldForm::Full;
    bool secular = false;
    bool neglect_lamb_shift = false;
    double chi_step = 1e-4;
    rates::RateOptions rate{};
    bool operator==(const SolverOptions& o) const {
        return scheme == o.scheme && redfield_form == o.redfield_form && secular == o.secular &&
               neglect_lamb_shift == o.neglect_lamb_shift && chi_step == o.chi_step &&
               rate.fourier.quad.epsrel == o.rate.fourier.quad.epsrel &&
               rate.fourier.abs_scale == o.rate.fourier.abs_scale && rate.clamp_floor == o.rate.clamp_floor;
    }
};

namespace superop {

inline CMat kron(const CMat& a, const CMat& b) {
    CMat r(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return r;
}

/// vec(A X B)
inline CMat sandwich(const CMat4& a, const CMat4& b) { return kron(b.transpose(), a); }
/// vec(A X)
inline CMat left(const CMat4& a) { return kron(CMat4::Identity(), a); }
/// vec(X B)
inline CMat right(const CMat4& b) { return kron(b.transpose(), CMat4::Identity()); }

inline CVec vec(const CMat4& m) { return Eigen::Map<const CVec>(m.data(), 16); }
inline CMat4 unvec(const CVec& v) { return Eigen::Map<const CMat4>(v.data()); }

/// Row vector w with w . vec(X) = Tr X.
inline Eigen::RowVectorXcd trace_row(int dim) {
    Eigen::RowVectorXcd w = Eigen::RowVectorXcd::Zero(dim);
    if (dim == 16) {
        for (int i = 0; i < 4; ++i) w(i + 4 * i) = 1.0;
    } else {
        w.setOnes();
    }
    return w;
}

} // namespace superop

/// Counting-field tilted generator L(chi), acting on vec(rho) (dim 16) or
/// on populations (dim 4).
struct TiltedGenerator {
    Scheme scheme = Scheme::NePtre;
    Terminal chi_terminal = Terminal::R;
    int dim = 16;
    bool complex_chi = false;  // build accepts complex chi
    std::function<CMat(cplx)> build;

    CMat operator()(double chi) const { return build(cplx(chi, 0.0)); }
    CMat operator()(cplx chi) const {
        if (chi.imag() != 0.0 && !complex_chi)
            throw Error(ErrorKind::InvalidArgument, "generator accepts real counting fields only");
        return build(chi);
    }
};

struct SteadyState {
    Scheme scheme = Scheme::NePtre;
    bool populations = false;  // 4-vector form
    CMat4 rho = CMat4::Zero();  // generator basis; diagonal for population forms
    double residual = 0.0;

    CVec vec() const {
        if (populations) return rho.diagonal();
        return superop::vec(rho);
    }
    Eigen::Vector4d population() const { return rho.diagonal().real(); }
};

/// Dissipative channel: coupling operators sharing one set of baths.
struct Channel {
    std::vector<Terminal> terminals;
    std::vector<CouplingOperator> ops;
    // gamma(sign, w, shifts)[i]: rate for ops[i] with per-terminal argument shifts.
    std::function<std::array<cplx, 2>(rates::Sign, double, std::span<const double>)> gamma;
    bool phase_dressed = false;  // counted rate = e^{+/- i w chi} * uncounted rate

    bool counts(Terminal t) const { return std::find(terminals.begin(), terminals.end(), t) != terminals.end(); }
};

/// Scheme-specific model of one device configuration.
class Model {
public:
    virtual ~Model() = default;
    virtual Scheme scheme() const = 0;
    virtual int dim() const = 0;
    virtual bool complex_chi() const = 0;
    virtual CMat generator(Terminal counted, cplx chi) const = 0;
    /// Current into `t` from the derivative of the dressed rates; empty if no
    /// closed expression applies to this terminal.
    virtual std::optional<double> analytic_current(Terminal t, const SteadyState& ss) const = 0;

    const SystemSpec& spec() const { return spec_; }
    const SolverOptions& options() const { return opt_; }

protected:
    Model(SystemSpec spec, SolverOptions opt) : spec_(std::move(spec)), opt_(opt) { spec_.validate(); }
    SystemSpec spec_;
    SolverOptions opt_;
};

namespace detail {

inline bool close_freq(double a, double b) { return std::abs(a - b) <= 1e-9; }

/// Shared 16x16 builder for channel-based schemes (NE-PTRE, full Redfield).
class ChannelModel : public Model {
public:
    int dim() const override { return 16; }
    const Eigensystem& eig() const { return eig_; }
    const std::vector<Channel>& channels() const { return channels_; }

    CMat generator(Terminal counted, cplx chi) const override {
        CMat4 h = CMat4::Zero();
        for (int i = 0; i < 4; ++i) h(i, i) = eig_.values(i);
        CMat l = cplx(0.0, -1.0) * (superop::left(h) - superop::right(h));
        for (const auto& c : channels_) add_channel(l, c, counted, chi);
        return l;
    }

    std::optional<double> analytic_current(Terminal t, const SteadyState& ss) const override {
        if (ss.scheme != scheme()) throw Error(ErrorKind::SchemeMismatch, "steady state from another scheme");
        double total = 0.0;
        for (const auto& c : channels_) {
            if (!c.counts(t)) continue;
            if (!c.phase_dressed && c.terminals.size() > 1) return std::nullopt;
            for (std::size_t i = 0; i < c.ops.size(); ++i) {
                const auto& op = c.ops[i];
                CMat4 dp = CMat4::Zero(), dm = CMat4::Zero();
                for (const auto& k : op.components) {
                    dp += k.omega * rate(c, rates::Sign::Plus, k.omega, i) * k.proj;
                    dm += k.omega * rate(c, rates::Sign::Minus, k.omega, i) * k.proj;
                }
                if (opt_.secular) {
                    for (const auto& a : op.components)
                        for (const auto& b : op.components) {
                            if (!close_freq(a.omega, -b.omega)) continue;
                            total += (a.omega * rate(c, rates::Sign::Plus, a.omega, i) * (a.proj * ss.rho * b.proj).trace() -
                                      b.omega * rate(c, rates::Sign::Minus, b.omega, i) * (a.proj * ss.rho * b.proj).trace())
                                         .real();
                        }
                } else {
                    total += (dp * ss.rho * op.op - op.op * ss.rho * dm).trace().real();
                }
            }
        }
        return total;
    }

protected:
    ChannelModel(SystemSpec spec, SolverOptions opt) : Model(std::move(spec), opt) {}

    cplx rate(const Channel& c, rates::Sign s, double w, std::size_t i) const {
        static const std::vector<double> none;
        return c.gamma(s, w, none)[i];
    }

    void add_channel(CMat& l, const Channel& c, Terminal counted, cplx chi) const {
        const bool tilted = chi != cplx(0.0, 0.0) && c.counts(counted);
        std::vector<double> shifts(c.terminals.size(), 0.0);
        if (tilted && !c.phase_dressed) {
            if (chi.imag() != 0.0) throw Error(ErrorKind::InvalidArgument, "complex counting field needs phase-dressed rates");
            for (std::size_t j = 0; j < c.terminals.size(); ++j)
                if (c.terminals[j] == counted) shifts[j] = chi.real();
        }
        // Memoized per (sign, w) within one build; both ops share frequencies.
        std::map<std::pair<int, double>, std::array<cplx, 2>> base, dressed;
        auto get_base = [&](rates::Sign s, double w) -> const std::array<cplx, 2>& {
            auto key = std::make_pair(s == rates::Sign::Plus ? 1 : -1, w);
            auto it = base.find(key);
            if (it != base.end()) return it->second;
            return base.emplace(key, c.gamma(s, w, {})).first->second;
        };
        auto get = [&](rates::Sign s, double w, bool shifted) -> const std::array<cplx, 2>& {
            if (!shifted) return get_base(s, w);
            auto key = std::make_pair(s == rates::Sign::Plus ? 1 : -1, w);
            auto it = dressed.find(key);
            if (it != dressed.end()) return it->second;
            std::array<cplx, 2> v;
            if (c.phase_dressed) {
                const auto& b = get_base(s, w);
                const cplx ph = std::exp(cplx(0.0, s == rates::Sign::Plus ? 1.0 : -1.0) * w * chi);
                v = {ph * b[0], ph * b[1]};
            } else {
                v = c.gamma(s, w, shifts);
            }
            return dressed.emplace(key, v).first->second;
        };

        for (std::size_t i = 0; i < c.ops.size(); ++i) {
            const auto& op = c.ops[i];
            if (!opt_.secular) {
                CMat4 lp = CMat4::Zero(), lm = CMat4::Zero(), lpc = CMat4::Zero(), lmc = CMat4::Zero();
                for (const auto& k : op.components) {
                    lp += get(rates::Sign::Plus, k.omega, false)[i] * k.proj;
                    lm += get(rates::Sign::Minus, k.omega, false)[i] * k.proj;
                    lpc += get(rates::Sign::Plus, k.omega, tilted)[i] * k.proj;
                    lmc += get(rates::Sign::Minus, k.omega, tilted)[i] * k.proj;
                }
                const CMat4& a = op.op;
                l += superop::sandwich(lpc, a) + superop::sandwich(a, lmc) - superop::left(a * lp) -
                     superop::right(lm * a);
            } else {
                for (const auto& x : op.components)
                    for (const auto& y : op.components) {
                        if (!close_freq(x.omega, -y.omega)) continue;
                        const cplx gain = get(rates::Sign::Plus, x.omega, tilted)[i] + get(rates::Sign::Minus, y.omega, tilted)[i];
                        l += gain * superop::sandwich(x.proj, y.proj);
                        l -= get(rates::Sign::Plus, y.omega, false)[i] * superop::left(x.proj * y.proj);
                        l -= get(rates::Sign::Minus, x.omega, false)[i] * superop::right(x.proj * y.proj);
                    }
            }
        }
    }

    Eigensystem eig_{};
    std::vector<Channel> channels_;
};

} // namespace detail

/// Nonequilibrium polaron-transformed Redfield equation in the eigenbasis of H'.
class NePtreModel final : public detail::ChannelModel {
public:
    NePtreModel(SystemSpec spec, SolverOptions opt) : ChannelModel(std::move(spec), opt) {
        if (opt_.neglect_lamb_shift && spec_.topology == Topology::ThreeTerminal)
            throw Error(ErrorKind::InvalidArgument, "neglect_lamb_shift is available for two-terminal devices only");
        for (Side s : {Side::Left, Side::Right}) {
            engine_[idx(s)] = std::make_shared<rates::PolaronRateEngine>(bath::BathKernel(spec_.side_baths(s)),
                                                                         spec_.qubit(s).delta, opt_.rate);
        }
        frame_ = make_polaron_frame(spec_, {engine_[0]->kernel().eta(), engine_[1]->kernel().eta()});
        eig_ = frame_.eig;
        for (Side s : {Side::Left, Side::Right}) {
            Channel c;
            if (s == Side::Right) c.terminals = {Terminal::R};
            else if (spec_.topology == Topology::TwoTerminal) c.terminals = {Terminal::L};
            else c.terminals = {Terminal::Lh, Terminal::Lc};
            c.ops = {frame_.op(s, bath::Axis::X), frame_.op(s, bath::Axis::Y)};
            auto eng = engine_[idx(s)];
            const bool lamb_off = opt_.neglect_lamb_shift;
            c.phase_dressed = lamb_off;
            c.gamma = [eng, lamb_off](rates::Sign sg, double w, std::span<const double> sh) {
                if (lamb_off) {
                    auto g = eng->gamma(sg, w);
                    return std::array<cplx, 2>{cplx(g[0].real(), 0.0), cplx(g[1].real(), 0.0)};
                }
                return eng->gamma_partial(sg, w, sh);
            };
            channels_.push_back(std::move(c));
        }
    }

    Scheme scheme() const override { return Scheme::NePtre; }
    bool complex_chi() const override { return opt_.neglect_lamb_shift; }
    const PolaronFrame& frame() const { return frame_; }
    const rates::PolaronRateEngine& engine(Side s) const { return *engine_[idx(s)]; }

private:
    static std::size_t idx(Side s) { return s == Side::Left ? 0 : 1; }
    std::array<std::shared_ptr<rates::PolaronRateEngine>, 2> engine_;
    PolaronFrame frame_{};
};

/// Lab-frame Redfield equation with sigma_z couplings; real rates
/// Gamma_+(w) = J(w)(1+n(w))/4 under the odd extension, Gamma_-(w) = Gamma_+(-w).
class RedfieldModel final : public detail::ChannelModel {
public:
    RedfieldModel(SystemSpec spec, SolverOptions opt) : ChannelModel(std::move(spec), opt) {
        eig_ = eigensystem(build_lab_hamiltonian(spec_));
        for (Terminal t : spec_.terminals()) {
            const Side s = side_of(t);
            Channel c;
            c.terminals = {t};
            c.ops = {make_coupling(s, pauli::on(s, pauli::sz()), eig_)};
            c.phase_dressed = true;
            const bath::BathSpec b = spec_.bath(t);
            c.gamma = [b](rates::Sign sg, double w, std::span<const double>) {
                const double x = sg == rates::Sign::Plus ? w : -w;
                return std::array<cplx, 2>{cplx(0.25 * bath::emission_weight(b, x), 0.0), cplx{}};
            };
            channels_.push_back(std::move(c));
        }
    }

    Scheme scheme() const override { return Scheme::Redfield; }
    bool complex_chi() const override { return true; }

    /// Population-form rate W_{m->n} from terminal t.
    double population_rate(Terminal t, int m, int n) const {
        const auto& c = channel(t);
        const double w = eig_.values(m) - eig_.values(n);
        const double amp = std::norm(c.ops[0].op(n, m));
        return 0.5 * bath::emission_weight(spec_.bath(t), w) * amp;
    }

    const Channel& channel(Terminal t) const {
        for (const auto& c : channels_)
            if (c.counts(t)) return c;
        throw Error(ErrorKind::InvalidArgument, std::string("no channel for terminal ") + to_string(t));
    }
};

/// Population (long-time) form of the Redfield equation on eigenstate populations.
class RedfieldPopulationModel final : public Model {
public:
    RedfieldPopulationModel(SystemSpec spec, SolverOptions opt)
        : Model(spec, opt), full_(spec, opt) {}

    Scheme scheme() const override { return Scheme::Redfield; }
    int dim() const override { return 4; }
    bool complex_chi() const override { return true; }
    const RedfieldModel& full() const { return full_; }
    const Eigensystem& eig() const { return full_.eig(); }

    CMat generator(Terminal counted, cplx chi) const override {
        CMat l = CMat::Zero(4, 4);
        for (Terminal t : spec_.terminals()) {
            for (int m = 0; m < 4; ++m)
                for (int n = 0; n < 4; ++n) {
                    if (m == n) continue;
                    const double w = full_.population_rate(t, m, n);
                    const double e = eig().values(m) - eig().values(n);
                    const cplx dress = (t == counted) ? std::exp(cplx(0.0, 1.0) * e * chi) : cplx(1.0, 0.0);
                    l(n, m) += dress * w;
                    l(m, m) -= w;
                }
        }
        return l;
    }

    std::optional<double> analytic_current(Terminal t, const SteadyState& ss) const override {
        if (ss.scheme != Scheme::Redfield) throw Error(ErrorKind::SchemeMismatch, "steady state from another scheme");
        return net_flux(t, ss.population());
    }

    /// sum_{n != m} E_mn/2 J(E_mn)(1 + n(E_mn)) |sz_nm|^2 P_m, odd extension for E_mn < 0.
    double emission_formula(Terminal t, const Eigen::Vector4d& p) const {
        const auto& op = full_.channel(t).ops[0].op;
        double s = 0.0;
        for (int n = 0; n < 4; ++n)
            for (int m = 0; m < 4; ++m) {
                if (n == m) continue;
                const double e = eig().values(m) - eig().values(n);
                s += 0.5 * e * bath::emission_weight(spec_.bath(t), e) * std::norm(op(n, m)) * p(m);
            }
        return s;
    }

    /// sum over transitions of energy released into the bath minus energy drawn from it.
    double net_flux(Terminal t, const Eigen::Vector4d& p) const {
        double s = 0.0;
        for (int m = 0; m < 4; ++m)
            for (int n = 0; n < 4; ++n) {
                if (m == n) continue;
                const double e = eig().values(m) - eig().values(n);
                if (e > 0.0) s += e * (full_.population_rate(t, m, n) * p(m) - full_.population_rate(t, n, m) * p(n));
            }
        return s;
    }

private:
    RedfieldModel full_;
};

/// NIBA population kinetics in the local basis.
class NibaModel final : public Model {
public:
    NibaModel(SystemSpec spec, SolverOptions opt) : Model(std::move(spec), opt) {
        for (Side s : {Side::Left, Side::Right})
            engine_[s == Side::Left ? 0 : 1] = std::make_shared<rates::NibaRateEngine>(
                bath::BathKernel(spec_.side_baths(s)), spec_.qubit(s).delta, opt_.rate);
        table_ = rates::make_niba_table(spec_, *engine_[0], *engine_[1]);
    }

    Scheme scheme() const override { return Scheme::Niba; }
    int dim() const override { return 4; }
    bool complex_chi() const override { return spec_.topology == Topology::TwoTerminal; }
    const rates::NibaRateTable& table() const { return table_; }
    const rates::NibaRateEngine& engine(Side s) const { return *engine_[s == Side::Left ? 0 : 1]; }

    CMat generator(Terminal counted, cplx chi) const override {
        CMat l = CMat::Zero(4, 4);
        auto add = [&](Side s, const auto& flips) {
            const bool tilted = side_of(counted) == s && chi != cplx(0.0, 0.0);
            for (auto [i, j] : flips) {
                const double k = table_.side(s)(i, j);
                cplx gain = k;
                if (tilted) gain = counted_rate(counted, i, j, chi);
                l(j, i) += gain;
                l(i, i) -= k;
            }
        };
        add(Side::Left, rates::kLeftFlips);
        add(Side::Right, rates::kRightFlips);
        return l;
    }

    std::optional<double> analytic_current(Terminal t, const SteadyState& ss) const override {
        if (ss.scheme != Scheme::Niba) throw Error(ErrorKind::SchemeMismatch, "steady state from another scheme");
        if (t == Terminal::Lh || t == Terminal::Lc) return std::nullopt;
        const auto p = ss.population();
        const Side s = side_of(t);
        double sum = 0.0;
        const auto& flips = s == Side::Left ? rates::kLeftFlips : rates::kRightFlips;
        for (auto [i, j] : flips) sum += table_.gap(i, j) * table_.side(s)(i, j) * p(i);
        return sum;
    }

private:
    cplx counted_rate(Terminal t, int i, int j, cplx chi) const {
        const double e = table_.gap(i, j);
        if (t == Terminal::Lh || t == Terminal::Lc) {
            if (chi.imag() != 0.0) throw Error(ErrorKind::InvalidArgument, "partial counting needs a real field");
            const std::array<double, 2> sh = t == Terminal::Lh ? std::array<double, 2>{chi.real(), 0.0}
                                                               : std::array<double, 2>{0.0, chi.real()};
            return engine_[0]->kappa_partial(e, sh);
        }
        return std::exp(cplx(0.0, 1.0) * e * chi) * table_.side(side_of(t))(i, j);
    }

    std::array<std::shared_ptr<rates::NibaRateEngine>, 2> engine_;
    rates::NibaRateTable table_{};
};

inline std::shared_ptr<const Model> make_model(const SystemSpec& spec, const SolverOptions& opt) {
    switch (opt.scheme) {
        case Scheme::NePtre: return std::make_shared<NePtreModel>(spec, opt);
        case Scheme::Niba: return std::make_shared<NibaModel>(spec, opt);
        case Scheme::Redfield:
            if (opt.redfield_form == RedfieldForm::Population) return std::make_shared<RedfieldPopulationModel>(spec, opt);
            return std::make_shared<RedfieldModel>(spec, opt);
    }
    throw Error(ErrorKind::InvalidArgument, "unknown scheme");
}

inline TiltedGenerator make_generator(std::shared_ptr<const Model> m, Terminal counted) {
    const auto ts = m->spec().terminals();
    if (std::find(ts.begin(), ts.end(), counted) == ts.end())
        throw Error(ErrorKind::InvalidArgument, std::string("terminal not present: ") + to_string(counted));
    TiltedGenerator g;
    g.scheme = m->scheme();
    g.chi_terminal = counted;
    g.dim = m->dim();
    g.complex_chi = m->complex_chi();
    g.build = [m, counted](cplx chi) { return m->generator(counted, chi); };
    return g;
}

inline TiltedGenerator build_neptre_generator(const SystemSpec& spec, const SolverOptions& opt, Terminal counted) {
    SolverOptions o = opt;
    o.scheme = Scheme::NePtre;
    return make_generator(make_model(spec, o), counted);
}

inline TiltedGenerator build_redfield_generator(const SystemSpec& spec, RedfieldForm form, Terminal counted) {
    SolverOptions o;
    o.scheme = Scheme::Redfield;
    o.redfield_form = form;
    return make_generator(make_model(spec, o), counted);
}

inline TiltedGenerator build_niba_generator(const SystemSpec& spec, Terminal counted, const SolverOptions& opt = {}) {
    SolverOptions o = opt;
    o.scheme = Scheme::Niba;
    return make_generator(make_model(spec, o), counted);
}

/// Zero-mode tolerance, relative to the generator scale.
inline double zero_tolerance(const CMat& l) { return 1e-9 * std::max(1.0, l.cwiseAbs().maxCoeff()); }

inline SteadyState steady_state_of(const CMat& l, Scheme scheme) {
    const int dim = static_cast<int>(l.rows());
    Eigen::ComplexEigenSolver<CMat> es(l, false);
    const double tol = zero_tolerance(l);
    int zeros = 0;
    for (int i = 0; i < dim; ++i)
        if (std::abs(es.eigenvalues()(i)) < tol) ++zeros;
    if (zeros > 1) throw Error(ErrorKind::DegenerateSteadyState, "generator has " + std::to_string(zeros) + " zero modes");

    Eigen::JacobiSVD<CMat> svd(l, Eigen::ComputeFullV);
    CVec v = svd.matrixV().col(dim - 1);
    const cplx tr = superop::trace_row(dim) * v;
    if (std::abs(tr) < 1e-300) throw Error(ErrorKind::DegenerateSteadyState, "null vector has zero trace");
    v /= tr;

    SteadyState ss;
    ss.scheme = scheme;
    ss.populations = dim == 4;
    if (ss.populations) {
        ss.rho = CMat4::Zero();
        for (int i = 0; i < 4; ++i) ss.rho(i, i) = cplx(v(i).real(), 0.0);
    } else {
        CMat4 r = superop::unvec(v);
        ss.rho = 0.5 * (r + r.adjoint());
    }
    ss.residual = (l * ss.vec()).cwiseAbs().maxCoeff();
    return ss;
}

inline SteadyState steady_state(const TiltedGenerator& g) { return steady_state_of(g(0.0), g.scheme); }

/// G(chi): eigenvalue of L(chi) whose right eigenvector overlaps most with
/// the chi = 0 steady state.
inline cplx cgf(const TiltedGenerator& g, cplx chi, const SteadyState& ref) {
    const CMat l = g(chi);
    Eigen::ComplexEigenSolver<CMat> es(l, true);
    const CVec r = ref.vec().normalized();
    int best = -1;
    double best_ov = -1.0, second = -1.0;
    for (int i = 0; i < l.rows(); ++i) {
        const double ov = std::abs(es.eigenvectors().col(i).normalized().dot(r));
        if (ov > best_ov) {
            second = best_ov;
            best_ov = ov;
            best = i;
        } else if (ov > second) {
            second = ov;
        }
    }
    if (best < 0 || best_ov < 0.5 || second > 0.9 * best_ov)
        throw Error(ErrorKind::BranchCrossing, "cannot track the zero-mode branch");
    return es.eigenvalues()(best);
}

inline cplx cgf(const TiltedGenerator& g, cplx chi) { return cgf(g, chi, steady_state(g)); }

struct CumulantResult {
    double current = 0.0;
    double noise = 0.0;
    double chi_step = 1e-4;
    int order = 1;
    std::string method;
};

/// First (and optionally second) cumulant by central differences of G in
/// chi, one Richardson step each.
inline CumulantResult cumulant(const TiltedGenerator& g, int order, double h = 1e-4, const SteadyState* ref = nullptr) {
    if (order != 1 && order != 2) throw Error(ErrorKind::InvalidArgument, "cumulant order must be 1 or 2");
    const SteadyState ss = ref ? *ref : steady_state(g);
    auto G = [&](double x) { return cgf(g, cplx(x, 0.0), ss); };
    CumulantResult out;
    out.order = order;
    out.chi_step = h;
    auto d1 = [&](double s) { return (G(s) - G(-s)) / (2.0 * s); };
    const cplx first = (4.0 * d1(0.5 * h) - d1(h)) / 3.0;
    out.current = (cplx(0.0, -1.0) * first).real();
    out.method = "central-difference+richardson";
    if (order == 2) {
        const double h2 = 100.0 * h;
        const cplx g0 = G(0.0);
        auto d2 = [&](double s) { return (G(s) + G(-s) - 2.0 * g0) / (s * s); };
        const cplx second = (4.0 * d2(0.5 * h2) - d2(h2)) / 3.0;
        out.noise = -second.real();
    }
    return out;
}

/// Current from the derivative of the tilted generator, -i 1^T L'(0) rho.
inline double flux_current(const TiltedGenerator& g, const SteadyState& ss, double h = 1e-4) {
    const Eigen::RowVectorXcd w = superop::trace_row(g.dim);
    const CVec v = ss.vec();
    auto d = [&](double s) { return cplx((w * (g(s) - g(-s)) * v)(0) / (2.0 * s)); };
    const cplx der = (4.0 * d(0.5 * h) - d(h)) / 3.0;
    return (cplx(0.0, -1.0) * der).real();
}

// ---------------------------------------------------------------- NIBA closed forms

/// Rates kappa_v(E_ij) of one side under the symmetric-splitting aliases.
struct NibaAliasRates {
    double k12, k21, k24, k42;
};

inline NibaAliasRates niba_alias(const rates::NibaRateTable& t, Side s) {
    if (s == Side::Left) return {t.left(0, 2), t.left(2, 0), t.left(1, 3), t.left(3, 1)};
    return {t.right(0, 1), t.right(1, 0), t.right(2, 3), t.right(3, 2)};
}

inline void require_symmetric(const rates::NibaRateTable& t) {
    if (std::abs(t.energies[1] - t.energies[2]) > 1e-12)
        throw Error(ErrorKind::AsymmetricSplitting, "closed forms need equal splittings");
}

inline double niba_normalization(const rates::NibaRateTable& t) {
    require_symmetric(t);
    auto half = [](const NibaAliasRates& l, const NibaAliasRates& r) {
        return l.k12 * l.k42 * r.k21 + l.k21 * l.k24 * r.k42 + l.k21 * l.k42 * r.k21 + l.k21 * l.k42 * r.k12 +
               l.k21 * l.k24 * r.k12 + (l.k12 + r.k12) * (l.k24 * r.k42 + 0.5 * l.k24 * r.k24);
    };
    const auto L = niba_alias(t, Side::Left), R = niba_alias(t, Side::Right);
    return half(L, R) + half(R, L);
}

inline Eigen::Vector4d analytic_niba_populations(const rates::NibaRateTable& t) {
    const double a = niba_normalization(t);
    const auto L = niba_alias(t, Side::Left), R = niba_alias(t, Side::Right);
    Eigen::Vector4d p;
    p(0) = L.k21 * R.k21 * R.k42 + L.k42 * R.k21 * R.k24 + L.k21 * L.k42 * R.k21 + L.k21 * L.k24 * R.k42;
    p(1) = L.k21 * R.k12 * R.k42 + (L.k12 + R.k12) * L.k42 * R.k24 + L.k21 * L.k42 * R.k12;
    p(2) = R.k21 * L.k12 * L.k42 + (L.k12 + R.k12) * R.k42 * L.k24 + R.k21 * R.k42 * L.k12;
    p(3) = L.k21 * L.k24 * R.k12 + R.k21 * R.k24 * L.k12 + (L.k12 + R.k12) * L.k24 * R.k24;
    return p / a;
}

/// E_12(k12_R P1 - k21_R P2) - E_34(k43_R P4 - k34_R P3).
inline double niba_current(const rates::NibaRateTable& t, const Eigen::Vector4d& p) {
    const auto& r = t.right;
    return t.gap(0, 1) * (r(0, 1) * p(0) - r(1, 0) * p(1)) - t.gap(2, 3) * (r(3, 2) * p(3) - r(2, 3) * p(2));
}

/// The two component terms of niba_current.
inline std::array<double, 2> niba_current_components(const rates::NibaRateTable& t, const Eigen::Vector4d& p) {
    const auto& r = t.right;
    return {t.gap(0, 1) * (r(0, 1) * p(0) - r(1, 0) * p(1)), t.gap(2, 3) * (r(3, 2) * p(3) - r(2, 3) * p(2))};
}

struct LoopCurrents {
    double forward = 0.0;   // 4U k24_L k43_R k31_L k12_R / A
    double backward = 0.0;  // 4U k21_R k13_L k34_R k42_L / A
    double total = 0.0;
    double normalization = 0.0;
};

inline LoopCurrents loop_currents(const rates::NibaRateTable& t, double u) {
    const double a = niba_normalization(t);
    const auto& l = t.left;
    const auto& r = t.right;
    LoopCurrents c;
    c.normalization = a;
    c.forward = 4.0 * u * l(1, 3) * r(3, 2) * l(2, 0) * r(0, 1) / a;
    c.backward = 4.0 * u * r(1, 0) * l(0, 2) * r(2, 3) * l(3, 1) / a;
    c.total = c.forward - c.backward;
    return c;
}

// ---------------------------------------------------------------- dynamics

struct Trajectory {
    std::vector<double> t;
    std::vector<CMat4> rho;  // generator basis; diagonal for population forms
};

/// Adaptive Dormand-Prince integration of d vec(rho)/dt = L(0) vec(rho).
inline Trajectory propagate_dynamics(const TiltedGenerator& g, const CMat4& rho0, const std::vector<double>& times,
                                     double abs_tol = 1e-12, double rel_tol = 1e-10) {
    namespace ode = boost::numeric::odeint;
    if (times.empty()) return {};
    const CMat l = g(0.0);
    const int n = g.dim;
    Eigen::MatrixXd real_l(2 * n, 2 * n);
    real_l << l.real(), -l.imag(), l.imag(), l.real();

    CVec v0 = n == 16 ? superop::vec(rho0) : CVec(rho0.diagonal());
    Eigen::VectorXd x(2 * n);
    x << v0.real(), v0.imag();

    Trajectory out;
    auto rhs = [&](const Eigen::VectorXd& y, Eigen::VectorXd& dy, double) { dy.noalias() = real_l * y; };
    auto obs = [&](const Eigen::VectorXd& y, double t) {
        CVec v(n);
        v.real() = y.head(n);
        v.imag() = y.tail(n);
        out.t.push_back(t);
        if (n == 16) {
            out.rho.push_back(superop::unvec(v));
        } else {
            CMat4 r = CMat4::Zero();
            for (int i = 0; i < 4; ++i) r(i, i) = v(i);
            out.rho.push_back(r);
        }
    };
    using Stepper = ode::runge_kutta_dopri5<Eigen::VectorXd, double, Eigen::VectorXd, double, ode::vector_space_algebra>;
    const double span = times.back() - times.front();
    const double dt0 = span > 0.0 ? span * 1e-6 : 1e-6;
    try {
        ode::integrate_times(ode::make_dense_output(abs_tol, rel_tol, Stepper()), rhs, x, times.begin(), times.end(),
                             dt0, obs, ode::max_step_checker(1000000));
    } catch (const std::exception& e) {
        throw Error(ErrorKind::StepSizeUnderflow, std::string("integration failed: ") + e.what());
    }
    return out;
}

} // namespace qheat
