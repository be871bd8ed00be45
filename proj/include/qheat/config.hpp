#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qheat/error.hpp"
#include "qheat/model.hpp"
#include "qheat/solvers.hpp"
#include "qheat/transport.hpp"

namespace qheat::config {

using json = nlohmann::json;

struct SweepConfig {
    transport::SweepAxis axis = transport::SweepAxis::DeltaT;
    std::vector<double> grid;
    double t0 = 2.0;
    bool normalize = false;
    bool operator==(const SweepConfig&) const = default;
};

struct OutputConfig {
    std::string path;
    std::string format = "csv";  // csv | jsonl
    bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
    SystemSpec system;
    SolverOptions solver;
    bool noise = false;
    std::optional<SweepConfig> sweep;
    OutputConfig output;
    bool operator==(const RunConfig&) const = default;
};

// ---------------------------------------------------------------- enum names

inline const char* topology_name(Topology t) { return t == Topology::TwoTerminal ? "two_terminal" : "three_terminal"; }
inline const char* form_name(RedfieldForm f) { return f == RedfieldForm::Full ? "full" : "population"; }

template <class E, std::size_t N>
E lookup(const std::string& s, const std::array<std::pair<const char*, E>, N>& table, const std::string& path) {
    for (const auto& [name, v] : table)
        if (s == name) return v;
    std::string allowed;
    for (const auto& [name, v] : table) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    throw Error(ErrorKind::ConfigError, path + ": unknown value '" + s + "' (expected one of " + allowed + ")");
}

inline Scheme parse_scheme(const std::string& s, const std::string& path = "scheme") {
    return lookup<Scheme, 3>(s, {{{"redfield", Scheme::Redfield}, {"neptre", Scheme::NePtre}, {"niba", Scheme::Niba}}},
                             path);
}

inline Terminal parse_terminal(const std::string& s, const std::string& path) {
    return lookup<Terminal, 4>(
        s, {{{"L", Terminal::L}, {"Lh", Terminal::Lh}, {"Lc", Terminal::Lc}, {"R", Terminal::R}}}, path);
}

inline transport::SweepAxis parse_axis(const std::string& s, const std::string& path) {
    using A = transport::SweepAxis;
    return lookup<A, 6>(s,
                        {{{"delta_t", A::DeltaT},
                          {"alpha", A::AlphaBoth},
                          {"alpha_r", A::AlphaRight},
                          {"t_r", A::TR},
                          {"epsilon", A::Epsilon},
                          {"u", A::U}}},
                        path);
}

// ---------------------------------------------------------------- strict reader

/// Object view that records consumed keys and rejects the rest.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw Error(ErrorKind::ConfigError, where() + ": expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw Error(ErrorKind::ConfigError, sub(key) + ": missing required key");
        return j_.at(key);
    }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const json& v = raw(key);
        if (!v.is_number()) throw Error(ErrorKind::ConfigError, sub(key) + ": expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw Error(ErrorKind::ConfigError, sub(key) + ": must be finite");
        return x;
    }

    bool boolean(const std::string& key, std::optional<bool> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const json& v = raw(key);
        if (!v.is_boolean()) throw Error(ErrorKind::ConfigError, sub(key) + ": expected true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
        if (!has(key)) return require(key, fallback);
        const json& v = raw(key);
        if (!v.is_string()) throw Error(ErrorKind::ConfigError, sub(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_array()) throw Error(ErrorKind::ConfigError, sub(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number())
                throw Error(ErrorKind::ConfigError, sub(key) + "[" + std::to_string(i) + "]: expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    Reader object(const std::string& key) { return Reader(raw(key), sub(key)); }

    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    const std::string& where() const { return path_; }
    const json& value() const { return j_; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw Error(ErrorKind::ConfigError, sub(it.key()) + ": unknown key");
    }

private:
    template <class T>
    T require(const std::string& key, const std::optional<T>& fallback) {
        seen_.insert(key);
        if (!fallback) throw Error(ErrorKind::ConfigError, sub(key) + ": missing required key");
        return *fallback;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

// ---------------------------------------------------------------- parsing

inline bath::BathSpec parse_bath(Reader r) {
    bath::BathSpec b;
    b.alpha = r.number("alpha");
    b.omega_c = r.number("omega_c", 5.0);
    b.temperature = r.number("temperature");
    r.finish();
    if (b.alpha < 0.0) throw Error(ErrorKind::ConfigError, r.sub("alpha") + ": must be >= 0");
    if (!(b.omega_c > 0.0)) throw Error(ErrorKind::ConfigError, r.sub("omega_c") + ": must be > 0");
    if (!(b.temperature > 0.0)) throw Error(ErrorKind::ConfigError, r.sub("temperature") + ": must be > 0");
    try {
        b.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigError, r.sub("temperature") + ": " + e.what());
    }
    return b;
}

inline QubitSpec parse_qubit(Reader r) {
    QubitSpec q;
    q.epsilon = r.number("epsilon", 1.0);
    q.delta = r.number("delta", 1.0);
    r.finish();
    if (q.delta < 0.0) throw Error(ErrorKind::ConfigError, r.sub("delta") + ": must be >= 0");
    return q;
}

inline SystemSpec parse_system(Reader r) {
    SystemSpec s;
    s.topology = lookup<Topology, 2>(r.string("topology", std::string("two_terminal")),
                                     {{{"two_terminal", Topology::TwoTerminal}, {"three_terminal", Topology::ThreeTerminal}}},
                                     r.sub("topology"));
    s.u = r.number("u", 0.1);
    s.left = r.has("left") ? parse_qubit(r.object("left")) : QubitSpec{};
    s.right = r.has("right") ? parse_qubit(r.object("right")) : QubitSpec{};
    Reader baths = r.object("baths");
    for (auto it = baths.value().begin(); it != baths.value().end(); ++it) {
        const Terminal t = parse_terminal(it.key(), baths.sub(it.key()));
        s.baths[t] = parse_bath(baths.object(it.key()));
    }
    baths.finish();
    r.finish();
    for (Terminal t : s.terminals())
        if (!s.baths.count(t))
            throw Error(ErrorKind::ConfigError, baths.sub(to_string(t)) + ": missing bath for " + topology_name(s.topology));
    if (s.baths.size() != s.terminals().size())
        throw Error(ErrorKind::ConfigError, baths.where() + ": bath set does not match " + topology_name(s.topology));
    try {
        s.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigError, r.where() + ": " + e.what());
    }
    return s;
}

inline SolverOptions parse_solver(Reader r) {
    SolverOptions o;
    o.scheme = parse_scheme(r.string("scheme", std::string("neptre")), r.sub("scheme"));
    o.redfield_form = lookup<RedfieldForm, 2>(r.string("redfield_form", std::string("full")),
                                              {{{"full", RedfieldForm::Full}, {"population", RedfieldForm::Population}}},
                                              r.sub("redfield_form"));
    o.secular = r.boolean("secular", false);
    o.neglect_lamb_shift = r.boolean("neglect_lamb_shift", false);
    o.chi_step = r.number("chi_step", 1e-4);
    o.rate.fourier.quad.epsrel = r.number("epsrel", 1e-11);
    o.rate.fourier.abs_scale = r.number("abs_scale", 1e-14);
    o.rate.clamp_floor = r.number("clamp_floor", 1e-12);
    r.finish();
    if (!(o.chi_step > 0.0)) throw Error(ErrorKind::ConfigError, r.sub("chi_step") + ": must be > 0");
    if (!(o.rate.fourier.quad.epsrel > 0.0)) throw Error(ErrorKind::ConfigError, r.sub("epsrel") + ": must be > 0");
    if (o.rate.fourier.abs_scale < 0.0) throw Error(ErrorKind::ConfigError, r.sub("abs_scale") + ": must be >= 0");
    if (o.rate.clamp_floor < 0.0) throw Error(ErrorKind::ConfigError, r.sub("clamp_floor") + ": must be >= 0");
    return o;
}

/// Grid as an explicit list or {start, stop, step}; the step form is inclusive of stop.
inline std::vector<double> parse_grid(Reader& parent, const std::string& key) {
    const json& v = parent.raw(key);
    if (v.is_array()) return parent.numbers(key);
    Reader r(v, parent.sub(key));
    const double a = r.number("start"), b = r.number("stop"), h = r.number("step");
    r.finish();
    if (!(h > 0.0) || b < a) throw Error(ErrorKind::ConfigError, r.where() + ": need step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::llround((b - a) / h)) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = a + static_cast<double>(i) * h;
    return g;
}

inline SweepConfig parse_sweep(Reader r) {
    SweepConfig s;
    s.axis = parse_axis(r.string("axis"), r.sub("axis"));
    s.grid = parse_grid(r, "grid");
    s.t0 = r.number("t0", 2.0);
    s.normalize = r.boolean("normalize", false);
    r.finish();
    if (s.grid.empty()) throw Error(ErrorKind::ConfigError, r.sub("grid") + ": empty");
    return s;
}

inline OutputConfig parse_output(Reader r) {
    OutputConfig o;
    o.path = r.string("path", std::string());
    o.format = r.string("format", std::string("csv"));
    r.finish();
    if (o.format != "csv" && o.format != "jsonl")
        throw Error(ErrorKind::ConfigError, r.sub("format") + ": expected csv or jsonl");
    return o;
}

inline RunConfig from_json(const json& j) {
    Reader r(j, "");
    RunConfig c;
    c.system = parse_system(r.object("system"));
    c.solver = r.has("solver") ? parse_solver(r.object("solver")) : SolverOptions{};
    c.noise = r.boolean("noise", false);
    if (r.has("sweep")) c.sweep = parse_sweep(r.object("sweep"));
    if (r.has("output")) c.output = parse_output(r.object("output"));
    r.finish();
    if (c.sweep && c.sweep->axis == transport::SweepAxis::DeltaT && c.system.topology != Topology::TwoTerminal)
        throw Error(ErrorKind::ConfigError, "sweep.axis: delta_t needs a two_terminal system");
    return c;
}

inline json parse_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ConfigError, std::string("malformed JSON: ") + e.what());
    }
}

inline RunConfig parse(const std::string& text) { return from_json(parse_text(text)); }

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_text(ss.str());
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigError, path + ": " + e.what());
    }
}

inline RunConfig load(const std::string& path) { return from_json(read_json_file(path)); }

// ---------------------------------------------------------------- serialization

inline json to_json(const bath::BathSpec& b) {
    return {{"alpha", b.alpha}, {"omega_c", b.omega_c}, {"temperature", b.temperature}};
}

inline json to_json(const SystemSpec& s) {
    json baths = json::object();
    for (const auto& [t, b] : s.baths) baths[to_string(t)] = to_json(b);
    return {{"topology", topology_name(s.topology)},
            {"u", s.u},
            {"left", {{"epsilon", s.left.epsilon}, {"delta", s.left.delta}}},
            {"right", {{"epsilon", s.right.epsilon}, {"delta", s.right.delta}}},
            {"baths", baths}};
}

inline json to_json(const SolverOptions& o) {
    return {{"scheme", to_string(o.scheme)},
            {"redfield_form", form_name(o.redfield_form)},
            {"secular", o.secular},
            {"neglect_lamb_shift", o.neglect_lamb_shift},
            {"chi_step", o.chi_step},
            {"epsrel", o.rate.fourier.quad.epsrel},
            {"abs_scale", o.rate.fourier.abs_scale},
            {"clamp_floor", o.rate.clamp_floor}};
}

inline json to_json(const RunConfig& c) {
    json j = {{"system", to_json(c.system)}, {"solver", to_json(c.solver)}, {"noise", c.noise}};
    if (c.sweep)
        j["sweep"] = {{"axis", transport::to_string(c.sweep->axis)},
                      {"grid", c.sweep->grid},
                      {"t0", c.sweep->t0},
                      {"normalize", c.sweep->normalize}};
    j["output"] = {{"path", c.output.path}, {"format", c.output.format}};
    return j;
}

inline std::string serialize(const RunConfig& c) { return to_json(c).dump(2); }

/// FNV-1a of the canonical serialization, for provenance lines.
inline std::string config_hash(const json& j) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace qheat::config
