#include "catch_amalgamated.hpp"

#include "qheat/config.hpp"

using namespace qheat;
using Catch::Matchers::ContainsSubstring;

namespace {

const char* kFull = R"({
  "system": {
    "topology": "three_terminal",
    "u": 0.25,
    "left": {"epsilon": 0.8, "delta": 1.0},
    "right": {"epsilon": 0.8, "delta": 0.9},
    "baths": {
      "Lh": {"alpha": 3.0, "omega_c": 5.0, "temperature": 2.0},
      "Lc": {"alpha": 3.0, "omega_c": 5.0, "temperature": 0.2},
      "R": {"alpha": 0.1, "omega_c": 4.0, "temperature": 0.5}
    }
  },
  "solver": {"scheme": "redfield", "redfield_form": "population", "chi_step": 2e-4, "epsrel": 1e-10},
  "noise": true,
  "sweep": {"axis": "t_r", "grid": [0.3, 0.5, 0.7], "normalize": true},
  "output": {"path": "out.jsonl", "format": "jsonl"}
})";

std::string error_of(const std::string& text) {
    try {
        config::parse(text);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigError);
        return e.what();
    }
    FAIL("expected a config error");
    return {};
}

}  // namespace

TEST_CASE("parse, serialize and parse again is the identity", "[config]") {
    const auto a = config::parse(kFull);
    const auto b = config::parse(config::serialize(a));
    CHECK(a == b);
    CHECK(config::serialize(a) == config::serialize(b));
    CHECK(a.system.topology == Topology::ThreeTerminal);
    CHECK(a.system.bath(Terminal::R).omega_c == 4.0);
    CHECK(a.solver.scheme == Scheme::Redfield);
    CHECK(a.solver.redfield_form == RedfieldForm::Population);
    CHECK(a.sweep->grid.size() == 3);
    CHECK(a.output.format == "jsonl");
}

TEST_CASE("defaults fill omitted keys", "[config]") {
    const auto c = config::parse(R"({"system": {"baths": {"L": {"alpha": 1, "temperature": 1},
                                                           "R": {"alpha": 1, "temperature": 2}}}})");
    CHECK(c.system.u == 0.1);
    CHECK(c.system.left.epsilon == 1.0);
    CHECK(c.system.bath(Terminal::L).omega_c == 5.0);
    CHECK(c.solver.scheme == Scheme::NePtre);
    CHECK_FALSE(c.sweep.has_value());
    CHECK(config::parse(config::serialize(c)) == c);
}

TEST_CASE("unknown keys are rejected with their path", "[config]") {
    CHECK_THAT(error_of(R"({"system": {"baths": {"L": {"alpha": 1, "temperature": 1},
                                                 "R": {"alpha": 1, "temperature": 2}}}, "extra": 1})"),
               ContainsSubstring("extra"));
    CHECK_THAT(error_of(R"({"system": {"baths": {"L": {"alpha": 1, "temperature": 1, "cutoff": 5},
                                                 "R": {"alpha": 1, "temperature": 2}}}})"),
               ContainsSubstring("baths.L.cutoff"));
}

TEST_CASE("invalid values name the offending key", "[config]") {
    CHECK_THAT(error_of(R"({"system": {"baths": {"L": {"alpha": 1, "temperature": 1},
                                                 "R": {"alpha": 1, "temperature": -2}}}})"),
               ContainsSubstring("baths.R.temperature"));
    CHECK_THAT(error_of(R"({"system": {"baths": {"L": {"alpha": -1, "temperature": 1},
                                                 "R": {"alpha": 1, "temperature": 2}}}})"),
               ContainsSubstring("baths.L.alpha"));
    CHECK_THAT(error_of(R"({"system": {"baths": {"L": {"alpha": 1, "temperature": 1}}}})"),
               ContainsSubstring("R"));
    CHECK_THAT(error_of(R"({"system": {"baths": {"L": {"alpha": 1, "temperature": 1},
                                                 "R": {"alpha": 1, "temperature": 2}}},
                            "solver": {"scheme": "exact"}})"),
               ContainsSubstring("solver.scheme"));
    CHECK_THAT(error_of(R"({"system": {"baths": {"L": {"alpha": "1", "temperature": 1},
                                                 "R": {"alpha": 1, "temperature": 2}}}})"),
               ContainsSubstring("alpha"));
    CHECK_THAT(error_of("{not json"), ContainsSubstring("JSON"));
}

TEST_CASE("delta_t sweeps need two terminals", "[config]") {
    std::string text = kFull;
    text.replace(text.find("\"t_r\""), 5, "\"delta_t\"");
    CHECK_THAT(error_of(text), ContainsSubstring("delta_t"));
}

TEST_CASE("grid ranges are inclusive", "[config]") {
    const auto c = config::parse(R"({"system": {"baths": {"L": {"alpha": 1, "temperature": 1},
                                                           "R": {"alpha": 1, "temperature": 2}}},
                                     "sweep": {"axis": "delta_t", "grid": {"start": 0, "stop": 3.8, "step": 0.2}}})");
    REQUIRE(c.sweep->grid.size() == 20);
    CHECK(c.sweep->grid.front() == 0.0);
    CHECK_THAT(c.sweep->grid.back(), Catch::Matchers::WithinAbs(3.8, 1e-12));
    CHECK_THAT(error_of(R"({"system": {"baths": {"L": {"alpha": 1, "temperature": 1},
                                                 "R": {"alpha": 1, "temperature": 2}}},
                            "sweep": {"axis": "delta_t", "grid": {"start": 1, "stop": 0, "step": 0.2}}})"),
               ContainsSubstring("sweep.grid"));
}

TEST_CASE("config hash tracks content", "[config]") {
    const auto a = config::parse_text(kFull);
    auto b = a;
    CHECK(config::config_hash(a) == config::config_hash(b));
    b["noise"] = false;
    CHECK(config::config_hash(a) != config::config_hash(b));
}

TEST_CASE("bundled presets parse", "[config]") {
    for (const char* id : {"fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "figA1", "figA2", "figB1", "figC1"}) {
        const auto j = config::read_json_file(std::string(QHEAT_PRESET_DIR) + "/" + id + ".json");
        CHECK(j.at("figure") == id);
    }
    CHECK_THROWS_AS(config::read_json_file("/nonexistent/preset.json"), Error);
}
