#include "doctest.h"
#include "memctl/config.hpp"

#include <cmath>

using namespace memctl;

namespace {

std::string error_of(const std::string& text) {
    try {
        (void)ScenarioConfig::from_text(text, "t.cfg");
    } catch (const ConfigError& e) {
        return e.what();
    } catch (const InputError& e) {
        return std::string("input: ") + e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults equal the heat-default preset") {
    const ScenarioConfig plain = ScenarioConfig::from_text("");
    const ScenarioConfig preset = ScenarioConfig::from_text("preset = heat-default\n");
    CHECK(plain.n_modes == preset.n_modes);
    CHECK(plain.a1 == doctest::Approx(preset.a1));
    CHECK(plain.a2 == doctest::Approx(preset.a2));
    CHECK(plain.lambdas == preset.lambdas);
    CHECK(preset.mode == RunMode::lambda_sweep);
    CHECK(preset.preset == "heat-default");
    CHECK(preset.a1 == doctest::Approx(std::numbers::pi / 4));
}

TEST_CASE("sections, comments, lists and overrides") {
    const auto c = ScenarioConfig::from_text(R"(# scenario
preset = heat-default
mode = steer-nonlinear   # trailing comment
seed = 42
[grid]
n_steps = 100
[control]
lambdas = 1, 0.5 ,0.25
target = modes: 0.1, -0.2
[actuator]
a1 = 0.25*pi
a2 = pi/2
)");
    CHECK(c.mode == RunMode::steer_nonlinear);
    CHECK(c.seed == 42);
    CHECK(c.n_steps == 100);
    CHECK(c.lambdas == std::vector<double>{1.0, 0.5, 0.25});
    CHECK(c.a2 == doctest::Approx(std::numbers::pi / 2));
    const ModeVector d = c.target_state();
    CHECK(d[0] == 0.1);
    CHECK(d[1] == -0.2);
    CHECK(d.tail(30).norm() == 0.0);
    CHECK(c.echo.at("grid.n_steps") == "100");
}

TEST_CASE("errors carry line numbers and key names") {
    CHECK(error_of("[actuator]\na1 = 2\na2 = 1\n").find("actuator.a1") != std::string::npos);
    CHECK(error_of("[grid]\nwidth = 3\n").find("t.cfg:2") != std::string::npos);
    CHECK(error_of("[grid]\nwidth = 3\n").find("grid.width") != std::string::npos);
    CHECK(error_of("just words\n").find("t.cfg:1") != std::string::npos);
    CHECK(error_of("[grid\n").find("section") != std::string::npos);
    CHECK(error_of("[grid]\nn_steps = 2.5\n").find("integer") != std::string::npos);
    CHECK(error_of("[grid]\ntau = abc\n").find("grid.tau") != std::string::npos);
    CHECK(error_of("mode = fly\n").find("mode") != std::string::npos);
    CHECK(error_of("preset = nope\n").find("nope") != std::string::npos);
    CHECK(error_of("[control]\nlambdas = 0.1, 0.2\n").find("decreasing") != std::string::npos);
    CHECK(error_of("[control]\ntarget = sombrero\n").find("control.target") != std::string::npos);
    CHECK(error_of("[coefficients]\nb0 = -0.5\n").find("coefficients.b0") != std::string::npos);
    CHECK(error_of("[basis]\nn_modes = 80\n").find("collocation_points") != std::string::npos);
    CHECK(error_of("[history]\ntail = wavy\n").find("history.tail") != std::string::npos);
    CHECK(error_of("[grid]\npreset = heat-default\n").find("grid.preset") != std::string::npos);
}

TEST_CASE("every preset parses and builds a problem") {
    for (const auto& name : preset_names()) {
        CAPTURE(name);
        const auto c = ScenarioConfig::from_text("preset = " + name + "\n");
        CHECK_NOTHROW(c.problem());
        CHECK(c.preset == name);
    }
    CHECK(ScenarioConfig::from_text("preset = memory-free\n").c0 == 0.0);
    CHECK(ScenarioConfig::from_text("preset = steer-linear\n").mode == RunMode::steer_linear);
    CHECK_THROWS_AS(preset_text("unknown"), ConfigError);
}

TEST_CASE("builders") {
    const auto c = ScenarioConfig::from_text("[history]\namplitude = 2\n[delay]\nkind = quadratic\na = 0.1\nb = 0.2\n");
    const auto phi = c.history();
    CHECK(phi.head()[0] == 2.0);
    CHECK(phi.at(-1.0)[0] == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
    CHECK(phi.span() == doctest::Approx(1.5));
    CHECK(c.delay_law()(2.0) == doctest::Approx(0.9));
    CHECK_FALSE(c.delay_law().constant_lag.has_value());

    const auto g = ScenarioConfig::from_text("[history]\ngamma = 4\n");
    CHECK(g.history_span == doctest::Approx(0.75));

    CHECK(ScenarioConfig::from_text("[control]\ntarget = zero\n").target_state().norm() == 0.0);
    CHECK(ScenarioConfig::from_text("[control]\ntarget = first-mode\n").target_state()[0] == 0.5);
    const ModeVector bump = ScenarioConfig::from_text("").target_state();
    CHECK(bump[0] > 0.0);
    CHECK(std::abs(bump[1]) < 1e-12);  // symmetric about pi/2
}

TEST_CASE("mode names round trip") {
    for (RunMode m : {RunMode::resolvent_check, RunMode::steer_linear, RunMode::steer_nonlinear,
                      RunMode::lambda_sweep, RunMode::duality_lab})
        CHECK(parse_run_mode(to_string(m)) == m);
    CHECK_THROWS_AS(parse_run_mode("steer"), ConfigError);
}

}
