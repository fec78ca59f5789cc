#include "doctest.h"
#include "memctl/errors.hpp"
#include "memctl/resolvent.hpp"
#include "oracles.hpp"

#include <cmath>
#include <sstream>

using namespace memctl;

namespace {

ResolventTable small_table(int n_steps, const CoefficientFunctions& coeffs, int modes = 8) {
    return build_resolvent_table(TimeGrid::make(1.0, n_steps), BasisSpec::with_modes(modes), coeffs);
}

}  // namespace

TEST_SUITE("resolvent") {

TEST_CASE("time grid") {
    const TimeGrid g = TimeGrid::make(1.0, 200);
    CHECK(g.step() == doctest::Approx(0.005));
    CHECK(g.node(200) == 1.0);
    CHECK(g.index_of(0.5) == 100);
    CHECK(g.index_of(0.5003) == -1);
    CHECK_THROWS_AS(TimeGrid::make(-1.0, 10), InputError);
    CHECK_THROWS_AS(TimeGrid::make(1.0, 0), InputError);
}

TEST_CASE("table storage addresses every (j >= i) pair once") {
    ModeTable t(TimeGrid::make(1.0, 7), 3);
    double v = 0.0;
    for (int n = 1; n <= 3; ++n)
        for (int i = 0; i <= 7; ++i)
            for (int j = i; j <= 7; ++j) t.at(n, j, i) = ++v;
    CHECK(t.raw().size() == static_cast<std::size_t>(3 * 8 * 9 / 2));
    v = 0.0;
    bool ok = true;
    for (int n = 1; n <= 3; ++n)
        for (int i = 0; i <= 7; ++i) {
            const auto col = t.column(n, i);
            for (int j = i; j <= 7; ++j) ok = ok && col[static_cast<std::size_t>(j - i)] == ++v;
        }
    CHECK(ok);
}

TEST_CASE("diagonal is exactly one") {
    const auto table = small_table(50, CoefficientFunctions::heat_default());
    for (int n = 1; n <= 8; ++n)
        for (int i = 0; i <= 50; ++i) REQUIRE(table(n, i, i) == 1.0);
}

TEST_CASE("memory-free table equals the closed-form evolution factor") {
    const auto coeffs = CoefficientFunctions::smooth(-2.0, -0.1, 0.0, 1.0);
    const auto table = small_table(100, coeffs);
    double err = 0.0;
    for (int n = 1; n <= 8; ++n)
        for (int i = 0; i <= 100; i += 5)
            for (int j = i; j <= 100; j += 3)
                err = std::max(err, std::abs(table(n, j, i) -
                                             oracle::memory_free_factor(n, i * 0.01, j * 0.01, -2.0, -0.1)));
    CHECK(err < 1e-5);
    CHECK(memory_free_defect(table, coeffs) < 1e-6);
    CHECK(evolution_factor(3, 0.2, 0.9, coeffs) == doctest::Approx(oracle::memory_free_factor(3, 0.2, 0.9, -2.0, -0.1)).epsilon(1e-10));
}

TEST_CASE("constant kernel mode 1 matches the second-order ODE") {
    const double closed = oracle::constant_kernel_closed_form(1, -2.0, 0.5, 1.0);
    const double rk4 = oracle::constant_kernel_rk4(1, -2.0, 0.5, 1.0, 4000);
    CHECK(closed == doctest::Approx(rk4).epsilon(1e-10));
    CHECK(closed == doctest::Approx(0.0073341).epsilon(1e-4));

    const auto r = solve_mode_resolvent(1, 0, TimeGrid::make(1.0, 100), CoefficientFunctions::constant(-2.0, 0.5));
    CHECK(std::abs(r.back() - closed) < 1e-5);
    CHECK(r.size() == 101);
}

TEST_CASE("constant kernel error is second order in the step") {
    const auto coeffs = CoefficientFunctions::constant(-2.0, 0.5);
    const double exact = oracle::constant_kernel_closed_form(2, -2.0, 0.5, 1.0);
    const double e1 = std::abs(solve_mode_resolvent(2, 0, TimeGrid::make(1.0, 50), coeffs).back() - exact);
    const double e2 = std::abs(solve_mode_resolvent(2, 0, TimeGrid::make(1.0, 100), coeffs).back() - exact);
    CHECK(e1 / e2 > 3.5);
    CHECK(e1 / e2 < 4.5);
}

TEST_CASE("Q and P kernel identities converge at second order") {
    const auto coeffs = CoefficientFunctions::heat_default();
    const auto coarse = small_table(100, coeffs);
    const auto fine = small_table(200, coeffs);
    const double q1 = q_kernel_reconstruct(coarse, coeffs).defect;
    const double q2 = q_kernel_reconstruct(fine, coeffs).defect;
    const double p1 = p_kernel_inverse_check(coarse, coeffs).defect;
    const double p2 = p_kernel_inverse_check(fine, coeffs).defect;
    CHECK(q1 < 1e-3);
    CHECK(p1 < 1e-3);
    CHECK(q1 / q2 >= 3.5);
    CHECK(p1 / p2 >= 3.5);
}

TEST_CASE("Q kernel vanishes without memory") {
    const auto coeffs = CoefficientFunctions::smooth(-2.0, -0.1, 0.0, 1.0);
    const auto check = q_kernel_reconstruct(small_table(40, coeffs, 4), coeffs);
    CHECK(check.kernel.raw().size() > 0);
    double m = 0.0;
    for (double v : check.kernel.raw()) m = std::max(m, std::abs(v));
    CHECK(m == 0.0);
}

TEST_CASE("fractional bound scan is finite and grid stable") {
    const auto coeffs = CoefficientFunctions::heat_default();
    const auto a = small_table(100, coeffs);
    const auto b = small_table(200, coeffs);
    for (double beta : {0.25, 0.5, 0.75}) {
        const double na = fractional_bound_scan(a, coeffs, beta);
        const double nb = fractional_bound_scan(b, coeffs, beta);
        CHECK(std::isfinite(na));
        CHECK(std::abs(na - nb) <= 0.1 * nb);
    }
    CHECK_THROWS_AS(fractional_bound_scan(a, coeffs, 1.0), InputError);
}

TEST_CASE("cocycle defect ratios stay bounded") {
    const auto coeffs = CoefficientFunctions::heat_default();
    const auto table = small_table(100, coeffs);
    const std::vector<double> eps{0.04, 0.08, 0.16};
    const CocycleSweep s = cocycle_sweep(table, coeffs, 0.5, 0.5, 0.0, eps);
    REQUIRE(s.ratio.size() == 3);
    for (double r : s.ratio) CHECK(std::isfinite(r));
    CHECK(s.max_ratio / s.min_ratio <= 4.0);
    CHECK_THROWS_AS(cocycle_defect(table, coeffs, 0.5, 0.0, 0.015), InputError);

    // Without memory R is an evolution family and the cocycle holds up to round-off.
    const auto free_coeffs = CoefficientFunctions::smooth(-2.0, -0.1, 0.0, 1.0);
    const auto free_table = small_table(100, free_coeffs);
    CHECK(cocycle_defect(free_table, free_coeffs, 0.5, 0.0, 0.08) < 1e-8);
}

TEST_CASE("exponential bound") {
    const auto table = small_table(100, CoefficientFunctions::heat_default());
    const ExponentialBound eb = fit_exponential_bound(table);
    CHECK(eb.M >= 1.0);
    CHECK(eb.beta < 0.0);
    CHECK(eb.holds_on(table));
    CHECK(max_operator_norm(table) == doctest::Approx(1.0));
}

TEST_CASE("csv dump header and row count") {
    const auto table = small_table(4, CoefficientFunctions::heat_default(), 2);
    std::ostringstream os;
    write_resolvent_csv(table, os);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "N,n_steps,tau");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 2 + 2 * 15);
}

TEST_CASE("unstable stepping is reported") {
    // A negative kernel turns the memory into feedback that grows like e^{48 t} on mode 4.
    const CoefficientFunctions wild = CoefficientFunctions::constant(-2.0, -200.0);
    CHECK_THROWS_AS(build_resolvent_table(TimeGrid::make(5.0, 500), BasisSpec::with_modes(4), wild), NumericalError);
}

}
