#include "doctest.h"
#include "memctl/config.hpp"
#include "memctl/control.hpp"
#include "memctl/errors.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace memctl;

namespace {

// One mode, full window, no memory, b = -2: D(tau, t) = exp(-3 (tau - t)).
struct ScalarCase {
    ResolventTable table;
    Eigen::MatrixXd bmat;
    GramianMatrix gram;

    explicit ScalarCase(int n_steps = 2000)
        : table(build_resolvent_table(TimeGrid::make(1.0, n_steps), BasisSpec::with_modes(1),
                                      CoefficientFunctions::constant(-2.0, 0.0))),
          bmat(control_matrix(0.0, oracle::pi, 1)),
          gram(assemble_gramian(table, bmat)) {}
};

ModeVector scalar(double v) { return ModeVector::Constant(1, v); }

Trajectory linear_response(const ResolventTable& table, const Eigen::MatrixXd& b, const ModeVector& x0,
                           const ControlSignal& u) {
    std::vector<ModeVector> f;
    for (const auto& s : u.samples) f.push_back(b * s);
    return affine_mild_solve(table, x0, f);
}

}  // namespace

TEST_SUITE("control") {

TEST_CASE("single-mode full-window gramian matches the closed form") {
    const ScalarCase sc;
    const double exact = (1.0 - std::exp(-6.0)) / 6.0;
    CHECK(exact == doctest::Approx(oracle::single_mode_gramian(-3.0, 1.0)));
    CHECK(std::abs(sc.gram.entries(0, 0) - exact) < 1e-6);
    // Trapezoid: second order in the step
    const ScalarCase coarse(200);
    CHECK(std::abs(coarse.gram.entries(0, 0) - exact) == doctest::Approx(100.0 * std::abs(sc.gram.entries(0, 0) - exact)).epsilon(0.02));
}

TEST_CASE("scalar regularized solve") {
    GramianMatrix g{Eigen::MatrixXd::Constant(1, 1, 0.166254), 1.0};
    CHECK(regularized_solve(0.01, g, scalar(1.0))[0] == doctest::Approx(0.056736).epsilon(1e-5));
    CHECK(gramian_resolvent(0.01, g, scalar(1.0))[0] == doctest::Approx(5.6736).epsilon(1e-5));
    CHECK_THROWS_AS(regularized_solve(0.0, g, scalar(1.0)), InputError);
    CHECK_THROWS_AS(regularized_solve(1e-13, g, scalar(1.0)), InputError);
    CHECK_THROWS_AS(regularized_solve(-1.0, g, scalar(1.0)), InputError);
}

TEST_CASE("gramian of the default window is symmetric and positive definite") {
    const auto coeffs = CoefficientFunctions::heat_default();
    const auto table = build_resolvent_table(TimeGrid::make(1.0, 200), BasisSpec::with_modes(16), coeffs);
    const auto g = assemble_gramian(table, control_matrix(oracle::pi / 4, 3 * oracle::pi / 4, 16));
    CHECK(g.asymmetry() <= 1e-12 * g.trace());
    CHECK(g.min_eigenvalue() > 0.0);
    const auto gs = serial::assemble_gramian(table, control_matrix(oracle::pi / 4, 3 * oracle::pi / 4, 16));
    // The serial reference sums outer products instead; equal up to rounding.
    CHECK((g.entries - gs.entries).cwiseAbs().maxCoeff() <= 1e-15 * g.trace());
}

TEST_CASE("steering error against the eigen-decomposition oracle") {
    const auto coeffs = CoefficientFunctions::heat_default();
    const auto table = build_resolvent_table(TimeGrid::make(1.0, 200), BasisSpec::with_modes(8), coeffs);
    const Eigen::MatrixXd b = control_matrix(oracle::pi / 4, 3 * oracle::pi / 4, 8);
    const auto g = assemble_gramian(table, b);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.entries);
    ModeVector x0 = ModeVector::Zero(8), d = ModeVector::Zero(8);
    x0[0] = 1.0;
    d << 0.3, 0.0, -0.2, 0.0, 0.1, 0.0, 0.0, 0.0;
    const ModeVector w = d - table.slice(200, 0).cwiseProduct(x0);
    double prev = std::numeric_limits<double>::infinity();
    double prev_energy = 0.0;
    for (double lambda : {1.0, 0.1, 0.01, 0.001}) {
        const ModeVector coef = es.eigenvectors().transpose() * w;
        const ModeVector scaled = (lambda / (es.eigenvalues().array() + lambda)).matrix().cwiseProduct(coef);
        const double expect = scaled.norm();
        const auto r = linear_optimal_control(lambda, table, b, g, x0, d);
        CHECK(r.terminal_error == doctest::Approx(expect).epsilon(1e-9));
        CHECK(r.identity_residual <= 1e-10);
        CHECK(r.terminal_error < prev);
        CHECK(r.control_energy >= prev_energy);
        CHECK(expect <= w.norm());
        prev = r.terminal_error;
        prev_energy = r.control_energy;
    }
}

TEST_CASE("lambda contraction on random vectors") {
    const auto table = build_resolvent_table(TimeGrid::make(1.0, 100), BasisSpec::with_modes(6),
                                             CoefficientFunctions::heat_default());
    const auto g = assemble_gramian(table, control_matrix(0.5, 2.0, 6));
    std::mt19937_64 rng(7);
    std::normal_distribution<double> nd;
    for (int k = 0; k < 50; ++k) {
        ModeVector x(6);
        for (int i = 0; i < 6; ++i) x[i] = nd(rng);
        for (double lambda : {1.0, 1e-2, 1e-4}) CHECK(regularized_solve(lambda, g, x).norm() <= x.norm() * (1 + 1e-12));
    }
}

TEST_CASE("scalar sweep errors") {
    const ScalarCase sc;
    SteeringScenario s;
    s.table = &sc.table;
    s.bmat = sc.bmat;
    s.gram = sc.gram;
    s.x0 = scalar(0.0);
    s.d = scalar(1.0);
    const std::vector<double> lambdas{1.0, 0.1, 0.01};
    const auto rows = lambda_sweep(lambdas, s);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].terminal_error == doctest::Approx(0.857).epsilon(1e-3));
    CHECK(rows[1].terminal_error == doctest::Approx(0.376).epsilon(2e-3));
    CHECK(rows[2].terminal_error == doctest::Approx(0.0567).epsilon(1e-3));
    for (const auto& r : rows) CHECK(r.terminal_error == doctest::Approx(r.lambda / (r.lambda + 0.166254)).epsilon(1e-5));
    CHECK(rows[0].control_energy <= rows[1].control_energy);
    CHECK(rows[1].control_energy <= rows[2].control_energy);
    CHECK(strictly_decreasing_errors(rows));

    const std::vector<double> bad{0.1, 0.2};
    CHECK_THROWS_AS(lambda_sweep(bad, s), InputError);
}

TEST_CASE("fitted slope of a synthetic power law") {
    std::vector<SweepRow> rows;
    for (double l : {0.1, 0.01, 0.001}) rows.push_back(SweepRow{l, 3.0 * l, 0, 0, 0, true, {}});
    CHECK(fitted_decay_slope(rows) == doctest::Approx(1.0));
    rows.insert(rows.begin() + 1, SweepRow{0.05, std::nan(""), 0, 0, 0, false, "failed"});
    CHECK(fitted_decay_slope(rows) == doctest::Approx(1.0));
    CHECK(strictly_decreasing_errors(rows));
    rows[2].terminal_error = 1.0;
    CHECK_FALSE(strictly_decreasing_errors(rows));
}

TEST_CASE("stationarity in the scalar case") {
    const ScalarCase sc(400);
    const auto r = linear_optimal_control(0.01, sc.table, sc.bmat, sc.gram, scalar(0.5), scalar(1.0));
    const auto pr = optimality_perturbation_test(r.x, r.u, scalar(1.0), 0.01, sc.table, sc.bmat, 16, 1e-4, 3);
    CHECK(pr.max_central_difference <= 1e-6);
    CHECK(pr.passed);
    CHECK(pr.min_increase >= -1e-10);
    const auto none = optimality_perturbation_test(r.x, r.u, scalar(1.0), 0.01, sc.table, sc.bmat, 0, 1e-4, 3);
    CHECK(none.max_central_difference == 0.0);
}

TEST_CASE("cost functional: zero, quadratic scaling, convexity") {
    const ScalarCase sc(200);
    const auto& grid = sc.table.grid();
    const ModeVector x0 = scalar(1.0);

    auto zero_u = ControlSignal::zero(grid, 1);
    const auto x_free = linear_response(sc.table, sc.bmat, x0, zero_u);
    CHECK(cost_functional(x_free, zero_u, x_free.states.back(), 0.3) == 0.0);

    ControlSignal u{grid, std::vector<ModeVector>(201, scalar(0.7))};
    ControlSignal u2{grid, std::vector<ModeVector>(201, scalar(1.4))};
    const double d0 = cost_functional(x_free, u, x_free.states.back(), 1.0);
    const double d1 = cost_functional(x_free, u2, x_free.states.back(), 1.0);
    CHECK(d1 == doctest::Approx(4.0 * d0));

    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    const ModeVector d = scalar(0.2);
    for (int k = 0; k < 20; ++k) {
        ControlSignal a{grid, {}}, b{grid, {}}, m{grid, {}};
        for (int j = 0; j <= 200; ++j) {
            a.samples.push_back(scalar(nd(rng)));
            b.samples.push_back(scalar(nd(rng)));
            m.samples.push_back(0.5 * (a.samples.back() + b.samples.back()));
        }
        const double ga = cost_functional(linear_response(sc.table, sc.bmat, x0, a), a, d, 0.05);
        const double gb = cost_functional(linear_response(sc.table, sc.bmat, x0, b), b, d, 0.05);
        const double gm = cost_functional(linear_response(sc.table, sc.bmat, x0, m), m, d, 0.05);
        CHECK(gm <= 0.5 * (ga + gb) + 1e-12);
    }
}

TEST_CASE("nonlinear outer loop converges on the default scenario") {
    auto cfg = ScenarioConfig::from_text("preset = heat-default\n[basis]\nn_modes = 8\ncollocation_points = 32\n");
    const auto p = cfg.problem();
    const auto table = build_resolvent_table(p.grid, p.basis, p.coeffs);
    const auto g = assemble_gramian(table, p.actuator());
    const auto r = nonlinear_control_loop(1e-3, p, cfg.target_state(), table, g);
    CHECK(r.outer_iterations <= 50);
    CHECK(r.identity_residual <= 1e-6);
    CHECK_FALSE(r.outer_changes.empty());
    CHECK(r.outer_changes.back() <= 1e-8);
}

TEST_CASE("failed rows are marked and the sweep continues") {
    auto cfg = ScenarioConfig::from_text("preset = heat-default\n[basis]\nn_modes = 4\ncollocation_points = 16\n");
    const auto p = cfg.problem();
    const auto table = build_resolvent_table(p.grid, p.basis, p.coeffs);
    SteeringScenario s;
    s.kind = SteeringKind::nonlinear;
    s.problem = &p;
    s.table = &table;
    s.bmat = p.actuator();
    s.gram = assemble_gramian(table, s.bmat);
    s.x0 = p.phi.head();
    s.d = cfg.target_state();
    s.outer.picard = PicardOptions{1e-30, 1};
    const std::vector<double> lambdas{0.1, 0.01};
    const auto rows = lambda_sweep(lambdas, s);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK_FALSE(r.ok);
        CHECK(std::isnan(r.terminal_error));
        CHECK_FALSE(r.message.empty());
    }
}

}
