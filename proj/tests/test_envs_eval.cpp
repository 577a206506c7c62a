#include <doctest.h>

#include <cmath>

#include "rrmdp/envs.hpp"
#include "rrmdp/eval.hpp"
#include "rrmdp/planner.hpp"
#include "test_util.hpp"

using namespace rrmdp;

TEST_CASE("benchmark families produce valid models") {
    const TabularRMDP chain = make_chain(ChainParams{});
    CHECK(validate(chain).empty());
    CHECK(chain.n_states == 5);  // 4 cells + fail
    REQUIRE(chain.fail_state.has_value());
    CHECK(*chain.fail_state == 4);

    const TabularRMDP grid = make_gridworld(GridworldParams{});
    CHECK(validate(grid).empty());
    CHECK(grid.n_states == 9);
    CHECK(grid.n_actions == 4);
    CHECK_FALSE(grid.fail_state.has_value());
    // Goal corner pays 1 under every action and keeps the agent there.
    for (int a = 0; a < 4; ++a) {
        CHECK(grid.reward(8, a) == 1.0);
        CHECK(grid.kernel(grid.sa_index(8, a), 8) == 1.0);
    }

    const TabularRMDP rs = make_risky_safe(RiskySafeParams{});
    CHECK(validate(rs).empty());
    CHECK(rs.n_states == 3);
    CHECK(rs.reward(0, 0) == 0.54);
    CHECK(rs.kernel(rs.sa_index(0, 1), 1) == doctest::Approx(0.9));
    CHECK(rs.kernel(rs.sa_index(0, 1), 2) == doctest::Approx(0.1));
}

TEST_CASE("chain fail probability feeds the forward action only") {
    ChainParams p;
    p.fail_prob = 0.2;
    const TabularRMDP m = make_chain(p);
    for (int s = 0; s < p.length; ++s) {
        CHECK(m.kernel(m.sa_index(s, 1), *m.fail_state) ==
              doctest::Approx(0.2));
        CHECK(m.kernel(m.sa_index(s, 0), *m.fail_state) == 0.0);
    }
}

TEST_CASE("make_benchmark parses families and rejects junk") {
    BenchmarkSpec spec;
    spec.name = "risky-safe";
    spec.params = {{"rho", 0.25}, {"p_fail", 0.2}};
    const TabularRMDP m = make_benchmark(spec);
    CHECK(m.rho == 0.25);
    CHECK(m.kernel(m.sa_index(0, 1), 2) == doctest::Approx(0.2));

    spec.name = "volcano";
    CHECK_THROWS_AS(make_benchmark(spec), std::invalid_argument);
    spec.name = "chain";
    spec.params = {{"lenght", 5}};  // typo must not pass silently
    CHECK_THROWS_AS(make_benchmark(spec), std::invalid_argument);
}

TEST_CASE("documented thresholds of the risky-safe family") {
    RiskySafeParams p;
    CHECK(risky_safe_flip_threshold(p) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(risky_safe_crossover_p_fail(p) ==
          doctest::Approx(0.4).epsilon(1e-12));

    // Below the nominal crossover the risky action wins nominally, above it
    // the safe action does; verify on the nominal planner.
    p.p_fail = 0.35;
    const PlanResult below = nonrobust_vi(make_risky_safe(p), 1e-10);
    CHECK(below.policy.actions[0] == 1);
    p.p_fail = 0.45;
    const PlanResult above = nonrobust_vi(make_risky_safe(p), 1e-10);
    CHECK(above.policy.actions[0] == 0);
}

TEST_CASE("evaluate_policy reports nominal and robust returns") {
    const TabularRMDP m = make_risky_safe(RiskySafeParams{});
    const Policy risky{{1, 0, 0}};
    const Policy safe{{0, 0, 0}};
    const TVBallSpec spec{m.rho, true};

    const EvalReport risky_rep = evaluate_policy(risky, m, spec, 1e-11);
    const EvalReport safe_rep = evaluate_policy(safe, m, spec, 1e-11);
    REQUIRE(risky_rep.robust_converged);
    REQUIRE(safe_rep.robust_converged);

    // An adversary can only take value away.
    CHECK(safe_rep.robust_j <= safe_rep.nominal_j + 1e-12);
    CHECK(risky_rep.robust_j <= risky_rep.nominal_j + 1e-12);

    // Nominal: risky dominates, since p_fail 0.1 sits below the 0.4
    // crossover.
    CHECK(risky_rep.nominal_j > safe_rep.nominal_j);
    // At rho == 0.3 the robust planner is indifferent at the start; both
    // policies share the robust value there.
    CHECK(risky_rep.robust_j ==
          doctest::Approx(safe_rep.robust_j).epsilon(1e-8));

    // Zero radius: robust equals nominal by construction.
    const EvalReport zero = evaluate_policy(risky, m, TVBallSpec{0.0, false});
    CHECK(zero.robust_j == zero.nominal_j);
    CHECK(zero.robust_converged);
}

TEST_CASE("perturbation sweep tracks the knob and the ball boundary") {
    BenchmarkSpec spec;
    spec.name = "risky-safe";
    spec.params = {{"rho", 0.3}};
    const Policy risky{{1, 0, 0}};
    const std::vector<double> values{0.1, 0.2, 0.3, 0.4, 0.5, 0.7};
    const auto points = perturbation_sweep(risky, spec, "p_fail", values);
    REQUIRE(points.size() == values.size());

    for (std::size_t i = 0; i < points.size(); ++i)
        CHECK(points[i].knob_value == values[i]);
    // Larger failure probability can only hurt the risky policy.
    for (std::size_t i = 1; i < points.size(); ++i)
        CHECK(points[i].j <= points[i - 1].j + 1e-12);
    // Base p_fail is 0.1; TV distance of the perturbed risky row is
    // |p - 0.1|, so the ball membership flips past 0.1 + 0.3.
    CHECK(points[0].inside_ball);
    CHECK(points[2].inside_ball);
    CHECK(points[3].inside_ball);  // boundary case 0.4 sits on the edge
    CHECK_FALSE(points[4].inside_ball);
    CHECK_FALSE(points[5].inside_ball);

    CHECK_THROWS_AS(perturbation_sweep(risky, spec, "width", values),
                    std::invalid_argument);
}

TEST_CASE("robust return is the floor of in-ball perturbations") {
    // The robust value lower bounds the nominal value on every model inside
    // the ball. The sweep only perturbs the entry row while the adversary
    // degrades every row, so the bound is not tight here; the direction of
    // the inequality is still a real invariant of the implementation.
    const TabularRMDP base = make_risky_safe(RiskySafeParams{});
    const Policy risky{{1, 0, 0}};
    const EvalReport rep = evaluate_policy(risky, base, TVBallSpec{0.3, true});

    BenchmarkSpec spec;
    spec.name = "risky-safe";
    spec.params = {{"rho", 0.3}};
    std::vector<double> values;
    for (int k = 0; k <= 30; ++k) values.push_back(0.1 + k * 0.01);
    const auto points = perturbation_sweep(risky, spec, "p_fail", values);
    double worst_inside = 1e100;
    for (const auto& pt : points)
        if (pt.inside_ball) worst_inside = std::min(worst_inside, pt.j);
    CHECK(rep.robust_j <= worst_inside + 1e-9);
}

TEST_CASE("concentratability of the uniform design is the cell count ratio") {
    const TabularRMDP m = make_risky_safe(RiskySafeParams{});
    const Eigen::MatrixXd mu = testutil::uniform_mu(3, 2);
    const double c = estimate_concentratability(mu, m, 20, 5);
    // Occupancies sum to one over 6 cells, each weighted 1/6 by mu, so the
    // ratio is at most 6 and at least 1.
    CHECK(c >= 1.0);
    CHECK(c <= 6.0 + 1e-9);

    Eigen::MatrixXd holey = mu;
    holey(0, 1) = 0.0;  // risky start action now unsupported
    holey /= holey.sum();
    CHECK(std::isinf(estimate_concentratability(holey, m, 20, 5)));
}

TEST_CASE("tabular classes pass the closedness diagnostics") {
    const TabularRMDP m = make_risky_safe(RiskySafeParams{});
    const Eigen::MatrixXd mu = testutil::uniform_mu(3, 2);
    const LinearQClass fclass = make_q_class(FeatureMap::one_hot(3, 2), m.gamma);
    const LinearDualClass gclass =
        make_dual_class(FeatureMap::one_hot(3, 2), m.rho, m.gamma);

    const double eps_c =
        estimate_completeness(fclass, gclass, m, mu, m.rho, 4, 21);
    CHECK(eps_c >= 0.0);
    CHECK(eps_c <= 1e-10);  // one-hot is closed under the operator

    const double gap = estimate_dual_gap(gclass, fclass, m, mu, m.rho, 4, 21);
    CHECK(gap >= -1e-12);
    CHECK(gap <= 1e-10);  // one-hot witnesses reach the exact dual

    const DiagnosticsReport rep =
        run_diagnostics(m, mu, fclass, gclass, m.rho, 4, 21);
    CHECK(rep.mu_coverage == 1.0);
    CHECK(rep.completeness_error <= 1e-10);
    CHECK(rep.dual_gap <= 1e-10);
    CHECK(std::isfinite(rep.concentratability_ratio));
}

TEST_CASE("restricting the witness class opens a dual gap") {
    // A constant witness cannot match six different per-cell minimizers.
    const TabularRMDP m = testutil::random_rmdp(81, 3, 2, 0.9, 0.3, true);
    const Eigen::MatrixXd mu = testutil::uniform_mu(3, 2);
    const LinearQClass fclass = make_q_class(FeatureMap::one_hot(3, 2), m.gamma);
    const LinearDualClass weak =
        make_dual_class(FeatureMap::constant(3, 2), m.rho, m.gamma);
    const double gap = estimate_dual_gap(weak, fclass, m, mu, m.rho, 6, 22);
    CHECK(gap >= 0.0);
    const LinearDualClass strong =
        make_dual_class(FeatureMap::one_hot(3, 2), m.rho, m.gamma);
    const double tight = estimate_dual_gap(strong, fclass, m, mu, m.rho, 6, 22);
    CHECK(tight <= gap + 1e-12);
}
