#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "rrmdp/dual.hpp"
#include "rrmdp/func_approx.hpp"
#include "test_util.hpp"

using namespace rrmdp;

namespace {

Dataset tiny_dataset() {
    Dataset d;
    d.n_states = 2;
    d.n_actions = 1;
    d.mu = testutil::uniform_mu(2, 1);
    d.seed = 0;
    d.transitions = {
        Transition{0, 0, 0.5, 0, 1.0},
        Transition{0, 0, 0.5, 1, 3.0},
        Transition{1, 0, 0.0, 1, 1.0},
    };
    return d;
}

}  // namespace

TEST_CASE("class factories set the documented clip ranges") {
    const LinearQClass f = make_q_class(FeatureMap::one_hot(2, 2), 0.9);
    CHECK(f.clip_lo == 0.0);
    CHECK(f.clip_hi == doctest::Approx(10.0).epsilon(1e-12));
    const LinearDualClass g =
        make_dual_class(FeatureMap::one_hot(2, 2), 0.25, 0.9);
    CHECK(g.clip_hi == doctest::Approx(2.0 / (0.25 * 0.1)).epsilon(1e-12));

    LinearQClass big = f;
    big.weights.setConstant(100.0);
    CHECK(big.value(0, 0) == f.clip_hi);
    big.weights.setConstant(-3.0);
    CHECK(big.value(0, 0) == 0.0);
}

TEST_CASE("dual loss on a single transition") {
    Dataset d;
    d.n_states = 2;
    d.n_actions = 1;
    d.mu = testutil::uniform_mu(2, 1);
    d.transitions = {Transition{0, 0, 0.0, 1, 1.0}};

    LinearQClass f = make_q_class(FeatureMap::one_hot(2, 1), 0.5);
    f.weights << 0.0, 0.2;
    LinearDualClass g = make_dual_class(FeatureMap::one_hot(2, 1), 0.4, 0.5);
    g.weights << 0.5, 0.0;

    // (0.5 - 0.2)+ - (1 - 0.4) * 0.5 = 0.
    CHECK(dual_loss_empirical(g, f, d, 0.4) ==
          doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("empirical dual loss over the exact dataset equals population") {
    const TabularRMDP m = testutil::random_rmdp(70, 4, 3, 0.9, 0.3, true);
    const Eigen::MatrixXd mu = testutil::uniform_mu(4, 3);
    const Dataset data = exact_expectation_dataset(m, mu);

    LinearQClass f = make_q_class(FeatureMap::one_hot(4, 3), m.gamma);
    LinearDualClass g = make_dual_class(FeatureMap::one_hot(4, 3), 0.3, m.gamma);
    const std::uint64_t seed = derive_seed(70, 99);
    for (int k = 0; k < 12; ++k) {
        f.weights[k] =
            m.value_upper() * uniform01_at(seed, static_cast<std::uint64_t>(k));
        g.weights[k] =
            2.0 * uniform01_at(seed, static_cast<std::uint64_t>(50 + k));
    }
    CHECK(dual_loss_empirical(g, f, data, 0.3) ==
          doctest::Approx(dual_loss_population(g, f, m, mu, 0.3))
              .epsilon(1e-12));
}

TEST_CASE("partition minimization matches the per-row scalar dual") {
    const TabularRMDP m = testutil::random_rmdp(71, 3, 2, 0.8, 0.35, false);
    const Eigen::MatrixXd mu = testutil::uniform_mu(3, 2);
    const Dataset data = exact_expectation_dataset(m, mu);

    LinearQClass f = make_q_class(FeatureMap::one_hot(3, 2), m.gamma);
    const std::uint64_t seed = derive_seed(71, 3);
    for (int k = 0; k < 6; ++k)
        f.weights[k] =
            m.value_upper() * uniform01_at(seed, static_cast<std::uint64_t>(k));
    const Eigen::VectorXd values = value_of(f.materialize()).values;

    auto [g, report] = erm_dual(
        data, f, make_dual_class(FeatureMap::one_hot(3, 2), 0.35, m.gamma),
        ErmOptions{}, 0.35);
    CHECK(report.step_schedule == "exact-breakpoint");
    CHECK(report.iterations == 1);
    CHECK(report.empirical_loss ==
          doctest::Approx(dual_loss_empirical(g, f, data, 0.35))
              .epsilon(1e-13));

    // Per cell, the group weight must be the scalar dual minimizer of the
    // cell's nominal row (fail-state form), including the tie convention.
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) {
            const Eigen::VectorXd row =
                m.kernel.row(m.sa_index(s, a)).transpose();
            const DualSolution sol =
                tv_inner_inf_dual(row, values, TVBallSpec{0.35, true}, m.gamma);
            CHECK(g.weights[s * 2 + a] ==
                  doctest::Approx(sol.eta_star).epsilon(1e-12));
        }

    // No other witness in the class does better on this data.
    LinearDualClass probe = g;
    probe.weights.array() += 0.11;
    CHECK(dual_loss_empirical(probe, f, data, 0.35) >=
          report.empirical_loss - 1e-13);
}

TEST_CASE("subgradient scheme approaches the exact partition optimum") {
    const TabularRMDP m = testutil::random_rmdp(72, 2, 2, 0.5, 0.3, false);
    const Eigen::MatrixXd mu = testutil::uniform_mu(2, 2);
    const Dataset data = exact_expectation_dataset(m, mu);

    LinearQClass f = make_q_class(FeatureMap::one_hot(2, 2), m.gamma);
    const std::uint64_t seed = derive_seed(72, 3);
    for (int k = 0; k < 4; ++k)
        f.weights[k] =
            m.value_upper() * uniform01_at(seed, static_cast<std::uint64_t>(k));

    auto [g_exact, rep_exact] = erm_dual(
        data, f, make_dual_class(FeatureMap::one_hot(2, 2), 0.3, m.gamma),
        ErmOptions{}, 0.3);

    // Identity features span the same class but take the subgradient path.
    const FeatureMap ident =
        FeatureMap::custom(2, 2, Eigen::MatrixXd::Identity(4, 4));
    ErmOptions opts;
    opts.steps = 9000;
    auto [g_sub, rep_sub] =
        erm_dual(data, f, make_dual_class(ident, 0.3, m.gamma), opts, 0.3);
    CHECK(rep_sub.step_schedule != "exact-breakpoint");
    CHECK(rep_sub.empirical_loss ==
          doctest::Approx(dual_loss_empirical(g_sub, f, data, 0.3))
              .epsilon(1e-13));
    // Sandwich: cannot beat the exact minimum, must get close to it.
    CHECK(rep_sub.empirical_loss >= rep_exact.empirical_loss - 1e-12);
    CHECK(rep_sub.empirical_loss <= rep_exact.empirical_loss + 1e-6);
    CHECK(!rep_sub.loss_trace.empty());
}

TEST_CASE("warm started subgradient never loses to a cold start") {
    const TabularRMDP m = testutil::random_rmdp(76, 3, 2, 0.8, 0.3, false);
    const Dataset data =
        exact_expectation_dataset(m, testutil::uniform_mu(3, 2));
    LinearQClass f = make_q_class(FeatureMap::one_hot(3, 2), m.gamma);
    f.weights.setConstant(1.5);
    const FeatureMap ident =
        FeatureMap::custom(3, 2, Eigen::MatrixXd::Identity(6, 6));

    ErmOptions opts;
    opts.steps = 3000;
    const auto [g_cold, rep_cold] =
        erm_dual(data, f, make_dual_class(ident, 0.3, m.gamma), opts, 0.3);
    // Restart from the solution: the best-iterate tracker keeps it.
    const auto [g_warm, rep_warm] = erm_dual(data, f, g_cold, opts, 0.3);
    CHECK(rep_warm.empirical_loss <= rep_cold.empirical_loss + 1e-15);
}

TEST_CASE("erm options are validated") {
    const Dataset data = tiny_dataset();
    const LinearQClass f = make_q_class(FeatureMap::one_hot(2, 1), 0.5);
    const FeatureMap ident =
        FeatureMap::custom(2, 1, Eigen::MatrixXd::Identity(2, 2));
    ErmOptions opts;
    opts.steps = 0;
    CHECK_THROWS_AS(erm_dual(data, f, make_dual_class(ident, 0.2, 0.5), opts,
                             0.2),
                    std::invalid_argument);
}

TEST_CASE("tabular regression takes weighted in-cell means") {
    const Dataset data = tiny_dataset();
    LinearQClass f_prev = make_q_class(FeatureMap::one_hot(2, 1), 0.5);
    f_prev.weights << 1.0, 0.4;
    LinearDualClass g = make_dual_class(FeatureMap::one_hot(2, 1), 0.2, 0.5);
    g.weights << 0.8, 0.0;

    SUBCASE("robust targets") {
        const auto [fitted, mse] =
            least_squares_q(data, f_prev, g, f_prev, 0.0, 0.2, 0.5);
        // Cell (0,0): targets 0.82 (to s'=0) and 0.62 (to s'=1), weights 1:3.
        CHECK(fitted.value(0, 0) == doctest::Approx(0.67).epsilon(1e-13));
        CHECK(fitted.value(1, 0) == doctest::Approx(0.0).scale(1.0));
        CHECK(mse == doctest::Approx(0.006).epsilon(1e-12));
    }

    SUBCASE("nominal targets") {
        const auto [fitted, mse] =
            least_squares_nominal(data, f_prev, f_prev, 0.0, 0.5);
        CHECK(fitted.value(0, 0) == doctest::Approx(0.775).epsilon(1e-13));
        CHECK(fitted.value(1, 0) == doctest::Approx(0.2).epsilon(1e-13));
        CHECK(mse == doctest::Approx(0.0135).epsilon(1e-12));
    }

    SUBCASE("ridge shrinks toward zero") {
        const auto [fitted, mse] =
            least_squares_q(data, f_prev, g, f_prev, 1e-2, 0.2, 0.5);
        CHECK(fitted.value(0, 0) < 0.67);
        CHECK(fitted.value(0, 0) > 0.6);
        CHECK(mse >= 0.006 - 1e-12);
    }
}

TEST_CASE("custom feature regression agrees with the tabular solve") {
    const TabularRMDP m = testutil::random_rmdp(73, 3, 2, 0.9, 0.3, false);
    const Eigen::MatrixXd mu = testutil::uniform_mu(3, 2);
    const Dataset data = exact_expectation_dataset(m, mu);
    LinearQClass f_prev = make_q_class(FeatureMap::one_hot(3, 2), m.gamma);
    f_prev.weights.setConstant(1.0);
    LinearDualClass g = make_dual_class(FeatureMap::one_hot(3, 2), 0.3, m.gamma);
    g.weights.setConstant(0.5);

    const auto [tab, mse_tab] =
        least_squares_q(data, f_prev, g, f_prev, 0.0, 0.3, m.gamma);
    const LinearQClass ident_class = make_q_class(
        FeatureMap::custom(3, 2, Eigen::MatrixXd::Identity(6, 6)), m.gamma);
    const auto [cus, mse_cus] =
        least_squares_q(data, f_prev, g, ident_class, 0.0, 0.3, m.gamma);
    CHECK(testutil::sup_diff(tab.materialize().values,
                             cus.materialize().values) <= 1e-10);
    CHECK(mse_cus == doctest::Approx(mse_tab).epsilon(1e-9));
}

TEST_CASE("every fitted quantity is invariant to transition order") {
    const TabularRMDP m = testutil::random_rmdp(74, 4, 2, 0.9, 0.3, true);
    const Eigen::MatrixXd mu = testutil::uniform_mu(4, 2);
    Dataset data = generate_dataset(m, mu, 3000, 11);
    Dataset shuffled = data;
    std::mt19937 rng(17);
    std::shuffle(shuffled.transitions.begin(), shuffled.transitions.end(), rng);

    LinearQClass f = make_q_class(FeatureMap::one_hot(4, 2), m.gamma);
    f.weights.setConstant(2.0);
    LinearDualClass g0 = make_dual_class(FeatureMap::one_hot(4, 2), 0.3, m.gamma);

    CHECK(dual_loss_empirical(g0, f, data, 0.3) ==
          dual_loss_empirical(g0, f, shuffled, 0.3));

    const auto [ga, ra] = erm_dual(data, f, g0, ErmOptions{}, 0.3);
    const auto [gb, rb] = erm_dual(shuffled, f, g0, ErmOptions{}, 0.3);
    CHECK((ga.weights - gb.weights).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(ra.empirical_loss == rb.empirical_loss);

    const auto [fa, ma] = least_squares_q(data, f, ga, f, 1e-8, 0.3, m.gamma);
    const auto [fb, mb] =
        least_squares_q(shuffled, f, gb, f, 1e-8, 0.3, m.gamma);
    CHECK((fa.weights - fb.weights).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(ma == mb);
}

TEST_CASE("surrogate operator applied exactly matches the table form") {
    const TabularRMDP m = testutil::random_rmdp(75, 3, 2, 0.85, 0.25, true);
    LinearQClass f = make_q_class(FeatureMap::one_hot(3, 2), m.gamma);
    LinearDualClass g = make_dual_class(FeatureMap::one_hot(3, 2), 0.25, m.gamma);
    const std::uint64_t seed = derive_seed(75, 4);
    for (int k = 0; k < 6; ++k) {
        f.weights[k] =
            m.value_upper() * uniform01_at(seed, static_cast<std::uint64_t>(k));
        g.weights[k] =
            3.0 * uniform01_at(seed, static_cast<std::uint64_t>(40 + k));
    }
    const QTable via_class = apply_Tg_exact(f, g, m, 0.25);
    const QTable via_tables =
        apply_Tg(f.materialize(), g.materialize(), m, TVBallSpec{0.25, true});
    CHECK(testutil::sup_diff(via_class.values, via_tables.values) == 0.0);
}

TEST_CASE("shape mismatches are rejected") {
    const Dataset data = tiny_dataset();
    const LinearQClass f_wrong = make_q_class(FeatureMap::one_hot(3, 1), 0.5);
    const LinearQClass f = make_q_class(FeatureMap::one_hot(2, 1), 0.5);
    const LinearDualClass g = make_dual_class(FeatureMap::one_hot(2, 1), 0.2, 0.5);
    CHECK_THROWS_AS(dual_loss_empirical(g, f_wrong, data, 0.2),
                    std::invalid_argument);
    CHECK_THROWS_AS(least_squares_q(data, f, g, f, -1.0, 0.2, 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(least_squares_q(data, f, g, f, 0.0, 1.7, 0.5),
                    std::invalid_argument);
}
