#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "rrmdp/rmdp.hpp"

namespace rrmdp {

/// Parameters of the per-(state, action) total-variation ambiguity ball
/// { P : (1/2) ||P - P0||_1 <= rho }.
///
/// With `use_fail_state_reduction` the scalar dual treats the smallest
/// attainable next-state value as exactly zero, which is valid whenever the
/// model has an absorbing zero-reward fail state whose value is kept at zero.
/// That removes the min-over-states term from the objective and is the form
/// a sample-based learner can evaluate from single transitions.
struct TVBallSpec {
    double rho = 0.0;
    bool use_fail_state_reduction = false;
};

/// Exact solution of the inner minimization min_{P in ball} E_P[v] together
/// with an attaining kernel.
struct PrimalSolution {
    double value = 0.0;
    Eigen::VectorXd worst_kernel;
};

/// Scalar-dual solution of the same inner problem. `eta_star` is the smallest
/// minimizer of the dual objective, found among its breakpoints inside
/// [0, eta_upper] with eta_upper = 2 / (rho * (1 - gamma)).
struct DualSolution {
    double value = 0.0;
    double eta_star = 0.0;
    double eta_upper = 0.0;
};

/// Worst-case expectation over the TV ball by direct mass transport: move up
/// to rho probability from the highest-value states onto the lowest-value
/// state. Throws std::invalid_argument unless rho lies in (0, 1], p0 is a
/// distribution and v is finite.
PrimalSolution tv_inner_inf_primal(const Eigen::VectorXd& p0,
                                   const Eigen::VectorXd& v, double rho);

/// Dual objective h(eta) = E_p0[(eta - v)+] - eta + rho * (eta - m)+ where
/// m = min(v), or m = 0 under the fail-state reduction. The worst-case
/// expectation equals -min_eta h(eta).
double tv_dual_objective(const Eigen::VectorXd& p0, const Eigen::VectorXd& v,
                         const TVBallSpec& spec, double eta);

/// Same inner problem as tv_inner_inf_primal, solved through the scalar dual.
/// The objective is convex piecewise linear in eta, so the minimum is exact:
/// it is attained at a breakpoint (some v(s), m, or an interval endpoint).
/// Requires rho in (0, 1] and v within [0, 1/(1-gamma)] up to slack 1e-9.
DualSolution tv_inner_inf_dual(const Eigen::VectorXd& p0,
                               const Eigen::VectorXd& v,
                               const TVBallSpec& spec, double gamma);

/// One application of the robust optimality operator:
/// out(s,a) = reward(s,a) + gamma * min_{P in ball} E_P[max_b q(s', b)].
/// With spec.rho == 0 this is the nominal operator. A gamma-contraction in
/// the sup norm. `threads` splits rows across std::thread workers; results
/// are identical for any thread count.
QTable robust_bellman_apply(const QTable& q, const TabularRMDP& m,
                            const TVBallSpec& spec, int threads = 1);

/// Robust evaluation operator of a fixed deterministic policy:
/// out(s,a) = reward(s,a) + gamma * min_{P in ball} E_P[q(s', pi(s'))].
QTable robust_bellman_fixed_policy(const QTable& q, const Policy& pi,
                                   const TabularRMDP& m, const TVBallSpec& spec,
                                   int threads = 1);

/// Result of the randomized agreement suite between the scalar dual and the
/// transport primal.
struct DualPrimalCheck {
    int n_cases = 0;
    double max_gap = 0.0;
};

/// Runs `n_cases` random inner problems (support size 1..max_support, rho in
/// (0, 1], values in [0, 1/(1-gamma)], alternating fail-state reduction) and
/// reports the largest |dual - primal| disagreement. Reduction cases are
/// checked against the primal on the support augmented with a zero-value
/// zero-mass outcome, which is what the reduction asserts exists.
DualPrimalCheck dual_primal_check(std::uint64_t seed, int n_cases,
                                  int max_support = 12);

/// Surrogate operator that replaces the inner dual minimization by a fixed
/// dual witness g (fail-state form, so eta >= 0 and the min term is absent):
/// out(s,a) = reward(s,a)
///          - gamma * (E_P0[(g(s,a) - max_b f(s',b))+] - (1-rho) g(s,a)).
/// Coincides with the robust operator when g(s,a) minimizes the dual. The
/// output is intentionally not clipped: a suboptimal g can push values
/// outside [0, 1/(1-gamma)].
QTable apply_Tg(const QTable& f, const Eigen::MatrixXd& g, const TabularRMDP& m,
                const TVBallSpec& spec);

}  // namespace rrmdp
