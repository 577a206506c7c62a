#include "rrmdp/planner.hpp"

#include <cmath>
#include <stdexcept>

namespace rrmdp {

namespace {

void pin_fail_state(QTable& q, const TabularRMDP& m) {
    if (m.fail_state) q.values.row(*m.fail_state).setZero();
}

void check_planning_inputs(const TabularRMDP& m, const TVBallSpec& spec,
                           double tol) {
    validate_or_throw(m);
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    if (spec.use_fail_state_reduction && !m.fail_state)
        throw std::invalid_argument(
            "fail-state reduction requires a model with a fail state");
}

// Shared fixed-point loop over an arbitrary one-step operator.
template <typename Op>
PlanResult iterate_to_fixpoint(const TabularRMDP& m, double tol, int max_iter,
                               const IterateObserver& observer, Op&& op) {
    if (max_iter <= 0) max_iter = default_plan_iterations(tol, m.gamma);

    PlanResult out;
    out.q = QTable::zeros(m.n_states, m.n_actions);
    pin_fail_state(out.q, m);
    out.residual_trace.reserve(static_cast<std::size_t>(max_iter));
    for (int k = 1; k <= max_iter; ++k) {
        QTable next = op(out.q);
        pin_fail_state(next, m);
        const double residual =
            (next.values - out.q.values).lpNorm<Eigen::Infinity>();
        out.q = std::move(next);
        out.residual_trace.push_back(residual);
        out.iterations = k;
        if (observer) observer(k, out.q);
        if (residual <= tol) {
            out.converged = true;
            break;
        }
    }
    out.policy = greedy_policy(out.q);
    return out;
}

}  // namespace

int default_plan_iterations(double tol, double gamma) {
    const double horizon =
        std::log(1.0 / (tol * (1.0 - gamma))) / std::log(1.0 / gamma);
    return 10 * static_cast<int>(std::ceil(horizon));
}

PlanResult rqi(const TabularRMDP& m, const TVBallSpec& spec, double tol,
               int max_iter, int threads, const IterateObserver& observer) {
    check_planning_inputs(m, spec, tol);
    return iterate_to_fixpoint(m, tol, max_iter, observer, [&](const QTable& q) {
        return robust_bellman_apply(q, m, spec, threads);
    });
}

RobustPolicyValue robust_policy_value(const Policy& pi, const TabularRMDP& m,
                                      const TVBallSpec& spec, double tol,
                                      int max_iter, int threads) {
    check_planning_inputs(m, spec, tol);
    PlanResult plan =
        iterate_to_fixpoint(m, tol, max_iter, {}, [&](const QTable& q) {
            return robust_bellman_fixed_policy(q, pi, m, spec, threads);
        });

    RobustPolicyValue out;
    out.q = std::move(plan.q);
    out.residual_trace = std::move(plan.residual_trace);
    out.iterations = plan.iterations;
    out.converged = plan.converged;
    out.v.values.resize(m.n_states);
    for (int s = 0; s < m.n_states; ++s)
        out.v.values[s] = out.q.values(s, pi.actions[s]);
    out.j = m.init_dist.dot(out.v.values);
    return out;
}

PlanResult nonrobust_vi(const TabularRMDP& m, double tol, int max_iter,
                        int threads) {
    validate_or_throw(m);
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
    const TVBallSpec nominal{0.0, false};
    return iterate_to_fixpoint(m, tol, max_iter, {}, [&](const QTable& q) {
        return robust_bellman_apply(q, m, nominal, threads);
    });
}

}  // namespace rrmdp
