#pragma once

#include <functional>
#include <vector>

#include "rrmdp/dual.hpp"
#include "rrmdp/rmdp.hpp"

namespace rrmdp {

/// Result of value-iteration style planning. `residual_trace[k]` is the
/// sup-norm change produced by iteration k; `converged` is false when the
/// iteration budget ran out first.
struct PlanResult {
    QTable q;
    Policy policy;
    std::vector<double> residual_trace;
    int iterations = 0;
    bool converged = false;
};

/// Robust evaluation of a fixed policy, plus the init_dist-weighted value j.
struct RobustPolicyValue {
    QTable q;
    VTable v;
    double j = 0.0;
    std::vector<double> residual_trace;
    int iterations = 0;
    bool converged = false;
};

/// Invoked with each iterate right after it is produced (iteration index
/// starts at 1; the implicit iterate 0 is the all-zero table).
using IterateObserver = std::function<void(int iteration, const QTable& q)>;

/// Default iteration budget: ten times the horizon at which the remaining
/// contraction error gamma^k / (1 - gamma) falls below tol.
int default_plan_iterations(double tol, double gamma);

/// Robust value iteration from Q = 0: repeatedly applies the robust
/// optimality operator until the sup-norm change is at most `tol` or
/// `max_iter` iterations have run (`max_iter <= 0` picks the default
/// budget). A declared fail state is pinned to zero on every iterate; its
/// true value is zero, and pinning keeps the iteration a contraction with
/// the same fixed point. The greedy policy of the final table is returned.
PlanResult rqi(const TabularRMDP& m, const TVBallSpec& spec, double tol = 1e-9,
               int max_iter = 0, int threads = 1,
               const IterateObserver& observer = {});

/// Robust value of a fixed deterministic policy, iterating its robust
/// evaluation operator from zero. Same stopping rule and fail-state pinning
/// as rqi.
RobustPolicyValue robust_policy_value(const Policy& pi, const TabularRMDP& m,
                                      const TVBallSpec& spec, double tol = 1e-9,
                                      int max_iter = 0, int threads = 1);

/// Plain (non-robust) value iteration on the nominal kernel.
PlanResult nonrobust_vi(const TabularRMDP& m, double tol = 1e-9,
                        int max_iter = 0, int threads = 1);

}  // namespace rrmdp
