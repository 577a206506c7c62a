#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rrmdp/dataset.hpp"
#include "rrmdp/func_approx.hpp"
#include "rrmdp/planner.hpp"

namespace rrmdp {

/// Dimensions and discount of the decision process a dataset came from.
/// Offline training never touches the kernel, so this is all it needs.
struct MdpShape {
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.0;
};

/// Configuration of offline fitted iteration (robust or nominal).
/// `k_iters <= 0` selects the horizon default for the shape's gamma.
/// `q_features`/`dual_features` define the value and dual-witness classes;
/// `seed` is carried into results for bookkeeping (the whole pipeline is
/// deterministic). With `warm_start_dual`, iteration k starts the dual
/// minimization from iteration k-1's witness.
struct RFQIConfig {
    int k_iters = 0;
    double rho = 0.0;
    double ridge = 1e-8;
    FeatureMap q_features;
    FeatureMap dual_features;
    ErmOptions erm;
    std::uint64_t seed = 0;
    bool warm_start_dual = true;
};

/// Per-iteration diagnostics. `dual_loss` is NaN for the nominal variant,
/// which has no dual stage.
struct IterationStats {
    double dual_loss = 0.0;
    double regression_mse = 0.0;
    double q_change_sup = 0.0;
};

struct RFQIResult {
    QTable q_final;
    Policy policy;
    LinearQClass q_class;
    std::vector<IterationStats> iterations;
};

/// Iteration budget sufficient for sup-norm accuracy eps on values scaled by
/// 1/(1-gamma): ceil(log(1/(eps (1-gamma))) / log(1/gamma)).
int default_rfqi_iterations(double gamma, double eps = 1e-3);

/// Offline robust fitted iteration. Starting from the all-zero value
/// function, each iteration fits a dual witness by empirical risk
/// minimization and then ridge-regresses the surrogate-operator targets onto
/// the value class; the final greedy policy is returned. Deterministic given
/// (dataset multiset, shape, config).
RFQIResult run_rfqi(const Dataset& data, const MdpShape& shape,
                    const RFQIConfig& config,
                    const IterateObserver& observer = {});

/// Nominal (non-robust) fitted iteration with the same regression stage but
/// targets y = r + gamma max_b f(s', b). Baseline for robustness
/// comparisons; ignores rho, dual_features, erm and warm_start_dual.
RFQIResult run_fqi(const Dataset& data, const MdpShape& shape,
                   const RFQIConfig& config,
                   const IterateObserver& observer = {});

/// Suboptimality guarantee of the trained policy in terms of iteration count
/// k_iters, sample size n (may be +inf), concentratability c_conc, the
/// approximate-completeness and dual-realizability errors (eps_c, eps_dual),
/// log-cardinalities of the two classes and confidence delta:
///   gamma^K / (1-gamma)^2
///   + sqrt(c_conc) (sqrt(6 eps_c) + gamma eps_dual) / (1-gamma)^2
///   + (16 / (rho (1-gamma)^3)) sqrt(18 c_conc log(2 card_f card_g / delta) / n).
double policy_suboptimality_bound(int k_iters, double n, double gamma,
                                  double rho, double c_conc, double eps_c,
                                  double eps_dual, double card_f,
                                  double card_g, double delta);

}  // namespace rrmdp
