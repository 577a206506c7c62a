#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rrmdp/dual.hpp"
#include "rrmdp/envs.hpp"
#include "rrmdp/func_approx.hpp"
#include "rrmdp/planner.hpp"
#include "rrmdp/rmdp.hpp"

namespace rrmdp {

/// Nominal and worst-case performance of a policy from the start
/// distribution.
struct EvalReport {
    double nominal_j = 0.0;
    double robust_j = 0.0;
    bool robust_converged = false;
};

EvalReport evaluate_policy(const Policy& pi, const TabularRMDP& m,
                           const TVBallSpec& spec, double tol = 1e-9,
                           int max_iter = 0, int threads = 1);

/// One point of a model-perturbation sweep. `inside_ball` says whether the
/// perturbed kernel still lies within the base model's per-row TV radius.
struct SweepPoint {
    double knob_value = 0.0;
    double j = 0.0;
    bool inside_ball = false;
};

/// Rebuilds the benchmark once per knob value and evaluates the fixed policy
/// on each perturbed model (nominal evaluation: the perturbation itself is
/// the adversary). The knob must be a scalar parameter of the family, e.g.
/// "p_fail" for risky-safe or "slip" for chain and gridworld.
std::vector<SweepPoint> perturbation_sweep(const Policy& pi,
                                           const BenchmarkSpec& base,
                                           const std::string& knob,
                                           const std::vector<double>& values);

/// Largest occupancy-to-design ratio max_{s,a} nu(s,a) / mu(s,a) over the
/// occupancies nu of `n_policies` seeded random deterministic policies plus
/// the nominal-greedy policy. Infinity when some probed policy visits a cell
/// mu misses. A sampled lower estimate of the concentratability coefficient.
double estimate_concentratability(const Eigen::MatrixXd& mu,
                                  const TabularRMDP& m, int n_policies,
                                  std::uint64_t seed);

/// How far fclass is from closed under the surrogate operator: for each
/// probe f (the robust fixed point plus n_probes random members), the dual
/// witness is fitted on the population, the operator target is computed
/// exactly, projected back onto fclass by mu-weighted ridge regression, and
/// the mu-weighted squared error of the projection is recorded. Returns the
/// worst probe's error.
double estimate_completeness(const LinearQClass& fclass,
                             const LinearDualClass& gclass,
                             const TabularRMDP& m, const Eigen::MatrixXd& mu,
                             double rho, int n_probes, std::uint64_t seed);

/// How much is lost by restricting the dual witness to gclass: for each
/// probe f, the gap between the best population dual loss over gclass and
/// the unrestricted optimum (sum of per-cell exact scalar duals). Returns
/// the worst probe's gap; always >= 0 up to solver tolerance.
double estimate_dual_gap(const LinearDualClass& gclass,
                         const LinearQClass& fclass, const TabularRMDP& m,
                         const Eigen::MatrixXd& mu, double rho, int n_probes,
                         std::uint64_t seed);

/// The three assumption diagnostics plus the fraction of cells mu covers.
struct DiagnosticsReport {
    double concentratability_ratio = 0.0;
    double completeness_error = 0.0;
    double dual_gap = 0.0;
    double mu_coverage = 0.0;
};

DiagnosticsReport run_diagnostics(const TabularRMDP& m,
                                  const Eigen::MatrixXd& mu,
                                  const LinearQClass& fclass,
                                  const LinearDualClass& gclass, double rho,
                                  int n_probes, std::uint64_t seed);

}  // namespace rrmdp
