#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rrmdp/dataset.hpp"
#include "rrmdp/features.hpp"
#include "rrmdp/rmdp.hpp"

namespace rrmdp {

/// Clipped linear state-action value class: f(s,a) = clip(phi(s,a) . w) with
/// range [0, 1/(1-gamma)], matching the bound on attainable values.
struct LinearQClass {
    FeatureMap features;
    Eigen::VectorXd weights;
    double clip_lo = 0.0;
    double clip_hi = 0.0;

    double value(int s, int a) const {
        const double z =
            features.value(s * features.n_actions + a, weights);
        return std::min(clip_hi, std::max(clip_lo, z));
    }
    QTable materialize() const;
};

/// Clipped linear dual-witness class: g(s,a) = clip(phi(s,a) . w) with range
/// [0, 2/(rho (1-gamma))], the interval that always contains a dual
/// minimizer.
struct LinearDualClass {
    FeatureMap features;
    Eigen::VectorXd weights;
    double clip_lo = 0.0;
    double clip_hi = 0.0;

    double value(int s, int a) const {
        const double z =
            features.value(s * features.n_actions + a, weights);
        return std::min(clip_hi, std::max(clip_lo, z));
    }
    Eigen::MatrixXd materialize() const;
};

LinearQClass make_q_class(FeatureMap features, double gamma);
LinearDualClass make_dual_class(FeatureMap features, double rho, double gamma);

/// Knobs of the dual-loss minimizer used for non-partition feature maps:
/// deterministic full-batch subgradient rounds with step c_r / sqrt(t),
/// in-round iterate averaging and best-iterate tracking; c_r halves between
/// rounds, so accuracy improves geometrically on this piecewise-linear
/// objective. `steps` caps the total step count, `step_scale` scales the
/// initial step relative to the clip range, `tol` is the relative
/// round-over-round improvement under which a round counts as stalled, and
/// `patience` bounds both consecutive stalled and consecutive worsening
/// rounds (the latter throws ErmDivergence).
struct ErmOptions {
    int steps = 6000;
    double step_scale = 1.0;
    double tol = 1e-12;
    int patience = 8;
};

struct ErmDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// What the dual-loss minimizer did. `empirical_loss` always equals
/// dual_loss_empirical of the returned weights. Partition feature maps are
/// solved exactly per group by breakpoint enumeration (step_schedule
/// "exact-breakpoint", one iteration); otherwise step_schedule describes the
/// subgradient schedule and loss_trace holds the loss after every step.
struct ErmReport {
    Eigen::VectorXd final_weights;
    double empirical_loss = 0.0;
    int iterations = 0;
    std::string step_schedule;
    std::vector<double> loss_trace;
};

/// Empirical dual loss of witness g against value function f:
/// (1/W) sum_i w_i [ (g(s_i,a_i) - max_b f(s'_i,b))+ - (1-rho) g(s_i,a_i) ].
/// Computed over canonically aggregated transitions, so the result depends
/// only on the multiset of transitions, not on file order.
double dual_loss_empirical(const LinearDualClass& g, const LinearQClass& f,
                           const Dataset& data, double rho);

/// Population counterpart under design mu and the nominal kernel.
double dual_loss_population(const LinearDualClass& g, const LinearQClass& f,
                            const TabularRMDP& m, const Eigen::MatrixXd& mu,
                            double rho);

/// Minimizes the empirical dual loss over g's class. `g` provides the class
/// and the warm start. Partition features are minimized exactly; custom
/// features run the subgradient scheme described on ErmOptions.
std::pair<LinearDualClass, ErmReport> erm_dual(const Dataset& data,
                                               const LinearQClass& f,
                                               LinearDualClass g,
                                               const ErmOptions& opts,
                                               double rho);

/// Ridge regression of the surrogate-operator targets
///   y_i = r_i + gamma ( (1-rho) g(s_i,a_i)
///                       - (g(s_i,a_i) - max_b f_prev(s'_i,b))+ )
/// onto fclass's features (targets are not clipped). Minimizes
/// (1/W) sum_i w_i (phi_i . w - y_i)^2 + ridge ||w||^2 by normal equations;
/// partition features reduce to per-group averages. Returns the fitted class
/// and the achieved weighted mean squared error of its clipped values.
std::pair<LinearQClass, double> least_squares_q(const Dataset& data,
                                                const LinearQClass& f_prev,
                                                const LinearDualClass& g,
                                                const LinearQClass& fclass,
                                                double ridge, double rho,
                                                double gamma);

/// Nominal counterpart of least_squares_q with targets
/// y_i = r_i + gamma max_b f_prev(s'_i, b); no dual witness involved.
std::pair<LinearQClass, double> least_squares_nominal(const Dataset& data,
                                                      const LinearQClass& f_prev,
                                                      const LinearQClass& fclass,
                                                      double ridge,
                                                      double gamma);

/// Surrogate operator applied exactly under the model: materializes f and g
/// and evaluates out(s,a) = r(s,a) - gamma (E_P0[(g - max_b f)+]
/// - (1-rho) g(s,a)). Used to measure how far a fitted iterate is from the
/// exact update.
QTable apply_Tg_exact(const LinearQClass& f, const LinearDualClass& g,
                      const TabularRMDP& m, double rho);

}  // namespace rrmdp
