#pragma once

// Internals shared by the loss/regression entry points and the training
// loop: canonical dataset aggregation and the per-aggregate solvers. The
// training loop aggregates once and reuses the structure across iterations.

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "rrmdp/dataset.hpp"
#include "rrmdp/func_approx.hpp"

namespace rrmdp::detail {

struct CellEntry {
    int s_next;
    double r;
    double w;
};

struct Cell {
    int s = 0;
    int a = 0;
    double w_total = 0.0;
    double wr_sum = 0.0;
    std::vector<CellEntry> entries;  // ascending (s_next, r)
};

// Transitions sorted by (s, a, s_next, r, w) and merged; every sum computed
// from this structure depends only on the multiset of transitions.
struct Aggregated {
    int n_states = 0;
    int n_actions = 0;
    double w_all = 0.0;
    std::vector<Cell> cells;  // ascending (s, a)
};

Aggregated aggregate(const Dataset& data);

// max_b f(s, b) for every state.
Eigen::VectorXd successor_values(const LinearQClass& f);

// Empirical dual loss over an aggregate, given successor values of f.
double dual_loss_aggregated(const Aggregated& agg, const Eigen::VectorXd& values,
                            const LinearDualClass& g, double rho);

// Dual-loss minimization over an aggregate; g supplies class and warm start.
std::pair<LinearDualClass, ErmReport> erm_dual_aggregated(
    const Aggregated& agg, const Eigen::VectorXd& values, LinearDualClass g,
    const ErmOptions& opts, double rho);

// Ridge regression of per-transition targets onto fclass. With a witness the
// targets are y = r + gamma ((1-rho) g - (g - v(s'))+); pass witness ==
// nullptr for the nominal targets y = r + gamma v(s').
std::pair<LinearQClass, double> regress_aggregated(
    const Aggregated& agg, const Eigen::VectorXd& values,
    const LinearDualClass* witness, const LinearQClass& fclass, double ridge,
    double rho, double gamma);

}  // namespace rrmdp::detail
