#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <string>
#include <vector>

namespace rrmdp {

/// Tolerance used when checking that probability vectors sum to one.
inline constexpr double kStochasticityTol = 1e-12;

/// Tolerance on the residual of occupancy / evaluation linear solves.
inline constexpr double kOccupancySolveTol = 1e-10;

/// Tabular Markov decision process with a total-variation uncertainty set of
/// radius `rho` around the nominal kernel, rectangular per (state, action).
///
/// Rewards live in [0, 1], so every value function is bounded by
/// 1/(1-gamma). The kernel is stored flat: row sa_index(s, a) is the nominal
/// next-state distribution of (s, a). If `fail_state` is set, that state must
/// be absorbing with zero reward; planners and solvers then keep its value
/// pinned to zero and the dual machinery may exploit it.
struct TabularRMDP {
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.0;
    double rho = 0.0;
    std::optional<int> fail_state;
    Eigen::MatrixXd reward;     // n_states x n_actions
    Eigen::MatrixXd kernel;     // (n_states*n_actions) x n_states
    Eigen::VectorXd init_dist;  // n_states

    int sa_index(int s, int a) const { return s * n_actions + a; }

    /// Largest value any policy can attain under rewards in [0, 1].
    double value_upper() const { return 1.0 / (1.0 - gamma); }
};

/// State-action value table, n_states x n_actions.
struct QTable {
    Eigen::MatrixXd values;

    static QTable zeros(int n_states, int n_actions) {
        return {Eigen::MatrixXd::Zero(n_states, n_actions)};
    }
};

/// State value table.
struct VTable {
    Eigen::VectorXd values;
};

/// Deterministic stationary policy: one action per state.
struct Policy {
    std::vector<int> actions;
};

/// Normalized discounted state-action occupancy: entries sum to one because
/// the discounted visit counts are scaled by (1-gamma).
struct Occupancy {
    Eigen::MatrixXd dist;  // n_states x n_actions
};

/// Exact evaluation of a policy on the nominal (non-robust) model.
struct PolicyValue {
    QTable q;
    VTable v;
    double j = 0.0;  // init_dist-weighted value
};

/// Returns a human-readable list of model violations; empty means valid.
/// Checks dimensions, gamma in (0,1), rho in [0,1], rewards in [0,1],
/// row-stochastic kernel and init_dist (tolerance kStochasticityTol), and
/// that a declared fail state is absorbing with zero reward.
std::vector<std::string> validate(const TabularRMDP& m);

/// Throws std::invalid_argument listing all violations if the model is bad.
void validate_or_throw(const TabularRMDP& m);

/// State values induced by a Q table: V(s) = max_a Q(s, a).
VTable value_of(const QTable& q);

/// Greedy policy of a Q table; argmax ties resolve to the lowest action index.
Policy greedy_policy(const QTable& q);

/// Normalized discounted occupancy of a deterministic policy under a nominal
/// kernel, by direct linear solve of the flow equations. The kernel is the
/// flat (n_states*n_actions) x n_states layout of TabularRMDP::kernel.
Occupancy occupancy(const Policy& pi, const Eigen::MatrixXd& kernel,
                    double gamma, const Eigen::VectorXd& init_dist);

/// Convenience overload reading kernel, gamma and init_dist from the model.
Occupancy occupancy(const Policy& pi, const TabularRMDP& m);

/// Exact policy evaluation on the nominal kernel via linear solve:
/// V = r_pi + gamma * P_pi V, Q(s,a) = r(s,a) + gamma * P(s,a) . V, and
/// j = init_dist . V.
PolicyValue policy_value_nominal(const Policy& pi, const TabularRMDP& m);

/// JSON serialization. Kernel is written as a 3-d array indexed
/// [state][action][next_state]; fail_state is null when absent.
nlohmann::json to_json(const TabularRMDP& m);

/// Parses and validates a model; throws std::invalid_argument on bad input.
TabularRMDP rmdp_from_json(const nlohmann::json& j);

}  // namespace rrmdp
