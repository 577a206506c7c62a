#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "rrmdp/rmdp.hpp"

namespace rrmdp {

/// One logged interaction. `weight` scales the transition's contribution to
/// empirical sums; sampled data uses 1.0, while exact-expectation datasets
/// carry mu(s,a) * P(s'|s,a) so empirical losses equal their population
/// counterparts.
struct Transition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
    double weight = 1.0;
};

/// Offline dataset: transitions drawn i.i.d. with (s,a) ~ mu and s' from the
/// nominal kernel. `mu` and `seed` are carried along for reproducibility and
/// diagnostics.
struct Dataset {
    int n_states = 0;
    int n_actions = 0;
    Eigen::MatrixXd mu;  // n_states x n_actions
    std::uint64_t seed = 0;
    std::vector<Transition> transitions;

    double total_weight() const {
        double w = 0.0;
        for (const auto& t : transitions) w += t.weight;
        return w;
    }
};

/// Draws n transitions from the nominal model: (s_i, a_i) ~ mu by inverse
/// CDF over cells in row-major order, s'_i from the kernel row. Transition i
/// consumes counters 2i and 2i+1 of the seed's stream, so any prefix of a
/// longer dataset equals the shorter dataset drawn with the same seed.
Dataset generate_dataset(const TabularRMDP& m, const Eigen::MatrixXd& mu,
                         std::size_t n, std::uint64_t seed);

/// State-action distribution induced by epsilon-greedy exploration around a
/// deterministic base policy: the behavior policy takes pi(s) with
/// probability 1 - epsilon + epsilon/n_actions and any other action with
/// probability epsilon/n_actions; returns its normalized discounted
/// occupancy.
Eigen::MatrixXd mu_from_policy(const TabularRMDP& m, const Policy& pi,
                               double epsilon);

/// One weighted transition per (s, a, s') cell with positive probability,
/// weight mu(s,a) * P(s'|s,a), in ascending (s, a, s') order. Empirical
/// losses over this dataset equal exact expectations under (mu, P0).
Dataset exact_expectation_dataset(const TabularRMDP& m,
                                  const Eigen::MatrixXd& mu);

/// JSON-lines serialization: a header object
/// {"mu": [[..]..], "n_actions": A, "n_states": S, "seed": ...} followed by
/// one {"a":..,"r":..,"s":..,"s_next":..} object per transition ("w" added
/// only when the weight is not 1). Keys are alphabetical and floats
/// round-trip, so save/load is byte-stable.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace rrmdp
