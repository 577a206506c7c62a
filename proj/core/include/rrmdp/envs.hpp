#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "rrmdp/rmdp.hpp"

namespace rrmdp {

/// Line of `length` cells, actions 0 = back and 1 = forward. Forward from
/// the last cell pays reward 1 and stays, so the optimal play walks right
/// and then farms the end. Moves slip to the opposite direction with
/// probability `slip`; every forward attempt additionally drops into an
/// absorbing zero-reward fail state with probability `fail_prob`. The fail
/// state is always present (index `length`) so sweeps over fail_prob keep
/// the state space fixed. Start distribution is a point mass on cell 0.
struct ChainParams {
    int length = 4;
    double gamma = 0.9;
    double rho = 0.3;
    double slip = 0.1;
    double fail_prob = 0.05;
};
TabularRMDP make_chain(const ChainParams& p);

/// width x height grid, actions up/right/down/left (0..3), slipping to each
/// perpendicular direction with probability slip/2. Walls bounce back to the
/// current cell. Every action in the goal corner (width-1, height-1) stays
/// there with reward 1; all other rewards are 0. Start is cell (0, 0).
/// No fail state.
struct GridworldParams {
    int width = 3;
    int height = 3;
    double gamma = 0.9;
    double rho = 0.3;
    double slip = 0.1;
};
TabularRMDP make_gridworld(const GridworldParams& p);

/// Three states: start, gold, fail (the fail state). At the start, action 0
/// (safe) stays put for reward r_safe and action 1 (risky) pays nothing but
/// reaches the gold state with probability 1 - p_fail, else falls into fail.
/// Gold pays 1 forever under either action. Under a total-variation
/// adversary the risky route loses value twice (entry and staying), so the
/// robust-optimal start action flips from risky to safe as rho grows.
struct RiskySafeParams {
    double gamma = 0.9;
    double rho = 0.3;
    double p_fail = 0.1;
    double r_safe = 0.54;
};
TabularRMDP make_risky_safe(const RiskySafeParams& p);

/// Radius at which the robust-optimal start action flips to safe:
/// rho* = 1 - p_fail - r_safe / gamma. Risky is robust-optimal for
/// rho < rho*, safe for rho > rho* (ties resolve to safe, the lower index).
double risky_safe_flip_threshold(const RiskySafeParams& p);

/// Nominal fail probability beyond which the safe policy outperforms the
/// risky one on plain (non-robust) value: p* = 1 - r_safe / gamma.
double risky_safe_crossover_p_fail(const RiskySafeParams& p);

/// A benchmark family plus its parameters, kept symbolic so sweeps can
/// rebuild the model with one knob changed.
struct BenchmarkSpec {
    std::string name;  // "chain" | "gridworld" | "risky-safe"
    nlohmann::json params = nlohmann::json::object();
};

/// Builds the named family. Unknown names or parameter keys throw
/// std::invalid_argument.
TabularRMDP make_benchmark(const BenchmarkSpec& spec);

}  // namespace rrmdp
