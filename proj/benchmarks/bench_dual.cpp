// Microbenchmarks for the inner worst-case expectation: scalar dual vs the
// transport primal across support sizes, and one full operator sweep.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "rrmdp/dual.hpp"
#include "rrmdp/envs.hpp"
#include "rrmdp/rng.hpp"

namespace {

constexpr double kGamma = 0.9;

struct InnerProblem {
    Eigen::VectorXd p0;
    Eigen::VectorXd v;
};

InnerProblem make_problem(int support) {
    InnerProblem prob;
    prob.p0.resize(support);
    prob.v.resize(support);
    const std::uint64_t seed = rrmdp::derive_seed(17, support);
    double total = 0.0;
    for (int i = 0; i < support; ++i) {
        const double u =
            rrmdp::uniform01_at(seed, static_cast<std::uint64_t>(2 * i));
        prob.p0[i] = 1e-9 + u;
        total += prob.p0[i];
        prob.v[i] =
            rrmdp::uniform01_at(seed, static_cast<std::uint64_t>(2 * i + 1)) /
            (1.0 - kGamma);
    }
    prob.p0 /= total;
    return prob;
}

void BM_InnerDual(benchmark::State& state) {
    const InnerProblem prob = make_problem(static_cast<int>(state.range(0)));
    const rrmdp::TVBallSpec spec{0.3, false};
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            rrmdp::tv_inner_inf_dual(prob.p0, prob.v, spec, kGamma).value);
    }
}
BENCHMARK(BM_InnerDual)->Arg(8)->Arg(64)->Arg(512);

void BM_InnerPrimal(benchmark::State& state) {
    const InnerProblem prob = make_problem(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            rrmdp::tv_inner_inf_primal(prob.p0, prob.v, 0.3).value);
    }
}
BENCHMARK(BM_InnerPrimal)->Arg(8)->Arg(64)->Arg(512);

void BM_RobustOperator(benchmark::State& state) {
    rrmdp::GridworldParams params;
    params.width = static_cast<int>(state.range(0));
    params.height = static_cast<int>(state.range(0));
    const rrmdp::TabularRMDP m = rrmdp::make_gridworld(params);
    const rrmdp::TVBallSpec spec{m.rho, false};
    rrmdp::QTable q = rrmdp::QTable::zeros(m.n_states, m.n_actions);
    for (auto _ : state) {
        q = rrmdp::robust_bellman_apply(q, m, spec);
        benchmark::DoNotOptimize(q.values.data());
    }
}
BENCHMARK(BM_RobustOperator)->Arg(4)->Arg(8)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
