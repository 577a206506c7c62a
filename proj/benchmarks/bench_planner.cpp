// End-to-end costs: exact planning on growing grids, offline training on the
// risky-safe benchmark at several dataset sizes, and dataset generation.

#include <benchmark/benchmark.h>

#include "rrmdp/dataset.hpp"
#include "rrmdp/envs.hpp"
#include "rrmdp/planner.hpp"
#include "rrmdp/rfqi.hpp"

namespace {

void BM_PlanGridworld(benchmark::State& state) {
    rrmdp::GridworldParams params;
    params.width = static_cast<int>(state.range(0));
    params.height = static_cast<int>(state.range(0));
    const rrmdp::TabularRMDP m = rrmdp::make_gridworld(params);
    const rrmdp::TVBallSpec spec{m.rho, false};
    for (auto _ : state) {
        benchmark::DoNotOptimize(rrmdp::rqi(m, spec, 1e-6).iterations);
    }
}
BENCHMARK(BM_PlanGridworld)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

rrmdp::Dataset risky_safe_data(std::size_t n) {
    rrmdp::RiskySafeParams params;
    params.rho = 0.4;
    const rrmdp::TabularRMDP m = rrmdp::make_risky_safe(params);
    const Eigen::MatrixXd mu = Eigen::MatrixXd::Constant(
        m.n_states, m.n_actions, 1.0 / (m.n_states * m.n_actions));
    return rrmdp::generate_dataset(m, mu, n, 7);
}

// Covers the whole training run: canonical aggregation once, then the
// dual-fit / regression alternation for the default iteration budget.
void BM_TrainRobust(benchmark::State& state) {
    const rrmdp::Dataset data =
        risky_safe_data(static_cast<std::size_t>(state.range(0)));
    rrmdp::RFQIConfig cfg;
    cfg.rho = 0.4;
    cfg.q_features = rrmdp::FeatureMap::one_hot(data.n_states, data.n_actions);
    cfg.dual_features = cfg.q_features;
    const rrmdp::MdpShape shape{data.n_states, data.n_actions, 0.9};
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            rrmdp::run_rfqi(data, shape, cfg).q_final.values.data());
    }
}
BENCHMARK(BM_TrainRobust)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_GenerateDataset(benchmark::State& state) {
    rrmdp::RiskySafeParams params;
    const rrmdp::TabularRMDP m = rrmdp::make_risky_safe(params);
    const Eigen::MatrixXd mu = Eigen::MatrixXd::Constant(
        m.n_states, m.n_actions, 1.0 / (m.n_states * m.n_actions));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            rrmdp::generate_dataset(m, mu,
                                    static_cast<std::size_t>(state.range(0)),
                                    7)
                .transitions.size());
    }
}
BENCHMARK(BM_GenerateDataset)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
