#include "rrmdp/rfqi.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "fitting_detail.hpp"

namespace rrmdp {

namespace {

void check_training_inputs(const Dataset& data, const MdpShape& shape,
                           const RFQIConfig& config, bool robust) {
    if (!(shape.gamma > 0.0 && shape.gamma < 1.0))
        throw std::invalid_argument("gamma must lie in (0, 1)");
    if (shape.n_states < 1 || shape.n_actions < 1)
        throw std::invalid_argument("shape dimensions must be positive");
    if (data.n_states != shape.n_states || data.n_actions != shape.n_actions)
        throw std::invalid_argument("dataset dimensions do not match shape");
    if (data.transitions.empty())
        throw std::invalid_argument("dataset has no transitions");
    if (robust && !(config.rho > 0.0 && config.rho <= 1.0))
        throw std::invalid_argument("rho must lie in (0, 1]");
    if (!(config.ridge >= 0.0))
        throw std::invalid_argument("ridge must be >= 0");
}

int resolve_iterations(const RFQIConfig& config, double gamma) {
    return config.k_iters > 0 ? config.k_iters
                              : default_rfqi_iterations(gamma);
}

RFQIResult finish(LinearQClass q, std::vector<IterationStats> stats) {
    RFQIResult out;
    out.q_final = q.materialize();
    out.policy = greedy_policy(out.q_final);
    out.q_class = std::move(q);
    out.iterations = std::move(stats);
    return out;
}

}  // namespace

int default_rfqi_iterations(double gamma, double eps) {
    if (!(gamma > 0.0 && gamma < 1.0) || !(eps > 0.0))
        throw std::invalid_argument("bad gamma or eps");
    return static_cast<int>(
        std::ceil(std::log(1.0 / (eps * (1.0 - gamma))) / std::log(1.0 / gamma)));
}

RFQIResult run_rfqi(const Dataset& data, const MdpShape& shape,
                    const RFQIConfig& config, const IterateObserver& observer) {
    check_training_inputs(data, shape, config, /*robust=*/true);
    const int k_iters = resolve_iterations(config, shape.gamma);

    LinearQClass f = make_q_class(config.q_features, shape.gamma);
    LinearDualClass g =
        make_dual_class(config.dual_features, config.rho, shape.gamma);
    if (f.features.n_states != shape.n_states ||
        f.features.n_actions != shape.n_actions ||
        g.features.n_states != shape.n_states ||
        g.features.n_actions != shape.n_actions)
        throw std::invalid_argument("feature maps do not match shape");

    // One canonical pass over the transitions; iterations reuse it.
    const detail::Aggregated agg = detail::aggregate(data);

    QTable prev = f.materialize();
    std::vector<IterationStats> stats;
    stats.reserve(static_cast<std::size_t>(k_iters));
    for (int k = 1; k <= k_iters; ++k) {
        if (!config.warm_start_dual) g.weights.setZero();
        const Eigen::VectorXd values = detail::successor_values(f);
        ErmReport report;
        std::tie(g, report) = detail::erm_dual_aggregated(
            agg, values, std::move(g), config.erm, config.rho);

        auto [fitted, mse] = detail::regress_aggregated(
            agg, values, &g, f, config.ridge, config.rho, shape.gamma);
        f = std::move(fitted);

        QTable cur = f.materialize();
        IterationStats st;
        st.dual_loss = report.empirical_loss;
        st.regression_mse = mse;
        st.q_change_sup = (cur.values - prev.values).lpNorm<Eigen::Infinity>();
        stats.push_back(st);
        prev = std::move(cur);
        if (observer) observer(k, prev);
    }
    return finish(std::move(f), std::move(stats));
}

RFQIResult run_fqi(const Dataset& data, const MdpShape& shape,
                   const RFQIConfig& config, const IterateObserver& observer) {
    check_training_inputs(data, shape, config, /*robust=*/false);
    const int k_iters = resolve_iterations(config, shape.gamma);

    LinearQClass f = make_q_class(config.q_features, shape.gamma);
    if (f.features.n_states != shape.n_states ||
        f.features.n_actions != shape.n_actions)
        throw std::invalid_argument("feature maps do not match shape");
    const detail::Aggregated agg = detail::aggregate(data);

    QTable prev = f.materialize();
    std::vector<IterationStats> stats;
    stats.reserve(static_cast<std::size_t>(k_iters));
    for (int k = 1; k <= k_iters; ++k) {
        auto [fitted, mse] = detail::regress_aggregated(
            agg, detail::successor_values(f), nullptr, f, config.ridge, 1.0,
            shape.gamma);
        f = std::move(fitted);

        QTable cur = f.materialize();
        IterationStats st;
        st.dual_loss = std::numeric_limits<double>::quiet_NaN();
        st.regression_mse = mse;
        st.q_change_sup = (cur.values - prev.values).lpNorm<Eigen::Infinity>();
        stats.push_back(st);
        prev = std::move(cur);
        if (observer) observer(k, prev);
    }
    return finish(std::move(f), std::move(stats));
}

double policy_suboptimality_bound(int k_iters, double n, double gamma,
                                  double rho, double c_conc, double eps_c,
                                  double eps_dual, double card_f,
                                  double card_g, double delta) {
    if (k_iters < 0 || !(gamma > 0.0 && gamma < 1.0) ||
        !(rho > 0.0 && rho <= 1.0) || !(c_conc >= 0.0) || !(eps_c >= 0.0) ||
        !(eps_dual >= 0.0) || !(n > 0.0) || !(card_f >= 1.0) ||
        !(card_g >= 1.0) || !(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("bad bound arguments");

    const double one_minus = 1.0 - gamma;
    const double optimization =
        std::pow(gamma, k_iters) / (one_minus * one_minus);
    const double approximation = std::sqrt(c_conc) *
                                 (std::sqrt(6.0 * eps_c) + gamma * eps_dual) /
                                 (one_minus * one_minus);
    const double log_term = std::log(2.0 * card_f * card_g / delta);
    const double estimation =
        std::isinf(n)
            ? 0.0
            : 16.0 / (rho * one_minus * one_minus * one_minus) *
                  std::sqrt(18.0 * c_conc * log_term / n);
    return optimization + approximation + estimation;
}

}  // namespace rrmdp
