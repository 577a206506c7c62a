#include "rrmdp/eval.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rrmdp/dataset.hpp"
#include "rrmdp/rng.hpp"

namespace rrmdp {

namespace {

// mu-weighted ridge projection of a value table onto a feature map.
Eigen::VectorXd fit_table(const Eigen::MatrixXd& table,
                          const Eigen::MatrixXd& mu, const FeatureMap& features,
                          double ridge) {
    if (features.is_partition()) {
        Eigen::VectorXd num = Eigen::VectorXd::Zero(features.dim);
        Eigen::VectorXd den = Eigen::VectorXd::Zero(features.dim);
        for (int s = 0; s < features.n_states; ++s)
            for (int a = 0; a < features.n_actions; ++a) {
                const int k = features.group_of(s * features.n_actions + a);
                num[k] += mu(s, a) * table(s, a);
                den[k] += mu(s, a);
            }
        Eigen::VectorXd w = Eigen::VectorXd::Zero(features.dim);
        for (int k = 0; k < features.dim; ++k)
            if (den[k] + ridge > 0.0) w[k] = num[k] / (den[k] + ridge);
        return w;
    }
    Eigen::MatrixXd normal =
        ridge * Eigen::MatrixXd::Identity(features.dim, features.dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(features.dim);
    for (int s = 0; s < features.n_states; ++s)
        for (int a = 0; a < features.n_actions; ++a) {
            const double w = mu(s, a);
            if (w <= 0.0) continue;
            const Eigen::VectorXd row =
                features.dense_row(s * features.n_actions + a);
            normal += w * row * row.transpose();
            rhs += w * table(s, a) * row;
        }
    return normal.ldlt().solve(rhs);
}

void check_mu_shape(const Eigen::MatrixXd& mu, const TabularRMDP& m) {
    if (mu.rows() != m.n_states || mu.cols() != m.n_actions)
        throw std::invalid_argument("mu must be n_states x n_actions");
}

// Probe members of the value class: the robust fixed point projected onto
// the class, followed by seeded random weight draws.
std::vector<LinearQClass> make_probes(const LinearQClass& fclass,
                                      const TabularRMDP& m,
                                      const Eigen::MatrixXd& mu, double rho,
                                      int n_probes, std::uint64_t seed) {
    std::vector<LinearQClass> probes;
    probes.reserve(static_cast<std::size_t>(n_probes) + 1);

    const TVBallSpec spec{rho, m.fail_state.has_value()};
    const PlanResult plan = rqi(m, spec, 1e-10);
    LinearQClass fixed = fclass;
    fixed.weights = fit_table(plan.q.values, mu, fclass.features, 1e-12);
    probes.push_back(std::move(fixed));

    const std::uint64_t stream = derive_seed(seed, 9);
    for (int i = 0; i < n_probes; ++i) {
        LinearQClass probe = fclass;
        for (int k = 0; k < fclass.features.dim; ++k) {
            const double u = uniform01_at(
                stream, static_cast<std::uint64_t>(i) * fclass.features.dim +
                            static_cast<std::uint64_t>(k));
            probe.weights[k] = fclass.features.is_partition()
                                   ? u * fclass.clip_hi
                                   : (2.0 * u - 1.0) * fclass.clip_hi /
                                         std::sqrt(fclass.features.dim);
        }
        probes.push_back(std::move(probe));
    }
    return probes;
}

ErmOptions tight_erm_options() {
    ErmOptions opts;
    opts.steps = 20000;
    opts.step_scale = 1.0;
    opts.tol = 1e-14;
    opts.patience = 12;
    return opts;
}

}  // namespace

EvalReport evaluate_policy(const Policy& pi, const TabularRMDP& m,
                           const TVBallSpec& spec, double tol, int max_iter,
                           int threads) {
    EvalReport out;
    out.nominal_j = policy_value_nominal(pi, m).j;
    if (spec.rho == 0.0) {
        out.robust_j = out.nominal_j;
        out.robust_converged = true;
        return out;
    }
    const RobustPolicyValue rv =
        robust_policy_value(pi, m, spec, tol, max_iter, threads);
    out.robust_j = rv.j;
    out.robust_converged = rv.converged;
    return out;
}

std::vector<SweepPoint> perturbation_sweep(const Policy& pi,
                                           const BenchmarkSpec& base,
                                           const std::string& knob,
                                           const std::vector<double>& values) {
    const TabularRMDP base_model = make_benchmark(base);
    std::vector<SweepPoint> out;
    out.reserve(values.size());
    for (double value : values) {
        BenchmarkSpec spec = base;
        spec.params[knob] = value;
        const TabularRMDP perturbed = make_benchmark(spec);
        if (perturbed.n_states != base_model.n_states ||
            perturbed.n_actions != base_model.n_actions)
            throw std::invalid_argument(
                "sweep knob changed the state space: " + knob);

        double max_tv = 0.0;
        for (int row = 0; row < perturbed.kernel.rows(); ++row)
            max_tv = std::max(
                max_tv, 0.5 * (perturbed.kernel.row(row) -
                               base_model.kernel.row(row)).lpNorm<1>());

        SweepPoint point;
        point.knob_value = value;
        point.j = policy_value_nominal(pi, perturbed).j;
        point.inside_ball = max_tv <= base_model.rho + 1e-12;
        out.push_back(point);
    }
    return out;
}

double estimate_concentratability(const Eigen::MatrixXd& mu,
                                  const TabularRMDP& m, int n_policies,
                                  std::uint64_t seed) {
    validate_or_throw(m);
    check_mu_shape(mu, m);
    if (n_policies < 0) throw std::invalid_argument("n_policies must be >= 0");

    std::vector<Policy> probes;
    probes.push_back(nonrobust_vi(m).policy);
    if (m.rho > 0.0)
        probes.push_back(
            rqi(m, TVBallSpec{m.rho, m.fail_state.has_value()}).policy);
    for (int i = 0; i < n_policies; ++i) {
        Policy pi;
        pi.actions.resize(static_cast<std::size_t>(m.n_states));
        for (int s = 0; s < m.n_states; ++s) {
            const double u = uniform01_at(
                derive_seed(seed, static_cast<std::uint64_t>(i)),
                static_cast<std::uint64_t>(s));
            pi.actions[static_cast<std::size_t>(s)] =
                std::min(m.n_actions - 1, static_cast<int>(u * m.n_actions));
        }
        probes.push_back(std::move(pi));
    }

    double worst = 0.0;
    for (const Policy& pi : probes) {
        const Occupancy nu = occupancy(pi, m);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                const double n_sa = nu.dist(s, a);
                if (n_sa <= 1e-15) continue;
                if (mu(s, a) <= 0.0)
                    return std::numeric_limits<double>::infinity();
                worst = std::max(worst, n_sa / mu(s, a));
            }
    }
    return worst;
}

double estimate_completeness(const LinearQClass& fclass,
                             const LinearDualClass& gclass,
                             const TabularRMDP& m, const Eigen::MatrixXd& mu,
                             double rho, int n_probes, std::uint64_t seed) {
    validate_or_throw(m);
    check_mu_shape(mu, m);
    const Dataset population = exact_expectation_dataset(m, mu);

    double worst = 0.0;
    for (const LinearQClass& probe :
         make_probes(fclass, m, mu, rho, n_probes, seed)) {
        auto [witness, report] = erm_dual(population, probe, gclass,
                                          tight_erm_options(), rho);
        const QTable target = apply_Tg_exact(probe, witness, m, rho);

        LinearQClass projected = fclass;
        projected.weights =
            fit_table(target.values, mu, fclass.features, 1e-12);
        double err = 0.0;
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                const double d = projected.value(s, a) - target.values(s, a);
                err += mu(s, a) * d * d;
            }
        worst = std::max(worst, err);
    }
    return worst;
}

double estimate_dual_gap(const LinearDualClass& gclass,
                         const LinearQClass& fclass, const TabularRMDP& m,
                         const Eigen::MatrixXd& mu, double rho, int n_probes,
                         std::uint64_t seed) {
    validate_or_throw(m);
    check_mu_shape(mu, m);
    const Dataset population = exact_expectation_dataset(m, mu);
    const TVBallSpec reduced{rho, true};

    double worst = 0.0;
    for (const LinearQClass& probe :
         make_probes(fclass, m, mu, rho, n_probes, seed)) {
        auto [witness, report] = erm_dual(population, probe, gclass,
                                          tight_erm_options(), rho);
        const double restricted =
            dual_loss_population(witness, probe, m, mu, rho);

        // Unrestricted optimum: each cell minimizes its scalar dual freely.
        Eigen::VectorXd values(m.n_states);
        for (int s = 0; s < m.n_states; ++s) {
            double best = probe.value(s, 0);
            for (int a = 1; a < m.n_actions; ++a)
                best = std::max(best, probe.value(s, a));
            values[s] = best;
        }
        double unrestricted = 0.0;
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                if (mu(s, a) <= 0.0) continue;
                const DualSolution cell = tv_inner_inf_dual(
                    m.kernel.row(m.sa_index(s, a)), values, reduced, m.gamma);
                unrestricted += mu(s, a) * -cell.value;
            }
        worst = std::max(worst, restricted - unrestricted);
    }
    return worst;
}

DiagnosticsReport run_diagnostics(const TabularRMDP& m,
                                  const Eigen::MatrixXd& mu,
                                  const LinearQClass& fclass,
                                  const LinearDualClass& gclass, double rho,
                                  int n_probes, std::uint64_t seed) {
    DiagnosticsReport out;
    out.concentratability_ratio =
        estimate_concentratability(mu, m, 8 * n_probes + 8, seed);
    out.completeness_error =
        estimate_completeness(fclass, gclass, m, mu, rho, n_probes, seed);
    out.dual_gap = estimate_dual_gap(gclass, fclass, m, mu, rho, n_probes, seed);
    int covered = 0;
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a)
            if (mu(s, a) > 0.0) ++covered;
    out.mu_coverage =
        static_cast<double>(covered) / (m.n_states * m.n_actions);
    return out;
}

}  // namespace rrmdp
