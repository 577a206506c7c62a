#include "rrmdp/dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "parallel.hpp"
#include "rrmdp/rng.hpp"

namespace rrmdp {

namespace {

// Inputs that merely drifted out of range by roundoff are still accepted.
constexpr double kValueRangeSlack = 1e-9;

void check_ball_radius(double rho) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw std::invalid_argument("rho must lie in (0, 1]");
}

void check_distribution(const Eigen::VectorXd& p0) {
    if (p0.size() < 1)
        throw std::invalid_argument("distribution must be non-empty");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p0.size(); ++i) {
        if (!(p0[i] >= 0.0))
            throw std::invalid_argument("distribution has a negative entry");
        sum += p0[i];
    }
    if (std::abs(sum - 1.0) > kStochasticityTol)
        throw std::invalid_argument("distribution does not sum to one");
}

void check_value_range(const Eigen::VectorXd& v, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma must lie in (0, 1)");
    const double hi = 1.0 / (1.0 - gamma) + kValueRangeSlack;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!(v[i] >= -kValueRangeSlack && v[i] <= hi))
            throw std::invalid_argument("value outside [0, 1/(1-gamma)]");
}

}  // namespace

PrimalSolution tv_inner_inf_primal(const Eigen::VectorXd& p0,
                                   const Eigen::VectorXd& v, double rho) {
    check_ball_radius(rho);
    check_distribution(p0);
    if (v.size() != p0.size())
        throw std::invalid_argument("p0 and v must have equal length");
    if (!v.allFinite()) throw std::invalid_argument("v must be finite");

    const int n = static_cast<int>(v.size());
    int jmin = 0;
    for (int i = 1; i < n; ++i)
        if (v[i] < v[jmin]) jmin = i;

    // Donors in decreasing value order, lowest index first among ties.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&v](int a, int b) {
        if (v[a] != v[b]) return v[a] > v[b];
        return a < b;
    });

    PrimalSolution out;
    out.worst_kernel = p0;
    double budget = rho;
    for (int i : order) {
        if (budget <= 0.0) break;
        if (v[i] <= v[jmin]) break;  // remaining donors cannot lower the value
        const double take = std::min(budget, out.worst_kernel[i]);
        out.worst_kernel[i] -= take;
        out.worst_kernel[jmin] += take;
        budget -= take;
    }
    out.value = out.worst_kernel.dot(v);
    return out;
}

double tv_dual_objective(const Eigen::VectorXd& p0, const Eigen::VectorXd& v,
                         const TVBallSpec& spec, double eta) {
    const double m = spec.use_fail_state_reduction ? 0.0 : v.minCoeff();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        acc += p0[i] * std::max(0.0, eta - v[i]);
    return acc - eta + spec.rho * std::max(0.0, eta - m);
}

DualSolution tv_inner_inf_dual(const Eigen::VectorXd& p0,
                               const Eigen::VectorXd& v,
                               const TVBallSpec& spec, double gamma) {
    check_ball_radius(spec.rho);
    check_distribution(p0);
    if (v.size() != p0.size())
        throw std::invalid_argument("p0 and v must have equal length");
    check_value_range(v, gamma);

    DualSolution out;
    out.eta_upper = 2.0 / (spec.rho * (1.0 - gamma));

    // h is convex piecewise linear; its breakpoints are the entries of v and
    // the kink of the (eta - m)+ term. Evaluating every breakpoint (clamped
    // to the admissible interval, plus both endpoints) is exact.
    std::vector<double> candidates;
    candidates.reserve(static_cast<std::size_t>(v.size()) + 3);
    candidates.push_back(0.0);
    candidates.push_back(out.eta_upper);
    candidates.push_back(spec.use_fail_state_reduction ? 0.0 : v.minCoeff());
    for (Eigen::Index i = 0; i < v.size(); ++i) candidates.push_back(v[i]);
    for (double& c : candidates) c = std::clamp(c, 0.0, out.eta_upper);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());

    double best = std::numeric_limits<double>::infinity();
    double best_eta = 0.0;
    for (double eta : candidates) {
        const double h = tv_dual_objective(p0, v, spec, eta);
        if (h < best) {  // strict: ties keep the smallest eta
            best = h;
            best_eta = eta;
        }
    }
    out.value = -best;
    out.eta_star = best_eta;
    return out;
}

DualPrimalCheck dual_primal_check(std::uint64_t seed, int n_cases,
                                  int max_support) {
    if (n_cases < 1 || max_support < 1)
        throw std::invalid_argument("need n_cases >= 1 and max_support >= 1");

    DualPrimalCheck out;
    out.n_cases = n_cases;
    std::uint64_t ctr = 0;
    auto next = [&] { return uniform01_at(seed, ctr++); };
    for (int i = 0; i < n_cases; ++i) {
        const int n = 1 + static_cast<int>(next() * max_support);
        const double gamma = 0.5 + 0.49 * next();
        const double rho = std::min(1.0, next() + 1e-12);
        const double vmax = 1.0 / (1.0 - gamma);

        // Exponential spacings normalized to a point on the simplex; the
        // floor keeps every entry strictly positive.
        Eigen::VectorXd p0(n), v(n);
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            p0[k] = 1e-9 - std::log(1.0 - next());
            sum += p0[k];
        }
        p0 /= sum;
        for (int k = 0; k < n; ++k) v[k] = vmax * next();

        const TVBallSpec spec{rho, i % 2 == 1};
        const DualSolution dual = tv_inner_inf_dual(p0, v, spec, gamma);
        double primal;
        if (spec.use_fail_state_reduction) {
            // The reduction assumes a reachable zero-value outcome; give the
            // primal that outcome explicitly with zero nominal mass.
            Eigen::VectorXd p0x(n + 1), vx(n + 1);
            p0x << p0, 0.0;
            vx << v, 0.0;
            primal = tv_inner_inf_primal(p0x, vx, rho).value;
        } else {
            primal = tv_inner_inf_primal(p0, v, rho).value;
        }
        out.max_gap = std::max(out.max_gap, std::abs(dual.value - primal));
    }
    return out;
}

namespace {

void check_q_shape(const QTable& q, const TabularRMDP& m) {
    if (q.values.rows() != m.n_states || q.values.cols() != m.n_actions)
        throw std::invalid_argument("Q table shape does not match model");
}

// Shared driver: applies the inner worst case row by row against a fixed
// next-state value vector.
QTable bellman_with_values(const Eigen::VectorXd& values, const TabularRMDP& m,
                           const TVBallSpec& spec, int threads) {
    QTable out = QTable::zeros(m.n_states, m.n_actions);
    const int rows = m.n_states * m.n_actions;
    detail::parallel_for(rows, threads, [&](int begin, int end) {
        for (int sa = begin; sa < end; ++sa) {
            const int s = sa / m.n_actions;
            const int a = sa % m.n_actions;
            const Eigen::VectorXd p0 = m.kernel.row(sa);
            const double inner =
                spec.rho == 0.0
                    ? p0.dot(values)
                    : tv_inner_inf_dual(p0, values, spec, m.gamma).value;
            out.values(s, a) = m.reward(s, a) + m.gamma * inner;
        }
    });
    return out;
}

}  // namespace

QTable robust_bellman_apply(const QTable& q, const TabularRMDP& m,
                            const TVBallSpec& spec, int threads) {
    check_q_shape(q, m);
    return bellman_with_values(value_of(q).values, m, spec, threads);
}

QTable robust_bellman_fixed_policy(const QTable& q, const Policy& pi,
                                   const TabularRMDP& m, const TVBallSpec& spec,
                                   int threads) {
    check_q_shape(q, m);
    if (static_cast<int>(pi.actions.size()) != m.n_states)
        throw std::invalid_argument("policy length does not match n_states");
    Eigen::VectorXd values(m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        const int a = pi.actions[s];
        if (a < 0 || a >= m.n_actions)
            throw std::invalid_argument("policy action out of range");
        values[s] = q.values(s, a);
    }
    return bellman_with_values(values, m, spec, threads);
}

QTable apply_Tg(const QTable& f, const Eigen::MatrixXd& g, const TabularRMDP& m,
                const TVBallSpec& spec) {
    check_q_shape(f, m);
    check_ball_radius(spec.rho);
    if (g.rows() != m.n_states || g.cols() != m.n_actions)
        throw std::invalid_argument("dual witness shape does not match model");

    const Eigen::VectorXd best = value_of(f).values;
    QTable out = QTable::zeros(m.n_states, m.n_actions);
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) {
            const int sa = m.sa_index(s, a);
            double hinge = 0.0;
            for (int sn = 0; sn < m.n_states; ++sn)
                hinge += m.kernel(sa, sn) * std::max(0.0, g(s, a) - best[sn]);
            out.values(s, a) = m.reward(s, a) -
                               m.gamma * (hinge - (1.0 - spec.rho) * g(s, a));
        }
    return out;
}

}  // namespace rrmdp
