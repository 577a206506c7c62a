#include "rrmdp/func_approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>

#include "fitting_detail.hpp"
#include "rrmdp/dual.hpp"

namespace rrmdp {

namespace detail {

Aggregated aggregate(const Dataset& data) {
    if (data.transitions.empty())
        throw std::invalid_argument("dataset has no transitions");

    std::vector<std::size_t> idx(data.transitions.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
        const Transition& x = data.transitions[i];
        const Transition& y = data.transitions[j];
        return std::tie(x.s, x.a, x.s_next, x.r, x.weight) <
               std::tie(y.s, y.a, y.s_next, y.r, y.weight);
    });

    Aggregated agg;
    agg.n_states = data.n_states;
    agg.n_actions = data.n_actions;
    for (std::size_t k : idx) {
        const Transition& t = data.transitions[k];
        if (t.s >= data.n_states || t.s_next >= data.n_states ||
            t.a >= data.n_actions || t.s < 0 || t.s_next < 0 || t.a < 0)
            throw std::invalid_argument("transition outside dataset dimensions");
        if (agg.cells.empty() || agg.cells.back().s != t.s ||
            agg.cells.back().a != t.a) {
            agg.cells.push_back(Cell{t.s, t.a, 0.0, 0.0, {}});
        }
        Cell& cell = agg.cells.back();
        if (cell.entries.empty() || cell.entries.back().s_next != t.s_next ||
            cell.entries.back().r != t.r) {
            cell.entries.push_back(CellEntry{t.s_next, t.r, 0.0});
        }
        cell.entries.back().w += t.weight;
        cell.w_total += t.weight;
        cell.wr_sum += t.weight * t.r;
        agg.w_all += t.weight;
    }
    return agg;
}

Eigen::VectorXd successor_values(const LinearQClass& f) {
    Eigen::VectorXd v(f.features.n_states);
    for (int s = 0; s < f.features.n_states; ++s) {
        double best = f.value(s, 0);
        for (int a = 1; a < f.features.n_actions; ++a)
            best = std::max(best, f.value(s, a));
        v[s] = best;
    }
    return v;
}

double dual_loss_aggregated(const Aggregated& agg, const Eigen::VectorXd& values,
                            const LinearDualClass& g, double rho) {
    double acc = 0.0;
    for (const Cell& cell : agg.cells) {
        const double gv = g.value(cell.s, cell.a);
        double hinge = 0.0;
        for (const CellEntry& e : cell.entries)
            hinge += e.w * std::max(0.0, gv - values[e.s_next]);
        acc += hinge - (1.0 - rho) * cell.w_total * gv;
    }
    return acc / agg.w_all;
}

}  // namespace detail

namespace {

using detail::Aggregated;
using detail::Cell;
using detail::CellEntry;

// Sorted hinge view of one cell (or one feature group): supports O(log n)
// evaluation of sum_j w_j (g - v_j)+ and of its derivative in g.
struct HingeProfile {
    std::vector<double> v;    // ascending
    std::vector<double> pw;   // pw[k] = weight of the k smallest entries
    std::vector<double> pwv;  // pwv[k] = weighted value sum of the same

    void build(std::vector<std::pair<double, double>>& vw) {
        std::sort(vw.begin(), vw.end());
        v.resize(vw.size());
        pw.assign(vw.size() + 1, 0.0);
        pwv.assign(vw.size() + 1, 0.0);
        for (std::size_t k = 0; k < vw.size(); ++k) {
            v[k] = vw[k].first;
            pw[k + 1] = pw[k] + vw[k].second;
            pwv[k + 1] = pwv[k] + vw[k].second * vw[k].first;
        }
    }

    // sum_j w_j (g - v_j)+; entries with v_j == g contribute zero.
    double hinge_sum(double g) const {
        const std::size_t k = static_cast<std::size_t>(
            std::lower_bound(v.begin(), v.end(), g) - v.begin());
        return g * pw[k] - pwv[k];
    }

    // One-sided derivative matching the hinge subgradient choice 0 at kinks.
    double hinge_slope(double g) const {
        const std::size_t k = static_cast<std::size_t>(
            std::lower_bound(v.begin(), v.end(), g) - v.begin());
        return pw[k];
    }
};

double clip(double z, double lo, double hi) {
    return std::min(hi, std::max(lo, z));
}

// Derivative convention for the clipped evaluation: 1 on the closed clip
// interval so the iteration can leave a boundary start (weights begin at 0,
// which sits exactly on the lower clip).
double clip_slope(double z, double lo, double hi) {
    return (z >= lo && z <= hi) ? 1.0 : 0.0;
}

void check_class_shapes(const FeatureMap& f, int n_states, int n_actions,
                        const Eigen::VectorXd& weights) {
    if (f.n_states != n_states || f.n_actions != n_actions)
        throw std::invalid_argument("feature map does not match data dimensions");
    if (weights.size() != f.dim)
        throw std::invalid_argument("weight vector does not match feature dim");
}

void check_rho(double rho) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw std::invalid_argument("rho must lie in (0, 1]");
}

// ---------------------------------------------------------------------------
// Exact per-group minimization for partition feature maps. The loss separates
// across feature groups and each group's objective is convex piecewise linear
// in the group's weight, so breakpoint enumeration is exact.

ErmReport erm_dual_partition(const Aggregated& agg, const Eigen::VectorXd& values,
                             LinearDualClass& g, double rho) {
    const int dim = g.features.dim;
    std::vector<std::vector<std::pair<double, double>>> group_vw(
        static_cast<std::size_t>(dim));
    std::vector<double> group_w(static_cast<std::size_t>(dim), 0.0);
    for (const Cell& cell : agg.cells) {
        const auto gi = static_cast<std::size_t>(
            g.features.group_of(cell.s * agg.n_actions + cell.a));
        for (const CellEntry& e : cell.entries)
            group_vw[gi].emplace_back(values[e.s_next], e.w);
        group_w[gi] += cell.w_total;
    }

    double total = 0.0;
    for (int k = 0; k < dim; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        if (group_w[ku] <= 0.0) {
            g.weights[k] = 0.0;  // group unobserved; any value is optimal
            continue;
        }
        HingeProfile prof;
        prof.build(group_vw[ku]);

        std::vector<double> candidates;
        candidates.reserve(prof.v.size() + 2);
        candidates.push_back(g.clip_lo);
        candidates.push_back(g.clip_hi);
        for (double v : prof.v)
            candidates.push_back(clip(v, g.clip_lo, g.clip_hi));
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()),
                         candidates.end());

        double best = std::numeric_limits<double>::infinity();
        double best_eta = g.clip_lo;
        for (double eta : candidates) {
            const double obj =
                prof.hinge_sum(eta) - (1.0 - rho) * group_w[ku] * eta;
            if (obj < best) {  // ties keep the smallest eta
                best = obj;
                best_eta = eta;
            }
        }
        g.weights[k] = best_eta;
        total += best;
    }

    ErmReport report;
    report.final_weights = g.weights;
    report.empirical_loss = total / agg.w_all;
    report.iterations = 1;
    report.step_schedule = "exact-breakpoint";
    report.loss_trace = {report.empirical_loss};
    return report;
}

// ---------------------------------------------------------------------------
// Subgradient scheme for custom feature maps.

struct SubgradientProblem {
    const Aggregated* agg;
    Eigen::MatrixXd phi;        // one row per cell
    Eigen::VectorXd cell_w;     // W_sa per cell
    std::vector<HingeProfile> profiles;
    double rho, lo, hi;

    double loss(const Eigen::VectorXd& w) const {
        double acc = 0.0;
        for (std::size_t c = 0; c < profiles.size(); ++c) {
            const double gv = clip(phi.row(static_cast<Eigen::Index>(c)).dot(w), lo, hi);
            acc += profiles[c].hinge_sum(gv) -
                   (1.0 - rho) * cell_w[static_cast<Eigen::Index>(c)] * gv;
        }
        return acc / agg->w_all;
    }

    Eigen::VectorXd subgradient(const Eigen::VectorXd& w) const {
        Eigen::VectorXd coef(static_cast<Eigen::Index>(profiles.size()));
        for (std::size_t c = 0; c < profiles.size(); ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            const double z = phi.row(ci).dot(w);
            const double gv = clip(z, lo, hi);
            coef[ci] = (profiles[c].hinge_slope(gv) -
                        (1.0 - rho) * cell_w[ci]) *
                       clip_slope(z, lo, hi);
        }
        return phi.transpose() * coef / agg->w_all;
    }
};

ErmReport erm_dual_subgradient(const Aggregated& agg,
                               const Eigen::VectorXd& values,
                               LinearDualClass& g, const ErmOptions& opts,
                               double rho) {
    if (opts.steps < 1 || !(opts.step_scale > 0.0) || !(opts.tol >= 0.0) ||
        opts.patience < 1)
        throw std::invalid_argument("bad erm options");

    SubgradientProblem prob;
    prob.agg = &agg;
    prob.rho = rho;
    prob.lo = g.clip_lo;
    prob.hi = g.clip_hi;
    const auto n_cells = static_cast<Eigen::Index>(agg.cells.size());
    prob.phi.resize(n_cells, g.features.dim);
    prob.cell_w.resize(n_cells);
    prob.profiles.resize(agg.cells.size());
    for (Eigen::Index c = 0; c < n_cells; ++c) {
        const Cell& cell = agg.cells[static_cast<std::size_t>(c)];
        prob.phi.row(c) =
            g.features.dense_row(cell.s * agg.n_actions + cell.a);
        prob.cell_w[c] = cell.w_total;
        std::vector<std::pair<double, double>> vw;
        vw.reserve(cell.entries.size());
        for (const CellEntry& e : cell.entries)
            vw.emplace_back(values[e.s_next], e.w);
        prob.profiles[static_cast<std::size_t>(c)].build(vw);
    }

    ErmReport report;
    Eigen::VectorXd best_w = g.weights;
    double best_loss = prob.loss(best_w);
    report.loss_trace.push_back(best_loss);

    double step = opts.step_scale * (g.clip_hi - g.clip_lo);
    const int steps_per_round = std::max(50, opts.steps / 30);
    int steps_done = 0, stalled = 0, worsening = 0;
    double prev_candidate = best_loss;

    while (steps_done < opts.steps) {
        Eigen::VectorXd w = best_w;
        Eigen::VectorXd avg = w;
        int t = 0;
        while (t < steps_per_round && steps_done < opts.steps) {
            ++t;
            ++steps_done;
            w -= (step / std::sqrt(static_cast<double>(t))) *
                 prob.subgradient(w);
            avg += (w - avg) / t;
            report.loss_trace.push_back(prob.loss(w));
        }
        const double loss_last = report.loss_trace.back();
        const double loss_avg = prob.loss(avg);
        const Eigen::VectorXd& cand = loss_avg <= loss_last ? avg : w;
        const double cand_loss = std::min(loss_avg, loss_last);
        if (!std::isfinite(cand_loss))
            throw ErmDivergence("dual loss became non-finite");

        const double margin = opts.tol * std::max(1.0, std::abs(best_loss));
        if (cand_loss < best_loss - margin) {
            best_loss = cand_loss;
            best_w = cand;
            stalled = 0;
            worsening = 0;
        } else {
            ++stalled;
            if (cand_loss > prev_candidate + margin && cand_loss > best_loss)
                ++worsening;
            else
                worsening = 0;
            if (worsening >= opts.patience)
                throw ErmDivergence("dual loss increased for " +
                                    std::to_string(opts.patience) +
                                    " consecutive rounds");
            if (stalled >= opts.patience) break;
        }
        prev_candidate = cand_loss;
        step *= 0.5;
    }

    g.weights = best_w;
    report.final_weights = best_w;
    report.empirical_loss = best_loss;
    report.iterations = steps_done;
    std::ostringstream ss;
    ss << "subgradient c/sqrt(t), c halved each round of " << steps_per_round
       << " steps, c0 = " << opts.step_scale * (g.clip_hi - g.clip_lo);
    report.step_schedule = ss.str();
    return report;
}

// Shared ridge solve once the targets are reduced to per-cell sums of w*y
// and w*y^2. Returns the fitted class and the weighted MSE of its clipped
// values against the targets.
std::pair<LinearQClass, double> fit_targets(const Aggregated& agg,
                                            const Eigen::VectorXd& wy,
                                            const Eigen::VectorXd& wyy,
                                            const Eigen::VectorXd& cw,
                                            const LinearQClass& fclass,
                                            double ridge) {
    const auto n_cells = static_cast<Eigen::Index>(agg.cells.size());
    LinearQClass fitted = fclass;
    const double W = agg.w_all;
    if (fitted.features.is_partition()) {
        // Separable ridge: (A_k/W + ridge) w_k = b_k/W per feature group.
        Eigen::VectorXd a_sum = Eigen::VectorXd::Zero(fitted.features.dim);
        Eigen::VectorXd b_sum = Eigen::VectorXd::Zero(fitted.features.dim);
        for (Eigen::Index c = 0; c < n_cells; ++c) {
            const Cell& cell = agg.cells[static_cast<std::size_t>(c)];
            const int k =
                fitted.features.group_of(cell.s * agg.n_actions + cell.a);
            a_sum[k] += cw[c];
            b_sum[k] += wy[c];
        }
        for (int k = 0; k < fitted.features.dim; ++k)
            fitted.weights[k] =
                a_sum[k] + ridge * W > 0.0
                    ? b_sum[k] / (a_sum[k] + ridge * W)
                    : 0.0;
    } else {
        Eigen::MatrixXd phi(n_cells, fitted.features.dim);
        for (Eigen::Index c = 0; c < n_cells; ++c) {
            const Cell& cell = agg.cells[static_cast<std::size_t>(c)];
            phi.row(c) =
                fitted.features.dense_row(cell.s * agg.n_actions + cell.a);
        }
        const Eigen::MatrixXd normal =
            phi.transpose() * cw.asDiagonal() * phi / W +
            ridge * Eigen::MatrixXd::Identity(fitted.features.dim,
                                              fitted.features.dim);
        const Eigen::VectorXd rhs = phi.transpose() * (wy / W);
        fitted.weights = normal.ldlt().solve(rhs);
    }

    // Weighted mean squared error of the clipped fit against the targets.
    double sq = 0.0;
    for (Eigen::Index c = 0; c < n_cells; ++c) {
        const Cell& cell = agg.cells[static_cast<std::size_t>(c)];
        const double fv = fitted.value(cell.s, cell.a);
        sq += std::max(0.0, fv * fv * cw[c] - 2.0 * fv * wy[c] + wyy[c]);
    }
    return {std::move(fitted), sq / W};
}

}  // namespace

namespace detail {

std::pair<LinearDualClass, ErmReport> erm_dual_aggregated(
    const Aggregated& agg, const Eigen::VectorXd& values, LinearDualClass g,
    const ErmOptions& opts, double rho) {
    ErmReport report = g.features.is_partition()
                           ? erm_dual_partition(agg, values, g, rho)
                           : erm_dual_subgradient(agg, values, g, opts, rho);
    return {std::move(g), std::move(report)};
}

std::pair<LinearQClass, double> regress_aggregated(
    const Aggregated& agg, const Eigen::VectorXd& values,
    const LinearDualClass* witness, const LinearQClass& fclass, double ridge,
    double rho, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma must lie in (0, 1)");
    if (!(ridge >= 0.0)) throw std::invalid_argument("ridge must be >= 0");

    const auto n_cells = static_cast<Eigen::Index>(agg.cells.size());
    Eigen::VectorXd wy(n_cells), wyy(n_cells), cw(n_cells);
    for (Eigen::Index c = 0; c < n_cells; ++c) {
        const Cell& cell = agg.cells[static_cast<std::size_t>(c)];
        // With a witness the targets are y = r + gamma ((1-rho) g -
        // (g - v(s'))+), unclipped by design; otherwise y = r + gamma v(s').
        const double gv = witness ? witness->value(cell.s, cell.a) : 0.0;
        double sy = 0.0, syy = 0.0;
        for (const CellEntry& e : cell.entries) {
            const double v = values[e.s_next];
            const double y =
                witness ? e.r + gamma * ((1.0 - rho) * gv -
                                         std::max(0.0, gv - v))
                        : e.r + gamma * v;
            sy += e.w * y;
            syy += e.w * y * y;
        }
        wy[c] = sy;
        wyy[c] = syy;
        cw[c] = cell.w_total;
    }
    return fit_targets(agg, wy, wyy, cw, fclass, ridge);
}

}  // namespace detail

QTable LinearQClass::materialize() const {
    QTable q = QTable::zeros(features.n_states, features.n_actions);
    for (int s = 0; s < features.n_states; ++s)
        for (int a = 0; a < features.n_actions; ++a)
            q.values(s, a) = value(s, a);
    return q;
}

Eigen::MatrixXd LinearDualClass::materialize() const {
    Eigen::MatrixXd g(features.n_states, features.n_actions);
    for (int s = 0; s < features.n_states; ++s)
        for (int a = 0; a < features.n_actions; ++a) g(s, a) = value(s, a);
    return g;
}

LinearQClass make_q_class(FeatureMap features, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma must lie in (0, 1)");
    LinearQClass f;
    f.clip_lo = 0.0;
    f.clip_hi = 1.0 / (1.0 - gamma);
    f.weights = Eigen::VectorXd::Zero(features.dim);
    f.features = std::move(features);
    return f;
}

LinearDualClass make_dual_class(FeatureMap features, double rho, double gamma) {
    check_rho(rho);
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma must lie in (0, 1)");
    LinearDualClass g;
    g.clip_lo = 0.0;
    g.clip_hi = 2.0 / (rho * (1.0 - gamma));
    g.weights = Eigen::VectorXd::Zero(features.dim);
    g.features = std::move(features);
    return g;
}

double dual_loss_empirical(const LinearDualClass& g, const LinearQClass& f,
                           const Dataset& data, double rho) {
    check_rho(rho);
    check_class_shapes(f.features, data.n_states, data.n_actions, f.weights);
    check_class_shapes(g.features, data.n_states, data.n_actions, g.weights);
    const Aggregated agg = detail::aggregate(data);
    return detail::dual_loss_aggregated(agg, detail::successor_values(f), g,
                                        rho);
}

double dual_loss_population(const LinearDualClass& g, const LinearQClass& f,
                            const TabularRMDP& m, const Eigen::MatrixXd& mu,
                            double rho) {
    check_rho(rho);
    check_class_shapes(f.features, m.n_states, m.n_actions, f.weights);
    check_class_shapes(g.features, m.n_states, m.n_actions, g.weights);
    if (mu.rows() != m.n_states || mu.cols() != m.n_actions)
        throw std::invalid_argument("mu must be n_states x n_actions");

    const Eigen::VectorXd values = detail::successor_values(f);
    double acc = 0.0;
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) {
            if (mu(s, a) <= 0.0) continue;
            const double gv = g.value(s, a);
            double hinge = 0.0;
            const int row = m.sa_index(s, a);
            for (int sn = 0; sn < m.n_states; ++sn)
                hinge += m.kernel(row, sn) * std::max(0.0, gv - values[sn]);
            acc += mu(s, a) * (hinge - (1.0 - rho) * gv);
        }
    return acc;
}

std::pair<LinearDualClass, ErmReport> erm_dual(const Dataset& data,
                                               const LinearQClass& f,
                                               LinearDualClass g,
                                               const ErmOptions& opts,
                                               double rho) {
    check_rho(rho);
    check_class_shapes(f.features, data.n_states, data.n_actions, f.weights);
    check_class_shapes(g.features, data.n_states, data.n_actions, g.weights);
    if (!(g.clip_hi > g.clip_lo) || !(g.clip_lo >= 0.0))
        throw std::invalid_argument("bad dual clip range");

    const Aggregated agg = detail::aggregate(data);
    return detail::erm_dual_aggregated(agg, detail::successor_values(f),
                                       std::move(g), opts, rho);
}

std::pair<LinearQClass, double> least_squares_q(const Dataset& data,
                                                const LinearQClass& f_prev,
                                                const LinearDualClass& g,
                                                const LinearQClass& fclass,
                                                double ridge, double rho,
                                                double gamma) {
    check_rho(rho);
    check_class_shapes(g.features, data.n_states, data.n_actions, g.weights);
    check_class_shapes(f_prev.features, data.n_states, data.n_actions,
                       f_prev.weights);
    check_class_shapes(fclass.features, data.n_states, data.n_actions,
                       fclass.weights);
    const Aggregated agg = detail::aggregate(data);
    return detail::regress_aggregated(agg, detail::successor_values(f_prev),
                                      &g, fclass, ridge, rho, gamma);
}

std::pair<LinearQClass, double> least_squares_nominal(
    const Dataset& data, const LinearQClass& f_prev, const LinearQClass& fclass,
    double ridge, double gamma) {
    check_class_shapes(f_prev.features, data.n_states, data.n_actions,
                       f_prev.weights);
    check_class_shapes(fclass.features, data.n_states, data.n_actions,
                       fclass.weights);
    const Aggregated agg = detail::aggregate(data);
    return detail::regress_aggregated(agg, detail::successor_values(f_prev),
                                      nullptr, fclass, ridge, 1.0, gamma);
}

QTable apply_Tg_exact(const LinearQClass& f, const LinearDualClass& g,
                      const TabularRMDP& m, double rho) {
    check_class_shapes(f.features, m.n_states, m.n_actions, f.weights);
    check_class_shapes(g.features, m.n_states, m.n_actions, g.weights);
    return apply_Tg(f.materialize(), g.materialize(), m,
                    TVBallSpec{rho, true});
}

}  // namespace rrmdp
