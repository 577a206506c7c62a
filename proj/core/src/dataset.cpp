#include "rrmdp/dataset.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "rrmdp/rng.hpp"

namespace rrmdp {

namespace {

void check_mu(const Eigen::MatrixXd& mu, int n_states, int n_actions) {
    if (mu.rows() != n_states || mu.cols() != n_actions)
        throw std::invalid_argument("mu must be n_states x n_actions");
    double sum = 0.0;
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            if (!(mu(s, a) >= 0.0))
                throw std::invalid_argument("mu has a negative entry");
            sum += mu(s, a);
        }
    if (std::abs(sum - 1.0) > kStochasticityTol)
        throw std::invalid_argument("mu does not sum to one");
}

// Inverse-CDF draw over weights scanned in index order. u in [0, 1); falls
// back to the last positive-weight index when roundoff exhausts the scan.
template <typename WeightAt>
int draw_index(int n, WeightAt&& weight, double u) {
    double cum = 0.0;
    int last_positive = -1;
    for (int i = 0; i < n; ++i) {
        const double w = weight(i);
        if (w <= 0.0) continue;
        last_positive = i;
        cum += w;
        if (u < cum) return i;
    }
    if (last_positive < 0)
        throw std::invalid_argument("cannot sample from an all-zero distribution");
    return last_positive;
}

}  // namespace

Dataset generate_dataset(const TabularRMDP& m, const Eigen::MatrixXd& mu,
                         std::size_t n, std::uint64_t seed) {
    validate_or_throw(m);
    check_mu(mu, m.n_states, m.n_actions);

    Dataset d;
    d.n_states = m.n_states;
    d.n_actions = m.n_actions;
    d.mu = mu;
    d.seed = seed;
    d.transitions.resize(n);
    const int cells = m.n_states * m.n_actions;
    for (std::size_t i = 0; i < n; ++i) {
        const double u_cell = uniform01_at(seed, 2 * i);
        const double u_next = uniform01_at(seed, 2 * i + 1);
        const int sa = draw_index(
            cells, [&](int j) { return mu(j / m.n_actions, j % m.n_actions); },
            u_cell);
        const int s = sa / m.n_actions;
        const int a = sa % m.n_actions;
        const int row = m.sa_index(s, a);
        const int sn = draw_index(
            m.n_states, [&](int j) { return m.kernel(row, j); }, u_next);
        d.transitions[i] = Transition{s, a, m.reward(s, a), sn, 1.0};
    }
    return d;
}

Eigen::MatrixXd mu_from_policy(const TabularRMDP& m, const Policy& pi,
                               double epsilon) {
    validate_or_throw(m);
    if (static_cast<int>(pi.actions.size()) != m.n_states)
        throw std::invalid_argument("policy length does not match n_states");
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("epsilon must lie in [0, 1]");

    const int S = m.n_states, A = m.n_actions;
    // Behavior policy matrix and its state transition kernel.
    Eigen::MatrixXd behavior = Eigen::MatrixXd::Constant(S, A, epsilon / A);
    for (int s = 0; s < S; ++s) {
        const int a = pi.actions[s];
        if (a < 0 || a >= A)
            throw std::invalid_argument("policy action out of range");
        behavior(s, a) += 1.0 - epsilon;
    }
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            p.row(s) += behavior(s, a) * m.kernel.row(m.sa_index(s, a));

    const Eigen::MatrixXd lhs =
        Eigen::MatrixXd::Identity(S, S) - m.gamma * p.transpose();
    const Eigen::VectorXd rhs = (1.0 - m.gamma) * m.init_dist;
    Eigen::VectorXd dist = lhs.partialPivLu().solve(rhs);
    if (!((lhs * dist - rhs).lpNorm<Eigen::Infinity>() <= kOccupancySolveTol))
        throw std::runtime_error("occupancy solve residual above tolerance");
    dist = dist.cwiseMax(0.0);
    dist /= dist.sum();

    Eigen::MatrixXd mu(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) mu(s, a) = dist[s] * behavior(s, a);
    return mu;
}

Dataset exact_expectation_dataset(const TabularRMDP& m,
                                  const Eigen::MatrixXd& mu) {
    validate_or_throw(m);
    check_mu(mu, m.n_states, m.n_actions);

    Dataset d;
    d.n_states = m.n_states;
    d.n_actions = m.n_actions;
    d.mu = mu;
    d.seed = 0;
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) {
            if (mu(s, a) <= 0.0) continue;
            const int row = m.sa_index(s, a);
            for (int sn = 0; sn < m.n_states; ++sn) {
                const double p = m.kernel(row, sn);
                if (p <= 0.0) continue;
                d.transitions.push_back(
                    Transition{s, a, m.reward(s, a), sn, mu(s, a) * p});
            }
        }
    return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);

    nlohmann::json header;
    header["n_states"] = d.n_states;
    header["n_actions"] = d.n_actions;
    header["seed"] = d.seed;
    nlohmann::json mu = nlohmann::json::array();
    for (int s = 0; s < d.n_states; ++s) {
        nlohmann::json row = nlohmann::json::array();
        for (int a = 0; a < d.n_actions; ++a) row.push_back(d.mu(s, a));
        mu.push_back(std::move(row));
    }
    header["mu"] = std::move(mu);
    out << header.dump() << "\n";

    for (const auto& t : d.transitions) {
        nlohmann::json line;
        line["s"] = t.s;
        line["a"] = t.a;
        line["r"] = t.r;
        line["s_next"] = t.s_next;
        if (t.weight != 1.0) line["w"] = t.weight;
        out << line.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open: " + path);

    Dataset d;
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("dataset file is empty: " + path);
    try {
        const nlohmann::json header = nlohmann::json::parse(line);
        d.n_states = header.at("n_states").get<int>();
        d.n_actions = header.at("n_actions").get<int>();
        d.seed = header.at("seed").get<std::uint64_t>();
        if (d.n_states < 1 || d.n_actions < 1)
            throw std::invalid_argument("dataset header has bad dimensions");
        const auto& mu = header.at("mu");
        d.mu.resize(d.n_states, d.n_actions);
        for (int s = 0; s < d.n_states; ++s)
            for (int a = 0; a < d.n_actions; ++a)
                d.mu(s, a) = mu.at(s).at(a).get<double>();

        std::size_t lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line);
            Transition t;
            t.s = j.at("s").get<int>();
            t.a = j.at("a").get<int>();
            t.r = j.at("r").get<double>();
            t.s_next = j.at("s_next").get<int>();
            t.weight = j.value("w", 1.0);
            if (t.s < 0 || t.s >= d.n_states || t.s_next < 0 ||
                t.s_next >= d.n_states || t.a < 0 || t.a >= d.n_actions ||
                !(t.weight > 0.0) || !std::isfinite(t.r))
                throw std::invalid_argument("transition out of range at line " +
                                            std::to_string(lineno));
            d.transitions.push_back(t);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed dataset json: ") +
                                    e.what());
    }
    check_mu(d.mu, d.n_states, d.n_actions);
    return d;
}

}  // namespace rrmdp
