#include "rrmdp/rmdp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rrmdp {

namespace {

bool near_one(double x) { return std::abs(x - 1.0) <= kStochasticityTol; }

void check_policy(const Policy& pi, int n_states, int n_actions) {
    if (static_cast<int>(pi.actions.size()) != n_states)
        throw std::invalid_argument("policy length does not match n_states");
    for (int a : pi.actions)
        if (a < 0 || a >= n_actions)
            throw std::invalid_argument("policy action out of range");
}

// Transition matrix of a deterministic policy, P_pi[s][s'] = P(s' | s, pi(s)).
Eigen::MatrixXd policy_kernel(const Policy& pi, const Eigen::MatrixXd& kernel,
                              int n_states, int n_actions) {
    Eigen::MatrixXd p(n_states, n_states);
    for (int s = 0; s < n_states; ++s)
        p.row(s) = kernel.row(s * n_actions + pi.actions[s]);
    return p;
}

}  // namespace

std::vector<std::string> validate(const TabularRMDP& m) {
    std::vector<std::string> out;
    auto fail = [&out](const std::string& msg) { out.push_back(msg); };

    if (m.n_states < 1) fail("n_states must be at least 1");
    if (m.n_actions < 1) fail("n_actions must be at least 1");
    if (!(m.gamma > 0.0 && m.gamma < 1.0)) fail("gamma must lie in (0, 1)");
    if (!(m.rho >= 0.0 && m.rho <= 1.0)) fail("rho must lie in [0, 1]");
    if (m.n_states < 1 || m.n_actions < 1) return out;

    const int S = m.n_states, A = m.n_actions;
    if (m.reward.rows() != S || m.reward.cols() != A) {
        fail("reward must be n_states x n_actions");
    } else {
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const double r = m.reward(s, a);
                if (!std::isfinite(r) || r < 0.0 || r > 1.0) {
                    std::ostringstream ss;
                    ss << "reward(" << s << ", " << a << ") = " << r
                       << " outside [0, 1]";
                    fail(ss.str());
                }
            }
    }
    if (m.kernel.rows() != S * A || m.kernel.cols() != S) {
        fail("kernel must be (n_states*n_actions) x n_states");
    } else {
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const auto row = m.kernel.row(m.sa_index(s, a));
                double sum = 0.0;
                bool neg = false;
                for (int sn = 0; sn < S; ++sn) {
                    if (!(row[sn] >= 0.0)) neg = true;
                    sum += row[sn];
                }
                if (neg || !near_one(sum)) {
                    std::ostringstream ss;
                    ss << "kernel row (" << s << ", " << a
                       << ") is not a probability distribution (sum " << sum
                       << ")";
                    fail(ss.str());
                }
            }
    }
    if (m.init_dist.size() != S) {
        fail("init_dist must have n_states entries");
    } else {
        double sum = 0.0;
        bool neg = false;
        for (int s = 0; s < S; ++s) {
            if (!(m.init_dist[s] >= 0.0)) neg = true;
            sum += m.init_dist[s];
        }
        if (neg || !near_one(sum)) fail("init_dist is not a probability distribution");
    }
    if (m.fail_state) {
        const int f = *m.fail_state;
        if (f < 0 || f >= S) {
            fail("fail_state out of range");
        } else if (m.reward.rows() == S && m.kernel.rows() == S * A) {
            for (int a = 0; a < A; ++a) {
                if (m.reward(f, a) != 0.0) fail("fail_state must have zero reward");
                const auto row = m.kernel.row(m.sa_index(f, a));
                if (std::abs(row[f] - 1.0) > kStochasticityTol)
                    fail("fail_state must be absorbing");
            }
        }
    }
    return out;
}

void validate_or_throw(const TabularRMDP& m) {
    const auto violations = validate(m);
    if (violations.empty()) return;
    std::ostringstream ss;
    ss << "invalid model:";
    for (const auto& v : violations) ss << "\n  - " << v;
    throw std::invalid_argument(ss.str());
}

VTable value_of(const QTable& q) {
    return {q.values.rowwise().maxCoeff()};
}

Policy greedy_policy(const QTable& q) {
    const int S = static_cast<int>(q.values.rows());
    const int A = static_cast<int>(q.values.cols());
    Policy pi;
    pi.actions.resize(S, 0);
    for (int s = 0; s < S; ++s) {
        int best = 0;
        for (int a = 1; a < A; ++a)
            if (q.values(s, a) > q.values(s, best)) best = a;  // ties keep lowest
        pi.actions[s] = best;
    }
    return pi;
}

Occupancy occupancy(const Policy& pi, const Eigen::MatrixXd& kernel,
                    double gamma, const Eigen::VectorXd& init_dist) {
    const int S = static_cast<int>(init_dist.size());
    if (S < 1 || kernel.cols() != S || kernel.rows() % S != 0)
        throw std::invalid_argument("kernel/init_dist shape mismatch");
    const int A = static_cast<int>(kernel.rows()) / S;
    check_policy(pi, S, A);

    // Flow equations: d = (1-gamma) init + gamma P_pi^T d.
    const Eigen::MatrixXd p = policy_kernel(pi, kernel, S, A);
    const Eigen::MatrixXd lhs =
        Eigen::MatrixXd::Identity(S, S) - gamma * p.transpose();
    const Eigen::VectorXd rhs = (1.0 - gamma) * init_dist;
    Eigen::VectorXd d = lhs.partialPivLu().solve(rhs);

    const double residual = (lhs * d - rhs).lpNorm<Eigen::Infinity>();
    if (!(residual <= kOccupancySolveTol))
        throw std::runtime_error("occupancy solve residual above tolerance");

    d = d.cwiseMax(0.0);  // roundoff can leave tiny negatives
    d /= d.sum();

    Occupancy occ;
    occ.dist = Eigen::MatrixXd::Zero(S, A);
    for (int s = 0; s < S; ++s) occ.dist(s, pi.actions[s]) = d[s];
    return occ;
}

Occupancy occupancy(const Policy& pi, const TabularRMDP& m) {
    return occupancy(pi, m.kernel, m.gamma, m.init_dist);
}

PolicyValue policy_value_nominal(const Policy& pi, const TabularRMDP& m) {
    check_policy(pi, m.n_states, m.n_actions);
    const int S = m.n_states, A = m.n_actions;

    const Eigen::MatrixXd p = policy_kernel(pi, m.kernel, S, A);
    Eigen::VectorXd r_pi(S);
    for (int s = 0; s < S; ++s) r_pi[s] = m.reward(s, pi.actions[s]);

    const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(S, S) - m.gamma * p;
    const Eigen::VectorXd v = lhs.partialPivLu().solve(r_pi);
    if (!((lhs * v - r_pi).lpNorm<Eigen::Infinity>() <= kOccupancySolveTol))
        throw std::runtime_error("policy evaluation residual above tolerance");

    PolicyValue out;
    out.v.values = v;
    out.q.values.resize(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            out.q.values(s, a) =
                m.reward(s, a) + m.gamma * m.kernel.row(m.sa_index(s, a)).dot(v);
    out.j = m.init_dist.dot(v);
    return out;
}

nlohmann::json to_json(const TabularRMDP& m) {
    nlohmann::json j;
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    j["gamma"] = m.gamma;
    j["rho"] = m.rho;
    if (m.fail_state)
        j["fail_state"] = *m.fail_state;
    else
        j["fail_state"] = nullptr;

    nlohmann::json reward = nlohmann::json::array();
    for (int s = 0; s < m.n_states; ++s) {
        nlohmann::json row = nlohmann::json::array();
        for (int a = 0; a < m.n_actions; ++a) row.push_back(m.reward(s, a));
        reward.push_back(std::move(row));
    }
    j["reward"] = std::move(reward);

    nlohmann::json kernel = nlohmann::json::array();
    for (int s = 0; s < m.n_states; ++s) {
        nlohmann::json per_action = nlohmann::json::array();
        for (int a = 0; a < m.n_actions; ++a) {
            nlohmann::json row = nlohmann::json::array();
            for (int sn = 0; sn < m.n_states; ++sn)
                row.push_back(m.kernel(m.sa_index(s, a), sn));
            per_action.push_back(std::move(row));
        }
        kernel.push_back(std::move(per_action));
    }
    j["kernel"] = std::move(kernel);

    nlohmann::json init = nlohmann::json::array();
    for (int s = 0; s < m.n_states; ++s) init.push_back(m.init_dist[s]);
    j["init_dist"] = std::move(init);
    return j;
}

TabularRMDP rmdp_from_json(const nlohmann::json& j) {
    TabularRMDP m;
    try {
        m.n_states = j.at("n_states").get<int>();
        m.n_actions = j.at("n_actions").get<int>();
        m.gamma = j.at("gamma").get<double>();
        m.rho = j.at("rho").get<double>();
        if (j.contains("fail_state") && !j.at("fail_state").is_null())
            m.fail_state = j.at("fail_state").get<int>();
        if (m.n_states < 1 || m.n_actions < 1)
            throw std::invalid_argument("n_states and n_actions must be positive");

        const auto& reward = j.at("reward");
        m.reward.resize(m.n_states, m.n_actions);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a)
                m.reward(s, a) = reward.at(s).at(a).get<double>();

        const auto& kernel = j.at("kernel");
        m.kernel.resize(m.n_states * m.n_actions, m.n_states);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a)
                for (int sn = 0; sn < m.n_states; ++sn)
                    m.kernel(m.sa_index(s, a), sn) =
                        kernel.at(s).at(a).at(sn).get<double>();

        const auto& init = j.at("init_dist");
        m.init_dist.resize(m.n_states);
        for (int s = 0; s < m.n_states; ++s)
            m.init_dist[s] = init.at(s).get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed model json: ") + e.what());
    }
    validate_or_throw(m);
    return m;
}

}  // namespace rrmdp
