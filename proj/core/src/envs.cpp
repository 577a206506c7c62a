#include "rrmdp/envs.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace rrmdp {

namespace {

void check_common(double gamma, double rho) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("gamma must lie in (0, 1)");
    if (!(rho >= 0.0 && rho <= 1.0))
        throw std::invalid_argument("rho must lie in [0, 1]");
}

void check_params_keys(const nlohmann::json& params,
                       const std::set<std::string>& known) {
    if (!params.is_object())
        throw std::invalid_argument("benchmark params must be an object");
    for (const auto& item : params.items())
        if (known.find(item.key()) == known.end())
            throw std::invalid_argument("unknown benchmark parameter: " +
                                        item.key());
}

}  // namespace

TabularRMDP make_chain(const ChainParams& p) {
    check_common(p.gamma, p.rho);
    if (p.length < 1) throw std::invalid_argument("length must be >= 1");
    if (!(p.slip >= 0.0 && p.fail_prob >= 0.0 &&
          p.slip + p.fail_prob <= 1.0))
        throw std::invalid_argument(
            "need slip >= 0, fail_prob >= 0, slip + fail_prob <= 1");

    const int L = p.length;
    const int S = L + 1;  // trailing fail state, possibly unreachable
    const int fail = L;
    TabularRMDP m;
    m.n_states = S;
    m.n_actions = 2;
    m.gamma = p.gamma;
    m.rho = p.rho;
    m.fail_state = fail;
    m.reward = Eigen::MatrixXd::Zero(S, 2);
    m.reward(L - 1, 1) = 1.0;
    m.kernel = Eigen::MatrixXd::Zero(2 * S, S);
    m.init_dist = Eigen::VectorXd::Zero(S);
    m.init_dist[0] = 1.0;

    for (int s = 0; s < L; ++s) {
        const int back = std::max(0, s - 1);
        const int fwd = std::min(L - 1, s + 1);
        // back: intended move left, slips right
        m.kernel(m.sa_index(s, 0), back) += 1.0 - p.slip;
        m.kernel(m.sa_index(s, 0), fwd) += p.slip;
        // forward: intended move right, slips left, may fall into fail
        m.kernel(m.sa_index(s, 1), fwd) += 1.0 - p.slip - p.fail_prob;
        m.kernel(m.sa_index(s, 1), back) += p.slip;
        m.kernel(m.sa_index(s, 1), fail) += p.fail_prob;
    }
    m.kernel(m.sa_index(fail, 0), fail) = 1.0;
    m.kernel(m.sa_index(fail, 1), fail) = 1.0;

    validate_or_throw(m);
    return m;
}

TabularRMDP make_gridworld(const GridworldParams& p) {
    check_common(p.gamma, p.rho);
    if (p.width < 1 || p.height < 1)
        throw std::invalid_argument("grid dimensions must be >= 1");
    if (!(p.slip >= 0.0 && p.slip <= 1.0))
        throw std::invalid_argument("slip must lie in [0, 1]");

    const int W = p.width, H = p.height, S = W * H;
    const int goal = S - 1;
    TabularRMDP m;
    m.n_states = S;
    m.n_actions = 4;
    m.gamma = p.gamma;
    m.rho = p.rho;
    m.reward = Eigen::MatrixXd::Zero(S, 4);
    m.kernel = Eigen::MatrixXd::Zero(4 * S, S);
    m.init_dist = Eigen::VectorXd::Zero(S);
    m.init_dist[0] = 1.0;

    // dy, dx per action: up, right, down, left.
    const int dy[4] = {-1, 0, 1, 0};
    const int dx[4] = {0, 1, 0, -1};
    auto step = [&](int s, int dir) {
        const int x = s % W, y = s / W;
        const int nx = std::clamp(x + dx[dir], 0, W - 1);
        const int ny = std::clamp(y + dy[dir], 0, H - 1);
        return ny * W + nx;
    };
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < 4; ++a) {
            if (s == goal) {
                m.kernel(m.sa_index(s, a), goal) = 1.0;
                m.reward(s, a) = 1.0;
                continue;
            }
            m.kernel(m.sa_index(s, a), step(s, a)) += 1.0 - p.slip;
            m.kernel(m.sa_index(s, a), step(s, (a + 1) % 4)) += p.slip / 2.0;
            m.kernel(m.sa_index(s, a), step(s, (a + 3) % 4)) += p.slip / 2.0;
        }

    validate_or_throw(m);
    return m;
}

TabularRMDP make_risky_safe(const RiskySafeParams& p) {
    check_common(p.gamma, p.rho);
    if (!(p.p_fail >= 0.0 && p.p_fail <= 1.0))
        throw std::invalid_argument("p_fail must lie in [0, 1]");
    if (!(p.r_safe >= 0.0 && p.r_safe <= 1.0))
        throw std::invalid_argument("r_safe must lie in [0, 1]");

    TabularRMDP m;
    m.n_states = 3;  // 0 start, 1 gold, 2 fail
    m.n_actions = 2;
    m.gamma = p.gamma;
    m.rho = p.rho;
    m.fail_state = 2;
    m.reward = Eigen::MatrixXd::Zero(3, 2);
    m.reward(0, 0) = p.r_safe;
    m.reward(1, 0) = 1.0;
    m.reward(1, 1) = 1.0;
    m.kernel = Eigen::MatrixXd::Zero(6, 3);
    m.kernel(m.sa_index(0, 0), 0) = 1.0;
    m.kernel(m.sa_index(0, 1), 1) = 1.0 - p.p_fail;
    m.kernel(m.sa_index(0, 1), 2) = p.p_fail;
    m.kernel(m.sa_index(1, 0), 1) = 1.0;
    m.kernel(m.sa_index(1, 1), 1) = 1.0;
    m.kernel(m.sa_index(2, 0), 2) = 1.0;
    m.kernel(m.sa_index(2, 1), 2) = 1.0;
    m.init_dist = Eigen::VectorXd::Zero(3);
    m.init_dist[0] = 1.0;

    validate_or_throw(m);
    return m;
}

double risky_safe_flip_threshold(const RiskySafeParams& p) {
    return 1.0 - p.p_fail - p.r_safe / p.gamma;
}

double risky_safe_crossover_p_fail(const RiskySafeParams& p) {
    return 1.0 - p.r_safe / p.gamma;
}

TabularRMDP make_benchmark(const BenchmarkSpec& spec) {
    const nlohmann::json& j = spec.params;
    try {
        if (spec.name == "chain") {
            check_params_keys(j, {"length", "gamma", "rho", "slip", "fail_prob"});
            ChainParams p;
            p.length = j.value("length", p.length);
            p.gamma = j.value("gamma", p.gamma);
            p.rho = j.value("rho", p.rho);
            p.slip = j.value("slip", p.slip);
            p.fail_prob = j.value("fail_prob", p.fail_prob);
            return make_chain(p);
        }
        if (spec.name == "gridworld") {
            check_params_keys(j, {"width", "height", "gamma", "rho", "slip"});
            GridworldParams p;
            p.width = j.value("width", p.width);
            p.height = j.value("height", p.height);
            p.gamma = j.value("gamma", p.gamma);
            p.rho = j.value("rho", p.rho);
            p.slip = j.value("slip", p.slip);
            return make_gridworld(p);
        }
        if (spec.name == "risky-safe") {
            check_params_keys(j, {"gamma", "rho", "p_fail", "r_safe"});
            RiskySafeParams p;
            p.gamma = j.value("gamma", p.gamma);
            p.rho = j.value("rho", p.rho);
            p.p_fail = j.value("p_fail", p.p_fail);
            p.r_safe = j.value("r_safe", p.r_safe);
            return make_risky_safe(p);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed benchmark params: ") +
                                    e.what());
    }
    throw std::invalid_argument("unknown benchmark family: " + spec.name);
}

}  // namespace rrmdp
