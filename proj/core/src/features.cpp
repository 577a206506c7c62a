#include "rrmdp/features.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>

namespace rrmdp {

namespace {

void check_shape(int n_states, int n_actions) {
    if (n_states < 1 || n_actions < 1)
        throw std::invalid_argument("feature map needs positive dimensions");
}

}  // namespace

FeatureMap FeatureMap::one_hot(int n_states, int n_actions) {
    check_shape(n_states, n_actions);
    FeatureMap f;
    f.kind = Kind::kOneHot;
    f.n_states = n_states;
    f.n_actions = n_actions;
    f.dim = n_states * n_actions;
    return f;
}

FeatureMap FeatureMap::indicator_table(int n_states, int n_actions,
                                       std::vector<int> groups) {
    check_shape(n_states, n_actions);
    if (static_cast<int>(groups.size()) != n_states * n_actions)
        throw std::invalid_argument("groups must have one entry per cell");
    int max_group = -1;
    for (int g : groups) {
        if (g < 0) throw std::invalid_argument("group indices must be >= 0");
        max_group = std::max(max_group, g);
    }
    FeatureMap f;
    f.kind = Kind::kIndicatorTable;
    f.n_states = n_states;
    f.n_actions = n_actions;
    f.dim = max_group + 1;
    f.group = std::move(groups);
    return f;
}

FeatureMap FeatureMap::constant(int n_states, int n_actions) {
    return indicator_table(
        n_states, n_actions,
        std::vector<int>(static_cast<std::size_t>(n_states * n_actions), 0));
}

FeatureMap FeatureMap::custom(int n_states, int n_actions, Eigen::MatrixXd phi) {
    check_shape(n_states, n_actions);
    if (phi.rows() != n_states * n_actions || phi.cols() < 1)
        throw std::invalid_argument("feature matrix must have a row per cell");
    if (!phi.allFinite())
        throw std::invalid_argument("feature matrix must be finite");
    FeatureMap f;
    f.kind = Kind::kCustom;
    f.n_states = n_states;
    f.n_actions = n_actions;
    f.dim = static_cast<int>(phi.cols());
    f.matrix = std::move(phi);
    return f;
}

Eigen::VectorXd FeatureMap::dense_row(int sa) const {
    if (kind == Kind::kCustom) return matrix.row(sa);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(dim);
    row[group_of(sa)] = 1.0;
    return row;
}

FeatureMap feature_map_from_json(const nlohmann::json& j, int n_states,
                                 int n_actions) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "one-hot") return FeatureMap::one_hot(n_states, n_actions);
        if (kind == "indicator-table") {
            auto groups = j.at("groups").get<std::vector<int>>();
            return FeatureMap::indicator_table(n_states, n_actions,
                                               std::move(groups));
        }
        if (kind == "constant") return FeatureMap::constant(n_states, n_actions);
        if (kind == "custom") {
            const auto& rows = j.at("matrix");
            const int n_cells = n_states * n_actions;
            if (static_cast<int>(rows.size()) != n_cells)
                throw std::invalid_argument("feature matrix must have a row per cell");
            const int dim = static_cast<int>(rows.at(0).size());
            Eigen::MatrixXd phi(n_cells, dim);
            for (int c = 0; c < n_cells; ++c)
                for (int k = 0; k < dim; ++k)
                    phi(c, k) = rows.at(c).at(k).get<double>();
            return FeatureMap::custom(n_states, n_actions, std::move(phi));
        }
        throw std::invalid_argument("unknown feature kind: " + kind);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed feature json: ") +
                                    e.what());
    }
}

nlohmann::json feature_map_to_json(const FeatureMap& f) {
    nlohmann::json j;
    switch (f.kind) {
        case FeatureMap::Kind::kOneHot:
            j["kind"] = "one-hot";
            break;
        case FeatureMap::Kind::kIndicatorTable:
            j["kind"] = "indicator-table";
            j["groups"] = f.group;
            break;
        case FeatureMap::Kind::kCustom: {
            j["kind"] = "custom";
            nlohmann::json rows = nlohmann::json::array();
            for (int c = 0; c < f.n_cells(); ++c) {
                nlohmann::json row = nlohmann::json::array();
                for (int k = 0; k < f.dim; ++k) row.push_back(f.matrix(c, k));
                rows.push_back(std::move(row));
            }
            j["matrix"] = std::move(rows);
            break;
        }
    }
    return j;
}

}  // namespace rrmdp
