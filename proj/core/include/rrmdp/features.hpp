#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>
#include <vector>

namespace rrmdp {

/// Linear features over state-action cells, indexed by sa = s*n_actions + a.
///
/// Three kinds:
///  - one-hot: one feature per cell (tabular; weights are a Q table),
///  - indicator-table: cells partitioned into groups, one indicator feature
///    per group (a single group recovers the constant class),
///  - custom: an arbitrary dense (n_states*n_actions) x dim matrix.
///
/// Partition kinds make downstream solvers separable per group, which they
/// exploit for exact minimization.
struct FeatureMap {
    enum class Kind { kOneHot, kIndicatorTable, kCustom };

    Kind kind = Kind::kOneHot;
    int n_states = 0;
    int n_actions = 0;
    int dim = 0;
    std::vector<int> group;   // indicator-table: cell -> feature index
    Eigen::MatrixXd matrix;   // custom: row per cell

    static FeatureMap one_hot(int n_states, int n_actions);
    static FeatureMap indicator_table(int n_states, int n_actions,
                                      std::vector<int> groups);
    static FeatureMap constant(int n_states, int n_actions);
    static FeatureMap custom(int n_states, int n_actions, Eigen::MatrixXd phi);

    int n_cells() const { return n_states * n_actions; }
    bool is_partition() const { return kind != Kind::kCustom; }

    /// Feature index owning a cell; partition kinds only.
    int group_of(int sa) const {
        return kind == Kind::kOneHot ? sa : group[static_cast<std::size_t>(sa)];
    }

    /// phi(sa) . w without materializing the row.
    double value(int sa, const Eigen::VectorXd& w) const {
        switch (kind) {
            case Kind::kOneHot: return w[sa];
            case Kind::kIndicatorTable: return w[group[static_cast<std::size_t>(sa)]];
            default: return matrix.row(sa).dot(w);
        }
    }

    Eigen::VectorXd dense_row(int sa) const;
};

/// Parses {"kind": "one-hot"} | {"kind": "indicator-table", "groups": [..]}
/// | {"kind": "custom", "matrix": [[..]..]}. Throws std::invalid_argument.
FeatureMap feature_map_from_json(const nlohmann::json& j, int n_states,
                                 int n_actions);

nlohmann::json feature_map_to_json(const FeatureMap& f);

}  // namespace rrmdp
