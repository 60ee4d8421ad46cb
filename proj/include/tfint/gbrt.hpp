#pragma once

#include "tfint/series.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <vector>

namespace tfint::gbrt {

struct BoostConfig {
    int n_rounds = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_samples_leaf = 5;
    double subsample_rows = 1.0;
    std::uint64_t seed = 0;

    /// Throws ValidationError on out-of-range values.
    void validate() const;
};

/// Flat binary tree node. Leaves have feature == -1. Rows with
/// x[feature] < threshold go left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double leaf_value(const double* x) const {
        int k = 0;
        while (!nodes[static_cast<std::size_t>(k)].is_leaf()) {
            const auto& n = nodes[static_cast<std::size_t>(k)];
            k = x[n.feature] < n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(k)].value;
    }
};

/// prediction = base_score + learning_rate * sum of leaf values.
struct TreeEnsemble {
    double base_score = 0.0;
    std::vector<RegressionTree> trees;
    BoostConfig config;
    std::size_t n_features = 0;

    double predict_row(const double* x,
                       std::size_t n_trees = std::numeric_limits<std::size_t>::max()) const {
        double acc = base_score;
        const std::size_t m = std::min(n_trees, trees.size());
        for (std::size_t k = 0; k < m; ++k) {
            acc += config.learning_rate * trees[k].leaf_value(x);
        }
        return acc;
    }
};

/// Per-feature sort order of a feature matrix. Building it once lets many
/// targets share one design (one ensemble per taxon).
class PresortedFeatures {
public:
    explicit PresortedFeatures(const RowMatrix& features);

    const RowMatrix& features() const { return *features_; }
    std::size_t rows() const { return static_cast<std::size_t>(features_->rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(features_->cols()); }
    const std::uint32_t* order(std::size_t f) const { return order_.data() + f * rows(); }
    const double* sorted_values(std::size_t f) const { return values_.data() + f * rows(); }

private:
    const RowMatrix* features_;
    std::vector<std::uint32_t> order_;
    std::vector<double> values_;
};

/// Stagewise least-squares boosting with exact greedy splits.
TreeEnsemble fit(const PresortedFeatures& features, const Vector& targets, const BoostConfig& config);
TreeEnsemble fit(const RowMatrix& features, const Vector& targets, const BoostConfig& config);

/// Predictions from the first `n_trees` trees (all by default).
Vector predict(const TreeEnsemble& ensemble, const RowMatrix& features,
               std::size_t n_trees = std::numeric_limits<std::size_t>::max());

inline constexpr int kEnsembleFormatVersion = 1;

nlohmann::json to_json(const BoostConfig& config);
BoostConfig boost_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TreeEnsemble& ensemble);
TreeEnsemble ensemble_from_json(const nlohmann::json& j);

}  // namespace tfint::gbrt
