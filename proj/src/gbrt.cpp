#include "tfint/gbrt.hpp"

#include "tfint/error.hpp"
#include "tfint/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tfint::gbrt {

void BoostConfig::validate() const {
    if (n_rounds < 0) throw ValidationError("bad_boost_config", "n_rounds must be >= 0");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
        throw ValidationError("bad_boost_config", "learning_rate must lie in (0, 1]");
    if (max_depth < 0) throw ValidationError("bad_boost_config", "max_depth must be >= 0");
    if (min_samples_leaf < 1) throw ValidationError("bad_boost_config", "min_samples_leaf must be >= 1");
    if (!(subsample_rows > 0.0 && subsample_rows <= 1.0))
        throw ValidationError("bad_boost_config", "subsample_rows must lie in (0, 1]");
}

PresortedFeatures::PresortedFeatures(const RowMatrix& features) : features_(&features) {
    const std::size_t n = rows();
    const std::size_t F = cols();
    order_.resize(n * F);
    values_.resize(n * F);
    std::vector<std::uint32_t> idx(n);
    for (std::size_t f = 0; f < F; ++f) {
        std::iota(idx.begin(), idx.end(), 0u);
        const auto fe = static_cast<Eigen::Index>(f);
        std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
            return features(a, fe) < features(b, fe);
        });
        for (std::size_t k = 0; k < n; ++k) {
            order_[f * n + k] = idx[k];
            values_[f * n + k] = features(idx[k], fe);
        }
    }
}

namespace {

double split_point(double lo, double hi) {
    const double mid = lo + (hi - lo) * 0.5;
    return mid > lo ? mid : hi;
}

// Level-wise growth. Every feature keeps its sorted row list partitioned so
// that each frontier node owns the same contiguous segment in all lists.
RegressionTree grow_tree(const PresortedFeatures& pf, const std::vector<double>& residual,
                         const std::vector<std::uint8_t>& in_sample, const BoostConfig& cfg) {
    const std::size_t n = pf.rows();
    const std::size_t F = pf.cols();
    const RowMatrix& X = pf.features();

    RegressionTree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, 0);
    std::size_t n_in = 0;
    for (std::size_t r = 0; r < n; ++r) {
        if (!in_sample[r]) node_of[r] = -1;
        else ++n_in;
    }
    if (cfg.max_depth == 0 || n_in == 0) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            if (node_of[r] == 0) sum += residual[r];
        tree.nodes[0].value = n_in > 0 ? sum / static_cast<double>(n_in) : 0.0;
        return tree;
    }

    std::vector<std::uint32_t> rows(F * n_in);
    std::vector<double> vals(F * n_in);
    for (std::size_t f = 0; f < F; ++f) {
        const std::uint32_t* order = pf.order(f);
        const double* values = pf.sorted_values(f);
        std::size_t w = f * n_in;
        for (std::size_t k = 0; k < n; ++k) {
            if (in_sample[order[k]]) {
                rows[w] = order[k];
                vals[w] = values[k];
                ++w;
            }
        }
    }

    std::vector<double> inverse(n_in + 1, 0.0);
    for (std::size_t c = 1; c <= n_in; ++c) inverse[c] = 1.0 / static_cast<double>(c);

    struct Segment {
        int node;
        std::size_t begin, end;
    };
    std::vector<Segment> frontier{{0, 0, n_in}};
    std::vector<std::uint8_t> go_left(n, 0);
    std::vector<std::uint32_t> spill_rows(n_in);
    std::vector<double> spill_vals(n_in);
    const int min_leaf = cfg.min_samples_leaf;

    for (int depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
        const std::size_t m = frontier.size();
        std::vector<double> total(m, 0.0), total_sq(m, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const int node = node_of[r];
            if (node < 0) continue;
            for (std::size_t s = 0; s < m; ++s) {
                if (frontier[s].node == node) {
                    total[s] += residual[r];
                    total_sq[s] += residual[r] * residual[r];
                    break;
                }
            }
        }

        std::vector<Segment> next;
        std::vector<std::size_t> split_nodes;
        for (std::size_t s = 0; s < m; ++s) {
            const auto [node, b, e] = frontier[s];
            const int cnt = static_cast<int>(e - b);
            const double parent = cnt > 0 ? total[s] * total[s] / cnt : 0.0;
            const double min_gain = 1e-12 * std::max(total_sq[s] - parent, 0.0);
            double best_score = parent;
            int best_feature = -1;
            double best_threshold = 0.0;
            if (cnt >= 2 * min_leaf) {
                const double tot = total[s];
                for (std::size_t f = 0; f < F; ++f) {
                    const std::uint32_t* rw = rows.data() + f * n_in;
                    const double* vl = vals.data() + f * n_in;
                    double sum = 0.0;
                    const std::size_t first = b + static_cast<std::size_t>(min_leaf);
                    const std::size_t last = e - static_cast<std::size_t>(min_leaf);
                    for (std::size_t k = b; k < first; ++k) sum += residual[rw[k]];
                    double feature_best = best_score;
                    std::size_t feature_k = 0;
                    for (std::size_t k = first; k <= last; ++k) {
                        if (vl[k] > vl[k - 1]) {
                            const double right = tot - sum;
                            const double score = sum * sum * inverse[k - b] + right * right * inverse[e - k];
                            if (score > feature_best && score - parent > min_gain) {
                                feature_best = score;
                                feature_k = k;
                            }
                        }
                        sum += residual[rw[k]];
                    }
                    if (feature_k != 0) {
                        best_score = feature_best;
                        best_feature = static_cast<int>(f);
                        best_threshold = split_point(vl[feature_k - 1], vl[feature_k]);
                    }
                }
            }
            if (best_feature < 0) continue;
            const int left = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& nd = tree.nodes[static_cast<std::size_t>(node)];
            nd.feature = best_feature;
            nd.threshold = best_threshold;
            nd.left = left;
            nd.right = left + 1;
            split_nodes.push_back(s);
        }
        if (split_nodes.empty()) break;

        for (auto s : split_nodes) {
            const auto& seg = frontier[s];
            const auto& nd = tree.nodes[static_cast<std::size_t>(seg.node)];
            const std::uint32_t* rw = rows.data();
            std::size_t n_left = 0;
            for (std::size_t k = seg.begin; k < seg.end; ++k) {
                const auto r = rw[k];
                const bool l = X(static_cast<Eigen::Index>(r), nd.feature) < nd.threshold;
                go_left[r] = l;
                node_of[r] = l ? nd.left : nd.right;
                n_left += l;
            }
            next.push_back({nd.left, seg.begin, seg.begin + n_left});
            next.push_back({nd.right, seg.begin + n_left, seg.end});
        }
        if (depth + 1 < cfg.max_depth) {
            for (std::size_t f = 0; f < F; ++f) {
                std::uint32_t* rw = rows.data() + f * n_in;
                double* vl = vals.data() + f * n_in;
                for (auto s : split_nodes) {
                    const auto& seg = frontier[s];
                    std::size_t w = seg.begin, spill = 0;
                    for (std::size_t k = seg.begin; k < seg.end; ++k) {
                        const auto r = rw[k];
                        const double v = vl[k];
                        const std::size_t l = go_left[r];
                        rw[w] = r;
                        vl[w] = v;
                        spill_rows[spill] = r;
                        spill_vals[spill] = v;
                        w += l;
                        spill += 1 - l;
                    }
                    std::copy_n(spill_rows.begin(), spill, rw + w);
                    std::copy_n(spill_vals.begin(), spill, vl + w);
                }
            }
        }
        frontier = std::move(next);
    }

    std::vector<double> sum(tree.nodes.size(), 0.0);
    std::vector<int> cnt(tree.nodes.size(), 0);
    for (std::size_t r = 0; r < n; ++r) {
        if (node_of[r] < 0) continue;
        sum[static_cast<std::size_t>(node_of[r])] += residual[r];
        ++cnt[static_cast<std::size_t>(node_of[r])];
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        if (tree.nodes[k].is_leaf()) {
            tree.nodes[k].value = cnt[k] > 0 ? sum[k] / cnt[k] : 0.0;
        }
    }
    return tree;
}

}  // namespace

TreeEnsemble fit(const PresortedFeatures& pf, const Vector& targets, const BoostConfig& config) {
    config.validate();
    const std::size_t n = pf.rows();
    if (static_cast<std::size_t>(targets.size()) != n) {
        throw ValidationError("shape_mismatch", "targets and features differ in row count");
    }
    if (n < 2 * static_cast<std::size_t>(config.min_samples_leaf)) {
        throw ValidationError("too_few_rows", "need at least 2*min_samples_leaf training rows");
    }
    if (!targets.allFinite() || !pf.features().allFinite()) {
        throw DataError("non_finite", "training data contain non-finite values");
    }

    TreeEnsemble ens;
    ens.config = config;
    ens.n_features = pf.cols();
    // Running mean keeps a constant target exactly representable.
    double mean = 0.0;
    for (Eigen::Index r = 0; r < targets.size(); ++r) {
        mean += (targets(r) - mean) / static_cast<double>(r + 1);
    }
    ens.base_score = mean;

    std::vector<double> pred(n, mean);
    std::vector<double> residual(n);
    std::vector<std::uint8_t> in_sample(n, 1);
    std::vector<std::uint32_t> perm(n);
    const auto n_sample = std::max<std::size_t>(
        2 * static_cast<std::size_t>(config.min_samples_leaf),
        static_cast<std::size_t>(std::floor(config.subsample_rows * static_cast<double>(n))));

    const RowMatrix& X = pf.features();
    for (int round = 0; round < config.n_rounds; ++round) {
        for (std::size_t r = 0; r < n; ++r) residual[r] = targets(static_cast<Eigen::Index>(r)) - pred[r];
        if (n_sample < n) {
            Rng rng = make_stream(config.seed, {static_cast<std::uint64_t>(round)});
            std::iota(perm.begin(), perm.end(), 0u);
            std::fill(in_sample.begin(), in_sample.end(), 0);
            for (std::size_t k = 0; k < n_sample; ++k) {
                const auto j = static_cast<std::size_t>(uniform_int(rng, static_cast<std::int64_t>(k),
                                                                    static_cast<std::int64_t>(n - 1)));
                std::swap(perm[k], perm[j]);
                in_sample[perm[k]] = 1;
            }
        }
        RegressionTree tree = grow_tree(pf, residual, in_sample, config);
        for (std::size_t r = 0; r < n; ++r) {
            pred[r] += config.learning_rate * tree.leaf_value(X.row(static_cast<Eigen::Index>(r)).data());
        }
        ens.trees.push_back(std::move(tree));
    }
    return ens;
}

TreeEnsemble fit(const RowMatrix& features, const Vector& targets, const BoostConfig& config) {
    const PresortedFeatures pf(features);
    return fit(pf, targets, config);
}

Vector predict(const TreeEnsemble& ensemble, const RowMatrix& features, std::size_t n_trees) {
    if (static_cast<std::size_t>(features.cols()) != ensemble.n_features) {
        throw ValidationError("width_mismatch", "feature width " + std::to_string(features.cols()) +
                                                    " does not match model width " +
                                                    std::to_string(ensemble.n_features));
    }
    Vector out(features.rows());
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        out(r) = ensemble.predict_row(features.row(r).data(), n_trees);
    }
    return out;
}

nlohmann::json to_json(const BoostConfig& c) {
    return {{"n_rounds", c.n_rounds},         {"learning_rate", c.learning_rate},
            {"max_depth", c.max_depth},       {"min_samples_leaf", c.min_samples_leaf},
            {"subsample_rows", c.subsample_rows}, {"seed", c.seed}};
}

BoostConfig boost_config_from_json(const nlohmann::json& j) {
    BoostConfig c;
    c.n_rounds = j.value("n_rounds", c.n_rounds);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
    c.subsample_rows = j.value("subsample_rows", c.subsample_rows);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

nlohmann::json to_json(const TreeEnsemble& e) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : e.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            if (n.is_leaf()) {
                nodes.push_back({{"value", n.value}});
            } else {
                nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold},
                                 {"left", n.left}, {"right", n.right}});
            }
        }
        trees.push_back(std::move(nodes));
    }
    return {{"format", "tfint-gbrt"}, {"version", kEnsembleFormatVersion},
            {"base_score", e.base_score}, {"n_features", e.n_features},
            {"config", to_json(e.config)}, {"trees", std::move(trees)}};
}

TreeEnsemble ensemble_from_json(const nlohmann::json& j) {
    if (j.value("version", 0) != kEnsembleFormatVersion) {
        throw DataError("bad_model_version", "unsupported ensemble format version");
    }
    TreeEnsemble e;
    e.base_score = j.at("base_score").get<double>();
    e.n_features = j.at("n_features").get<std::size_t>();
    e.config = boost_config_from_json(j.at("config"));
    for (const auto& jt : j.at("trees")) {
        RegressionTree t;
        for (const auto& jn : jt) {
            TreeNode n;
            if (jn.contains("feature")) {
                n.feature = jn.at("feature").get<int>();
                n.threshold = jn.at("threshold").get<double>();
                n.left = jn.at("left").get<int>();
                n.right = jn.at("right").get<int>();
            } else {
                n.value = jn.at("value").get<double>();
            }
            t.nodes.push_back(n);
        }
        const auto size = static_cast<int>(t.nodes.size());
        for (const auto& n : t.nodes) {
            if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size ||
                                 n.feature < 0 || static_cast<std::size_t>(n.feature) >= e.n_features)) {
                throw DataError("bad_model", "malformed tree node");
            }
        }
        if (t.nodes.empty()) throw DataError("bad_model", "empty tree");
        e.trees.push_back(std::move(t));
    }
    return e;
}

}  // namespace tfint::gbrt
