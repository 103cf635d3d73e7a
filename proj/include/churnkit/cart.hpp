#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "churnkit/model.hpp"
#include "churnkit/rng.hpp"

namespace churnkit {

// Binary recursive partitioning on the Gini criterion. The same grower
// serves the standalone tree (with cost-complexity pruning) and the forest
// (unpruned, per-node feature subsampling).

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    std::uint32_t n = 0;       // training rows reaching the node
    std::uint32_t n_left = 0;  // of which labeled Left
    double improvement = 0.0;  // count-weighted Gini decrease of the split

    bool is_leaf() const { return feature < 0; }
    double p_left() const { return static_cast<double>(n_left) / static_cast<double>(n); }
};

struct TreeGrowth {
    std::size_t min_split = 20;
    std::size_t min_leaf = 7;
    std::size_t mtry = 0;  // 0 = consider every feature
    Rng* rng = nullptr;    // required when mtry > 0
};

namespace tree_detail {

/// Preindexed training columns. Features with few distinct values carry a
/// per-row bucket id so node scans count instead of sort.
struct GrowInput {
    std::size_t n_rows = 0, n_cols = 0;
    std::vector<std::vector<double>> col;         // column-major values
    std::vector<std::uint8_t> is_left;            // labels
    std::vector<std::vector<double>> uniques;     // per feature; empty = continuous path
    std::vector<std::vector<std::uint16_t>> bucket;

    static constexpr std::size_t kMaxBuckets = 256;

    static GrowInput build(const FeatureTable& t) {
        GrowInput g;
        g.n_rows = t.n_rows;
        g.n_cols = t.n_cols;
        g.col.assign(t.n_cols, {});
        g.uniques.assign(t.n_cols, {});
        g.bucket.assign(t.n_cols, {});
        g.is_left.resize(t.n_rows);
        for (std::size_t r = 0; r < t.n_rows; ++r)
            g.is_left[r] = t.labels[r] == Label::Left ? 1 : 0;
        for (std::size_t c = 0; c < t.n_cols; ++c) {
            auto& v = g.col[c];
            v.resize(t.n_rows);
            for (std::size_t r = 0; r < t.n_rows; ++r) v[r] = t.at(r, c);
            std::vector<double> u = v;
            std::sort(u.begin(), u.end());
            u.erase(std::unique(u.begin(), u.end()), u.end());
            if (u.size() <= kMaxBuckets && u.size() >= 2) {
                g.uniques[c] = u;
                auto& b = g.bucket[c];
                b.resize(t.n_rows);
                for (std::size_t r = 0; r < t.n_rows; ++r) {
                    const auto it = std::lower_bound(u.begin(), u.end(), v[r]);
                    b[r] = static_cast<std::uint16_t>(it - u.begin());
                }
            }
        }
        return g;
    }
};

inline double weighted_gini(double n, double k) {
    return n > 0 ? 2.0 * k * (n - k) / n : 0.0;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double improvement = 0.0;
};

/// Best Gini split for one feature over the node's rows, honoring min_leaf.
inline void scan_feature(const GrowInput& g, const std::vector<std::uint32_t>& rows,
                         std::size_t f, std::size_t n_left_total, std::size_t min_leaf,
                         SplitChoice& best,
                         std::vector<std::uint32_t>& cnt_buf,
                         std::vector<std::uint32_t>& left_buf,
                         std::vector<std::pair<double, std::uint8_t>>& sort_buf) {
    const std::size_t n = rows.size();
    const double parent = weighted_gini(static_cast<double>(n),
                                        static_cast<double>(n_left_total));
    // Features arrive in ascending index order and thresholds in ascending
    // value order, so keeping the first strict maximum realizes the
    // (lowest feature, lowest threshold) tie-break.
    auto consider = [&](double nl, double kl, double threshold) {
        const double nr = static_cast<double>(n) - nl;
        if (nl < static_cast<double>(min_leaf) || nr < static_cast<double>(min_leaf)) return;
        const double kr = static_cast<double>(n_left_total) - kl;
        const double imp = parent - weighted_gini(nl, kl) - weighted_gini(nr, kr);
        if (imp > best.improvement && imp > 1e-12)
            best = {static_cast<int>(f), threshold, imp};
    };

    const bool bucketed = !g.uniques[f].empty() && n >= g.uniques[f].size() / 4;
    if (bucketed) {
        const auto& u = g.uniques[f];
        cnt_buf.assign(u.size(), 0);
        left_buf.assign(u.size(), 0);
        const auto& b = g.bucket[f];
        for (std::uint32_t r : rows) {
            cnt_buf[b[r]]++;
            left_buf[b[r]] += g.is_left[r];
        }
        double nl = 0, kl = 0;
        int prev = -1;
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (cnt_buf[i] == 0) continue;
            if (prev >= 0) consider(nl, kl, 0.5 * (u[prev] + u[i]));
            nl += cnt_buf[i];
            kl += left_buf[i];
            prev = static_cast<int>(i);
        }
    } else {
        sort_buf.clear();
        const auto& v = g.col[f];
        for (std::uint32_t r : rows) sort_buf.emplace_back(v[r], g.is_left[r]);
        std::sort(sort_buf.begin(), sort_buf.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double nl = 0, kl = 0;
        for (std::size_t i = 0; i + 1 < sort_buf.size(); ++i) {
            nl += 1;
            kl += sort_buf[i].second;
            if (sort_buf[i].first == sort_buf[i + 1].first) continue;
            consider(nl, kl, 0.5 * (sort_buf[i].first + sort_buf[i + 1].first));
        }
    }
}

}  // namespace tree_detail

/// Grows a tree over the given row multiset. Deterministic: candidate
/// features are scanned in ascending index order, ties resolve to the lowest
/// feature then the lowest threshold.
inline std::vector<TreeNode> grow_tree(const tree_detail::GrowInput& g,
                                       const std::vector<std::uint32_t>& root_rows,
                                       const TreeGrowth& params) {
    require(params.mtry <= g.n_cols, "tree: mtry exceeds the feature count");
    require(params.mtry == 0 || params.rng != nullptr, "tree: mtry sampling needs an rng");

    std::vector<TreeNode> nodes;
    std::vector<std::uint32_t> cnt_buf, left_buf;
    std::vector<std::pair<double, std::uint8_t>> sort_buf;
    sort_buf.reserve(root_rows.size());

    struct Work {
        int node;
        std::vector<std::uint32_t> rows;
    };
    std::vector<Work> stack;

    auto make_node = [&](const std::vector<std::uint32_t>& rows) {
        TreeNode nd;
        nd.n = static_cast<std::uint32_t>(rows.size());
        std::uint32_t k = 0;
        for (std::uint32_t r : rows) k += g.is_left[r];
        nd.n_left = k;
        nodes.push_back(nd);
        return static_cast<int>(nodes.size() - 1);
    };

    stack.push_back({make_node(root_rows), root_rows});
    while (!stack.empty()) {
        Work w = std::move(stack.back());
        stack.pop_back();
        TreeNode& nd = nodes[w.node];
        const std::size_t n = w.rows.size();
        if (n < params.min_split || nd.n_left == 0 || nd.n_left == nd.n) continue;

        std::vector<std::size_t> candidates;
        if (params.mtry == 0 || params.mtry >= g.n_cols) {
            candidates.resize(g.n_cols);
            for (std::size_t c = 0; c < g.n_cols; ++c) candidates[c] = c;
        } else {
            candidates = params.rng->sample_without_replacement(g.n_cols, params.mtry);
            std::sort(candidates.begin(), candidates.end());
        }

        tree_detail::SplitChoice best;
        for (std::size_t f : candidates)
            tree_detail::scan_feature(g, w.rows, f, nd.n_left, params.min_leaf, best,
                                      cnt_buf, left_buf, sort_buf);
        if (best.feature < 0) continue;

        std::vector<std::uint32_t> left_rows, right_rows;
        const auto& v = g.col[best.feature];
        for (std::uint32_t r : w.rows)
            (v[r] < best.threshold ? left_rows : right_rows).push_back(r);

        const int li = make_node(left_rows);
        const int ri = make_node(right_rows);
        TreeNode& nd2 = nodes[w.node];  // make_node may have reallocated
        nd2.feature = best.feature;
        nd2.threshold = best.threshold;
        nd2.improvement = best.improvement;
        nd2.left = li;
        nd2.right = ri;
        stack.push_back({ri, std::move(right_rows)});
        stack.push_back({li, std::move(left_rows)});
    }
    return nodes;
}

namespace tree_detail {

inline double node_risk(const TreeNode& nd) {
    return static_cast<double>(std::min<std::uint32_t>(nd.n_left, nd.n - nd.n_left));
}

struct SubtreeStats {
    double leaf_risk = 0;
    std::size_t leaves = 0;
};

inline SubtreeStats subtree_stats(const std::vector<TreeNode>& nodes, int i) {
    const TreeNode& nd = nodes[i];
    if (nd.is_leaf()) return {node_risk(nd), 1};
    const SubtreeStats l = subtree_stats(nodes, nd.left);
    const SubtreeStats r = subtree_stats(nodes, nd.right);
    return {l.leaf_risk + r.leaf_risk, l.leaves + r.leaves};
}

}  // namespace tree_detail

/// Drops nodes no longer reachable from the root, remapping child links.
inline void compact_tree(std::vector<TreeNode>& nodes) {
    if (nodes.empty()) return;
    std::vector<int> remap(nodes.size(), -1);
    std::vector<TreeNode> kept;
    std::vector<int> queue{0};
    while (!queue.empty()) {
        const int i = queue.back();
        queue.pop_back();
        remap[i] = static_cast<int>(kept.size());
        kept.push_back(nodes[i]);
        if (!nodes[i].is_leaf()) {
            queue.push_back(nodes[i].right);
            queue.push_back(nodes[i].left);
        }
    }
    for (auto& nd : kept)
        if (!nd.is_leaf()) {
            nd.left = remap[nd.left];
            nd.right = remap[nd.right];
        }
    nodes = std::move(kept);
}

/// Weakest-link cost-complexity pruning. A subtree survives only while its
/// per-leaf risk reduction, relative to the root risk, exceeds cp.
inline void prune_tree(std::vector<TreeNode>& nodes, double cp) {
    if (nodes.empty()) return;
    const double root_risk = tree_detail::node_risk(nodes[0]) > 0
                                 ? tree_detail::node_risk(nodes[0])
                                 : 1.0;
    const double alpha = cp * root_risk;
    for (;;) {
        double min_g = std::numeric_limits<double>::infinity();
        int victim = -1;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].is_leaf()) continue;
            const auto st = tree_detail::subtree_stats(nodes, static_cast<int>(i));
            const double g = (tree_detail::node_risk(nodes[i]) - st.leaf_risk) /
                             static_cast<double>(st.leaves - 1);
            if (g < min_g) {
                min_g = g;
                victim = static_cast<int>(i);
            }
        }
        if (victim < 0 || min_g > alpha + 1e-12) break;
        nodes[victim].feature = -1;
        nodes[victim].left = nodes[victim].right = -1;
        nodes[victim].improvement = 0;
        compact_tree(nodes);
    }
}

inline std::size_t count_leaves(const std::vector<TreeNode>& nodes, int i = 0) {
    if (nodes.empty()) return 0;
    if (nodes[i].is_leaf()) return 1;
    return count_leaves(nodes, nodes[i].left) + count_leaves(nodes, nodes[i].right);
}

inline double tree_score(const std::vector<TreeNode>& nodes, std::span<const double> x) {
    int i = 0;
    while (!nodes[i].is_leaf())
        i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].p_left();
}

/// CART with rpart-style structural defaults (min_split=20, min_leaf=7) and
/// cost-complexity pruning at cp.
class CartClassifier : public Classifier {
public:
    static std::unique_ptr<CartClassifier> fit(const FeatureTable& train, const ModelSpec& spec) {
        spec.validate();
        require(train.has_labels(), "cart: training table has no labels");
        auto model = std::make_unique<CartClassifier>();
        model->set_fingerprint(train);
        model->columns_ = train.columns;
        model->cp_ = spec.get("cp", 0.01);

        const auto input = tree_detail::GrowInput::build(train);
        TreeGrowth params;
        params.min_split = static_cast<std::size_t>(spec.get("min_split", 20));
        params.min_leaf = static_cast<std::size_t>(spec.get("min_leaf", 7));
        std::vector<std::uint32_t> rows(train.n_rows);
        for (std::size_t r = 0; r < train.n_rows; ++r) rows[r] = static_cast<std::uint32_t>(r);
        model->nodes_ = grow_tree(input, rows, params);
        prune_tree(model->nodes_, model->cp_);
        return model;
    }

    Family family() const override { return Family::cart; }

    std::vector<double> predict_scores(const FeatureTable& t) const override {
        check_fingerprint(t);
        std::vector<double> out(t.n_rows);
        for (std::size_t r = 0; r < t.n_rows; ++r) out[r] = tree_score(nodes_, t.row(r));
        return out;
    }

    std::size_t leaf_count() const { return count_leaves(nodes_); }
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const std::vector<std::string>& columns() const { return columns_; }

    /// Per-variable sum of Gini decrease over the kept primary splits.
    ImportanceRanking importance() const {
        std::vector<std::pair<std::string, double>> raw;
        for (const auto& name : columns_) raw.emplace_back(name, 0.0);
        accumulate_importance(nodes_, raw);
        return ImportanceRanking::from_raw(std::move(raw));
    }

    nlohmann::json to_json() const override {
        nlohmann::json splits = nlohmann::json::array();
        for (const auto& nd : nodes_) {
            if (nd.is_leaf())
                splits.push_back({{"leaf", true},
                                  {"n", nd.n},
                                  {"p_left", nd.p_left()},
                                  {"label", to_string(nd.p_left() >= 0.5 ? Label::Left
                                                                         : Label::Stayed)}});
            else
                splits.push_back({{"leaf", false},
                                  {"variable", columns_[nd.feature]},
                                  {"threshold", nd.threshold},
                                  {"children", {nd.left, nd.right}},
                                  {"n", nd.n}});
        }
        return {{"family", "cart"},
                {"format_version", 1},
                {"cp", cp_},
                {"columns", columns_},
                {"nodes", splits}};
    }

    static void accumulate_importance(const std::vector<TreeNode>& nodes,
                                      std::vector<std::pair<std::string, double>>& raw) {
        for (const auto& nd : nodes)
            if (!nd.is_leaf()) raw[nd.feature].second += nd.improvement;
    }

private:
    std::vector<TreeNode> nodes_;
    std::vector<std::string> columns_;
    double cp_ = 0.01;
};

}  // namespace churnkit
