#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "churnkit/cart.hpp"
#include "churnkit/parallel.hpp"

namespace churnkit {

/// Random forest: n_trees fully grown Gini trees on bootstrap samples, each
/// split drawn from mtry uniformly sampled candidate features. Majority vote;
/// score = fraction of trees voting Left. Tree t draws all randomness from a
/// stream derived from (seed, t), so any thread count gives the same forest.
class RandomForestClassifier : public Classifier {
public:
    static std::unique_ptr<RandomForestClassifier> fit(const FeatureTable& train,
                                                       const ModelSpec& spec) {
        spec.validate();
        require(train.has_labels(), "rf: training table has no labels");
        const std::size_t n_trees = static_cast<std::size_t>(spec.get("n_trees", 500));
        const std::size_t mtry = static_cast<std::size_t>(
            spec.get("mtry", std::floor(std::sqrt(static_cast<double>(train.n_cols)))));
        require(mtry >= 1 && mtry <= train.n_cols, "rf: mtry must be in [1, feature count]");
        const bool bootstrap = spec.get("bootstrap", 1.0) != 0.0;

        auto model = std::make_unique<RandomForestClassifier>();
        model->set_fingerprint(train);
        model->columns_ = train.columns;
        model->seed_ = spec.seed;
        model->bootstrap_ = bootstrap;
        model->trees_.resize(n_trees);
        model->in_bag_counts_.resize(n_trees);

        const auto input = tree_detail::GrowInput::build(train);
        TreeGrowth base;
        base.min_split = static_cast<std::size_t>(spec.get("min_split", 2));
        base.min_leaf = static_cast<std::size_t>(spec.get("min_leaf", 1));

        const std::size_t n = train.n_rows;
        parallel_for(n_trees, [&](std::size_t t) {
            Rng rng(derive_seed(spec.seed, "rf.tree", t));
            std::vector<std::uint32_t> rows;
            std::vector<std::uint16_t> counts(n, 0);
            rows.reserve(n);
            if (bootstrap) {
                for (std::size_t i = 0; i < n; ++i) {
                    const auto r = static_cast<std::uint32_t>(rng.next_below(n));
                    rows.push_back(r);
                    counts[r]++;
                }
                std::sort(rows.begin(), rows.end());
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    rows.push_back(static_cast<std::uint32_t>(i));
                    counts[i] = 1;
                }
            }
            TreeGrowth params = base;
            params.mtry = mtry < train.n_cols ? mtry : 0;
            params.rng = &rng;
            model->trees_[t] = grow_tree(input, rows, params);
            model->in_bag_counts_[t] = std::move(counts);
        });

        // Kept for the out-of-bag importances.
        model->train_ = train;
        return model;
    }

    Family family() const override { return Family::rf; }

    std::vector<double> predict_scores(const FeatureTable& t) const override {
        check_fingerprint(t);
        std::vector<double> out(t.n_rows, 0.0);
        parallel_for(t.n_rows, [&](std::size_t r) {
            std::size_t votes_left = 0;
            for (const auto& tree : trees_)
                if (tree_score(tree, t.row(r)) >= 0.5) ++votes_left;
            out[r] = static_cast<double>(votes_left) / static_cast<double>(trees_.size());
        });
        return out;
    }

    /// Out-of-bag score per training row: the Left vote fraction among trees
    /// whose bootstrap sample missed that row. Rows seen by every tree fall
    /// back to the full vote (vanishingly rare at realistic tree counts).
    std::vector<double> oob_scores() const {
        require(bootstrap_, "rf: out-of-bag scores need bootstrap sampling");
        std::vector<double> out(train_.n_rows, 0.0);
        parallel_for(train_.n_rows, [&](std::size_t r) {
            std::size_t votes_left = 0, n_oob = 0;
            for (std::size_t t = 0; t < trees_.size(); ++t) {
                if (in_bag_counts_[t][r] != 0) continue;
                ++n_oob;
                if (tree_score(trees_[t], train_.row(r)) >= 0.5) ++votes_left;
            }
            if (n_oob == 0) {
                for (const auto& tree : trees_)
                    if (tree_score(tree, train_.row(r)) >= 0.5) ++votes_left;
                n_oob = trees_.size();
            }
            out[r] = static_cast<double>(votes_left) / static_cast<double>(n_oob);
        });
        return out;
    }

    /// Mean decrease in Gini: the grower's count-weighted impurity decreases,
    /// summed per variable and averaged over trees.
    ImportanceRanking importance_gini() const {
        std::vector<std::pair<std::string, double>> raw;
        for (const auto& name : columns_) raw.emplace_back(name, 0.0);
        for (const auto& tree : trees_) CartClassifier::accumulate_importance(tree, raw);
        for (auto& [name, v] : raw) v /= static_cast<double>(trees_.size());
        return ImportanceRanking::from_raw(std::move(raw));
    }

    /// Mean decrease in accuracy: per tree, out-of-bag accuracy minus the
    /// accuracy after permuting one variable's out-of-bag values.
    ImportanceRanking importance_accuracy() const {
        require(bootstrap_, "rf: out-of-bag importance needs bootstrap sampling");
        const std::size_t d = columns_.size();
        std::vector<std::vector<double>> per_tree(trees_.size());
        parallel_for(trees_.size(), [&](std::size_t t) {
            per_tree[t] = oob_permutation_drops(t);
        });
        std::vector<std::pair<std::string, double>> raw;
        std::size_t used = 0;
        for (const auto& v : per_tree)
            if (!v.empty()) ++used;
        require(used > 0, "rf: no tree has out-of-bag rows");
        for (std::size_t c = 0; c < d; ++c) {
            double sum = 0;
            for (const auto& v : per_tree)
                if (!v.empty()) sum += v[c];
            raw.emplace_back(columns_[c], sum / static_cast<double>(used));
        }
        return ImportanceRanking::from_raw(std::move(raw));
    }

    const std::vector<std::vector<TreeNode>>& trees() const { return trees_; }

    nlohmann::json to_json() const override {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& tree : trees_) {
            // Compact per-node tuples: leaf [n, n_left], split [f, thr, l, r].
            nlohmann::json tj = nlohmann::json::array();
            for (const auto& nd : tree) {
                if (nd.is_leaf()) tj.push_back({nd.n, nd.n_left});
                else tj.push_back({nd.feature, nd.threshold, nd.left, nd.right});
            }
            trees.push_back(std::move(tj));
        }
        return {{"family", "rf"},
                {"format_version", 1},
                {"columns", columns_},
                {"seed", seed_},
                {"bootstrap", bootstrap_},
                {"trees", std::move(trees)}};
    }

private:
    /// For one tree: accuracy drop on its OOB rows per permuted variable.
    /// Empty result when the tree has no OOB rows.
    std::vector<double> oob_permutation_drops(std::size_t t) const {
        const auto& counts = in_bag_counts_[t];
        std::vector<std::size_t> oob;
        for (std::size_t r = 0; r < counts.size(); ++r)
            if (counts[r] == 0) oob.push_back(r);
        if (oob.empty()) return {};
        const auto& tree = trees_[t];
        const std::size_t d = columns_.size();

        std::vector<double> x(d);
        std::size_t correct = 0;
        for (std::size_t r : oob) {
            const auto row = train_.row(r);
            const Label pred = tree_score(tree, row) >= 0.5 ? Label::Left : Label::Stayed;
            if (pred == train_.labels[r]) ++correct;
        }
        const double base_acc = static_cast<double>(correct) / static_cast<double>(oob.size());

        std::vector<double> drops(d, 0.0);
        for (std::size_t c = 0; c < d; ++c) {
            Rng rng(derive_seed(seed_, "rf.permute", t * d + c));
            std::vector<std::size_t> perm(oob.size());
            for (std::size_t i = 0; i < oob.size(); ++i) perm[i] = i;
            rng.shuffle(perm);
            std::size_t correct_perm = 0;
            for (std::size_t i = 0; i < oob.size(); ++i) {
                const auto row = train_.row(oob[i]);
                for (std::size_t cc = 0; cc < d; ++cc) x[cc] = row[cc];
                x[c] = train_.at(oob[perm[i]], c);
                const Label pred =
                    tree_score(tree, std::span<const double>(x)) >= 0.5 ? Label::Left
                                                                        : Label::Stayed;
                if (pred == train_.labels[oob[i]]) ++correct_perm;
            }
            drops[c] = base_acc - static_cast<double>(correct_perm) /
                                      static_cast<double>(oob.size());
        }
        return drops;
    }

    std::vector<std::vector<TreeNode>> trees_;
    std::vector<std::vector<std::uint16_t>> in_bag_counts_;
    std::vector<std::string> columns_;
    FeatureTable train_;
    std::uint64_t seed_ = 0;
    bool bootstrap_ = true;
};

}  // namespace churnkit
