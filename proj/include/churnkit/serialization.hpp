#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "churnkit/ann.hpp"
#include "churnkit/cart.hpp"
#include "churnkit/preprocess.hpp"

namespace churnkit {

namespace serial_detail {

inline std::vector<TreeNode> tree_from_compact(const nlohmann::json& tj) {
    std::vector<TreeNode> nodes;
    nodes.reserve(tj.size());
    for (const auto& nj : tj) {
        TreeNode nd;
        if (nj.size() == 2) {  // leaf: [n, n_left]
            nd.n = nj[0].get<std::uint32_t>();
            nd.n_left = nj[1].get<std::uint32_t>();
        } else {  // split: [feature, threshold, left, right]
            nd.feature = nj[0].get<int>();
            nd.threshold = nj[1].get<double>();
            nd.left = nj[2].get<int>();
            nd.right = nj[3].get<int>();
        }
        nodes.push_back(nd);
    }
    return nodes;
}

inline std::vector<TreeNode> tree_from_verbose(const nlohmann::json& nodes_json,
                                               const std::vector<std::string>& columns) {
    std::vector<TreeNode> nodes;
    for (const auto& nj : nodes_json) {
        TreeNode nd;
        if (!nj.at("leaf").get<bool>()) {
            const std::string var = nj.at("variable");
            nd.feature = -1;
            for (std::size_t c = 0; c < columns.size(); ++c)
                if (columns[c] == var) nd.feature = static_cast<int>(c);
            require(nd.feature >= 0, "model dump references unknown column " + var);
            nd.threshold = nj.at("threshold");
            nd.left = nj.at("children")[0];
            nd.right = nj.at("children")[1];
            nd.n = nj.at("n").get<std::uint32_t>();
        } else {
            nd.n = nj.at("n").get<std::uint32_t>();
            const double p = nj.at("p_left");
            nd.n_left = static_cast<std::uint32_t>(std::llround(p * nd.n));
        }
        nodes.push_back(nd);
    }
    return nodes;
}

}  // namespace serial_detail

/// A pipeline reconstructed from its JSON dump: preprocessing specs plus a
/// family-specific scoring closure.
class LoadedPipeline {
public:
    static LoadedPipeline from_json(const nlohmann::json& pj) {
        LoadedPipeline lp;
        require(pj.value("format_version", 0) == 1, "unsupported pipeline format_version");
        if (pj.contains("preprocessing")) {
            const auto& prep = pj.at("preprocessing");
            if (prep.contains("power_transform"))
                lp.power_ = power_transform_from_json(prep.at("power_transform"));
            if (prep.contains("scaler")) lp.scaler_ = scaler_from_json(prep.at("scaler"));
        }
        const nlohmann::json mj = pj.at("model");
        const std::string family = mj.at("family");

        if (family == "gnb") {
            const auto mean_s = mj.at("mean_stayed").get<std::vector<double>>();
            const auto mean_l = mj.at("mean_left").get<std::vector<double>>();
            const auto sd_s = mj.at("sd_stayed").get<std::vector<double>>();
            const auto sd_l = mj.at("sd_left").get<std::vector<double>>();
            const double prior_s = mj.at("log_prior_stayed");
            const double prior_l = mj.at("log_prior_left");
            lp.score_fn_ = [=](const FeatureTable& t) {
                std::vector<double> out(t.n_rows);
                for (std::size_t r = 0; r < t.n_rows; ++r) {
                    double ls = prior_s, ll = prior_l;
                    for (std::size_t c = 0; c < t.n_cols; ++c) {
                        const double zs = (t.at(r, c) - mean_s[c]) / sd_s[c];
                        const double zl = (t.at(r, c) - mean_l[c]) / sd_l[c];
                        ls += -0.5 * zs * zs - std::log(sd_s[c]);
                        ll += -0.5 * zl * zl - std::log(sd_l[c]);
                    }
                    out[r] = 1.0 / (1.0 + std::exp(ls - ll));
                }
                return out;
            };
        } else if (family == "knn") {
            const auto data = mj.at("data").get<std::vector<double>>();
            const auto labels = mj.at("labels").get<std::vector<int>>();
            const std::size_t k = mj.at("k");
            const std::size_t n = mj.at("n_rows");
            const std::size_t d = labels.empty() ? 0 : data.size() / labels.size();
            lp.score_fn_ = [=](const FeatureTable& t) {
                std::vector<double> out(t.n_rows);
                for (std::size_t q = 0; q < t.n_rows; ++q) {
                    std::vector<std::pair<double, std::size_t>> dist(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        double s = 0;
                        for (std::size_t c = 0; c < d; ++c) {
                            const double diff = data[i * d + c] - t.at(q, c);
                            s += diff * diff;
                        }
                        dist[i] = {s, i};
                    }
                    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                                      dist.end());
                    std::size_t left = 0;
                    for (std::size_t i = 0; i < k; ++i) left += labels[dist[i].second];
                    out[q] = static_cast<double>(left) / static_cast<double>(k);
                }
                return out;
            };
        } else if (family == "svm") {
            const auto coef = mj.at("sv_coef").get<std::vector<double>>();
            const auto sv = mj.at("support_vectors").get<std::vector<double>>();
            const std::size_t d = mj.at("dim");
            const double gamma = mj.at("gamma");
            const double rho = mj.at("rho");
            lp.score_fn_ = [=](const FeatureTable& t) {
                std::vector<double> out(t.n_rows);
                for (std::size_t r = 0; r < t.n_rows; ++r) {
                    double sum = -rho;
                    for (std::size_t s = 0; s < coef.size(); ++s) {
                        double dist = 0;
                        for (std::size_t c = 0; c < d; ++c) {
                            const double diff = sv[s * d + c] - t.at(r, c);
                            dist += diff * diff;
                        }
                        sum += coef[s] * std::exp(-gamma * dist);
                    }
                    out[r] = 1.0 / (1.0 + std::exp(-sum));
                }
                return out;
            };
        } else if (family == "cart") {
            const auto columns = mj.at("columns").get<std::vector<std::string>>();
            const auto nodes = serial_detail::tree_from_verbose(mj.at("nodes"), columns);
            lp.score_fn_ = [=](const FeatureTable& t) {
                std::vector<double> out(t.n_rows);
                for (std::size_t r = 0; r < t.n_rows; ++r) out[r] = tree_score(nodes, t.row(r));
                return out;
            };
        } else if (family == "rf") {
            std::vector<std::vector<TreeNode>> trees;
            for (const auto& tj : mj.at("trees"))
                trees.push_back(serial_detail::tree_from_compact(tj));
            lp.score_fn_ = [trees = std::move(trees)](const FeatureTable& t) {
                std::vector<double> out(t.n_rows);
                for (std::size_t r = 0; r < t.n_rows; ++r) {
                    std::size_t votes = 0;
                    for (const auto& tree : trees)
                        if (tree_score(tree, t.row(r)) >= 0.5) ++votes;
                    out[r] = static_cast<double>(votes) / static_cast<double>(trees.size());
                }
                return out;
            };
        } else if (family == "ann") {
            const auto layers = mj.at("layers").get<std::vector<std::size_t>>();
            const auto weights = mj.at("weights").get<std::vector<double>>();
            require(layers.size() == 3 && layers[2] == 1, "ann dump: unexpected layer shape");
            const std::size_t d = layers[0], h = layers[1];
            require(weights.size() == AnnClassifier::n_params(d, h),
                    "ann dump: weight count mismatch");
            lp.score_fn_ = [=](const FeatureTable& t) {
                std::vector<double> out(t.n_rows);
                std::vector<double> z(h);
                const double* out_w = weights.data() + h * (d + 1);
                for (std::size_t r = 0; r < t.n_rows; ++r) {
                    for (std::size_t u = 0; u < h; ++u) {
                        const double* w = weights.data() + u * (d + 1);
                        double a = w[d];
                        for (std::size_t c = 0; c < d; ++c) a += w[c] * t.at(r, c);
                        z[u] = 1.0 / (1.0 + std::exp(-a));
                    }
                    double ao = out_w[h];
                    for (std::size_t u = 0; u < h; ++u) ao += out_w[u] * z[u];
                    out[r] = 1.0 / (1.0 + std::exp(-ao));
                }
                return out;
            };
        } else {
            fail("unknown family in model dump: " + family);
        }
        return lp;
    }

    std::vector<double> predict_scores(const FeatureTable& raw_table) const {
        FeatureTable t = raw_table;
        if (power_) t = apply_power_transform(*power_, t);
        if (scaler_) t = apply_scaler(*scaler_, t);
        return score_fn_(t);
    }

private:
    std::optional<PowerTransformSpec> power_;
    std::optional<ScalerSpec> scaler_;
    std::function<std::vector<double>(const FeatureTable&)> score_fn_;
};

}  // namespace churnkit
