#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "churnkit/model.hpp"
#include "churnkit/parallel.hpp"

namespace churnkit {

/// k nearest neighbors, Euclidean distance, lazy learner: fit just stores the
/// training table. Score = fraction of Left among the k nearest; ties on
/// distance break toward the lowest training row index.
class KnnClassifier : public Classifier {
public:
    static std::unique_ptr<KnnClassifier> fit(const FeatureTable& train, const ModelSpec& spec) {
        spec.validate();
        require(train.has_labels(), "knn: training table has no labels");
        const std::size_t k = static_cast<std::size_t>(spec.get("k", 9));
        require(k >= 1, "knn: k must be positive");
        require(k <= train.n_rows, "knn: k exceeds the number of training rows");
        auto model = std::make_unique<KnnClassifier>();
        model->set_fingerprint(train);
        model->train_ = train;
        model->k_ = k;
        return model;
    }

    Family family() const override { return Family::knn; }

    std::vector<double> predict_scores(const FeatureTable& t) const override {
        check_fingerprint(t);
        std::vector<double> out(t.n_rows);
        parallel_for(t.n_rows, [&](std::size_t q) { out[q] = score_one(t.row(q)); });
        return out;
    }

    nlohmann::json to_json() const override {
        // The "parameters" of a lazy learner are the training data itself.
        nlohmann::json j = {{"family", "knn"},
                            {"format_version", 1},
                            {"k", k_},
                            {"columns", train_.columns},
                            {"n_rows", train_.n_rows}};
        j["data"] = train_.data;
        nlohmann::json labels = nlohmann::json::array();
        for (Label l : train_.labels) labels.push_back(l == Label::Left ? 1 : 0);
        j["labels"] = labels;
        return j;
    }

private:
    double score_one(std::span<const double> query) const {
        const std::size_t n = train_.n_rows, d = train_.n_cols;
        // (squared distance, training index); index order settles ties.
        std::vector<std::pair<double, std::size_t>> heap;  // max-heap of the best k
        heap.reserve(k_ + 1);
        auto worse = [](const std::pair<double, std::size_t>& a,
                        const std::pair<double, std::size_t>& b) {
            if (a.first != b.first) return a.first < b.first;
            return a.second < b.second;
        };
        const double* base = train_.data.data();
        for (std::size_t i = 0; i < n; ++i) {
            const double* rowp = base + i * d;
            double dist = 0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = rowp[c] - query[c];
                dist += diff * diff;
            }
            if (heap.size() < k_) {
                heap.emplace_back(dist, i);
                std::push_heap(heap.begin(), heap.end(), worse);
            } else if (worse({dist, i}, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), worse);
                heap.back() = {dist, i};
                std::push_heap(heap.begin(), heap.end(), worse);
            }
        }
        std::size_t left = 0;
        for (const auto& [dist, idx] : heap)
            if (train_.labels[idx] == Label::Left) ++left;
        return static_cast<double>(left) / static_cast<double>(k_);
    }

    FeatureTable train_;
    std::size_t k_ = 9;
};

}  // namespace churnkit
