#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "churnkit/dataset.hpp"

namespace churnkit {

/// Binary confusion counts with Left as the positive class.
struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionMatrix confusion(const std::vector<Label>& truth,
                                 const std::vector<Label>& predicted) {
    require(truth.size() == predicted.size(), "confusion: label vectors differ in length");
    require(!truth.empty(), "confusion: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool pos_true = truth[i] == Label::Left;
        const bool pos_pred = predicted[i] == Label::Left;
        if (pos_true && pos_pred) cm.tp++;
        else if (!pos_true && pos_pred) cm.fp++;
        else if (!pos_true && !pos_pred) cm.tn++;
        else cm.fn++;
    }
    return cm;
}

/// Undefined ratios stay absent rather than collapsing to 0, so report cells
/// remain auditable.
struct MetricSet {
    std::optional<double> accuracy, kappa, precision, recall, sensitivity, specificity, f1;
    std::optional<double> roc_auc;
};

inline MetricSet metric_set(const ConfusionMatrix& cm) {
    require(cm.total() > 0, "metric_set: empty confusion matrix");
    MetricSet m;
    const double N = static_cast<double>(cm.total());
    const double tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
    const double tn = static_cast<double>(cm.tn), fn = static_cast<double>(cm.fn);

    m.accuracy = (tp + tn) / N;
    if (cm.tp + cm.fp > 0) m.precision = tp / (tp + fp);
    if (cm.tp + cm.fn > 0) {
        m.recall = tp / (tp + fn);
        m.sensitivity = m.recall;
    }
    if (cm.tn + cm.fp > 0) m.specificity = tn / (tn + fp);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);

    // kappa = (p_o - p_e) / (1 - p_e); the p_e == 1 case is detected in exact
    // integer arithmetic (both margins degenerate) and reported as absent.
    const std::uint64_t n = cm.total();
    const std::uint64_t pe_num = (cm.tp + cm.fp) * (cm.tp + cm.fn) + (cm.fn + cm.tn) * (cm.fp + cm.tn);
    if (pe_num != n * n) {
        const double po = (tp + tn) / N;
        const double pe = static_cast<double>(pe_num) / (N * N);
        m.kappa = (po - pe) / (1.0 - pe);
    }
    return m;
}

/// Mann-Whitney form: the probability that a random positive outscores a
/// random negative, ties counted one half. Computed from average ranks.
inline double roc_auc(const std::vector<double>& scores, const std::vector<Label>& truth) {
    require(scores.size() == truth.size(), "roc_auc: length mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (Label l : truth) (l == Label::Left ? n_pos : n_neg)++;
    require(n_pos > 0 && n_neg > 0, "roc_auc: need at least one positive and one negative");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k)
            if (truth[order[k]] == Label::Left) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

inline nlohmann::json to_json(const MetricSet& m) {
    nlohmann::json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
        else j[key] = nullptr;
    };
    put("accuracy", m.accuracy);
    put("kappa", m.kappa);
    put("precision", m.precision);
    put("recall", m.recall);
    put("sensitivity", m.sensitivity);
    put("specificity", m.specificity);
    put("f1", m.f1);
    put("roc_auc", m.roc_auc);
    return j;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
    return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

}  // namespace churnkit
