#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "churnkit/feature_table.hpp"
#include "churnkit/rng.hpp"

namespace churnkit {

enum class ResampleKind { under, smote };

/// Applied to training partitions only; both kinds target equal class counts.
struct ResamplePlan {
    ResampleKind kind = ResampleKind::smote;
    std::size_t k_neighbors = 5;  // smote only
    std::uint64_t seed = 0;
};

namespace detail {

inline void class_partition(const FeatureTable& t, std::vector<std::size_t>& minority,
                            std::vector<std::size_t>& majority) {
    require(t.has_labels(), "resampling: table has no labels");
    std::vector<std::size_t> stayed, left;
    for (std::size_t r = 0; r < t.n_rows; ++r)
        (t.labels[r] == Label::Left ? left : stayed).push_back(r);
    if (left.size() <= stayed.size()) {
        minority = std::move(left);
        majority = std::move(stayed);
    } else {
        minority = std::move(stayed);
        majority = std::move(left);
    }
}

}  // namespace detail

/// Keeps every minority row; retains a uniform random subset of majority
/// rows of the same size. Output preserves original row order.
inline FeatureTable undersample(const FeatureTable& train, const ResamplePlan& plan) {
    std::vector<std::size_t> minority, majority;
    detail::class_partition(train, minority, majority);
    require(!minority.empty(), "undersample: minority class is empty");

    Rng rng(derive_seed(plan.seed, "under.majority"));
    const auto pick = rng.sample_without_replacement(majority.size(), minority.size());
    std::vector<std::size_t> keep = minority;
    for (std::size_t i : pick) keep.push_back(majority[i]);
    std::sort(keep.begin(), keep.end());
    return train.take_rows(keep);
}

/// SMOTE: synthesizes minority rows until the classes balance. Each synthetic
/// row interpolates a minority seed toward one of its k nearest minority
/// neighbors (x + u * (nn - x), u ~ U(0,1)); binary coordinates snap to the
/// nearer of {0,1} afterwards. Majority rows pass through untouched.
inline FeatureTable smote(const FeatureTable& train, const ResamplePlan& plan) {
    std::vector<std::size_t> minority, majority;
    detail::class_partition(train, minority, majority);
    require(minority.size() > plan.k_neighbors,
            "smote: minority class must exceed k_neighbors");
    const std::size_t need = majority.size() - minority.size();
    if (need == 0) return train;

    const Label minority_label = train.labels[minority[0]];
    const std::size_t d = train.n_cols;

    // k nearest minority neighbors of each minority row (excluding itself),
    // ties by lower row index.
    const std::size_t k = plan.k_neighbors;
    std::vector<std::vector<std::size_t>> neighbors(minority.size());
    for (std::size_t a = 0; a < minority.size(); ++a) {
        std::vector<std::pair<double, std::size_t>> dists;
        dists.reserve(minority.size() - 1);
        const auto xa = train.row(minority[a]);
        for (std::size_t b = 0; b < minority.size(); ++b) {
            if (b == a) continue;
            const auto xb = train.row(minority[b]);
            double dist = 0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = xa[c] - xb[c];
                dist += diff * diff;
            }
            dists.emplace_back(dist, minority[b]);
        }
        std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(k),
                          dists.end());
        neighbors[a].reserve(k);
        for (std::size_t i = 0; i < k; ++i) neighbors[a].push_back(dists[i].second);
    }

    FeatureTable out = train;
    out.data.reserve((train.n_rows + need) * d);
    out.labels.reserve(train.n_rows + need);
    Rng rng(derive_seed(plan.seed, "smote.synthesis"));
    for (std::size_t t = 0; t < need; ++t) {
        const std::size_t a = t % minority.size();  // round-robin over seeds
        const std::size_t nn = neighbors[a][rng.next_below(k)];
        const double u = rng.next_double();
        const auto xa = train.row(minority[a]);
        const auto xb = train.row(nn);
        for (std::size_t c = 0; c < d; ++c) {
            double v = xa[c] + u * (xb[c] - xa[c]);
            if (train.binary[c]) v = v < 0.5 ? 0.0 : 1.0;
            out.data.push_back(v);
        }
        out.labels.push_back(minority_label);
        out.n_rows++;
    }
    return out;
}

inline FeatureTable resample(const FeatureTable& train, const ResamplePlan& plan) {
    return plan.kind == ResampleKind::under ? undersample(train, plan) : smote(train, plan);
}

}  // namespace churnkit
