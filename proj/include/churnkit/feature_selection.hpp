#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "churnkit/tuning.hpp"

namespace churnkit {

struct EmbeddedRankings {
    ImportanceRanking cart;     // impurity decrease of the pruned tree
    ImportanceRanking rf_mda;   // forest, mean decrease in accuracy (OOB permutation)
    ImportanceRanking rf_mdg;   // forest, mean decrease in Gini
};

/// Rankings from the tree models fitted with the given (tuned) specs.
inline EmbeddedRankings embedded_rankings(const FeatureTable& train, const ModelSpec& cart_spec,
                                          const ModelSpec& rf_spec) {
    EmbeddedRankings out;
    const auto tree = CartClassifier::fit(train, cart_spec);
    out.cart = tree->importance();
    const auto forest = RandomForestClassifier::fit(train, rf_spec);
    out.rf_mda = forest->importance_accuracy();
    out.rf_mdg = forest->importance_gini();
    return out;
}

// ---------------------------------------------------------------------------
// Recursive feature elimination

struct RfeResult {
    std::vector<std::size_t> sizes;     // evaluated subset sizes, ascending
    std::vector<double> cv_accuracy;    // per size, mean over resamples
    std::vector<double> cv_kappa;
    std::vector<std::vector<double>> per_resample_accuracy;  // [size][resample], the audit trail
    std::size_t chosen_size = 0;
    std::vector<std::string> chosen_variables;
};

namespace detail {

/// One elimination pass: fit a forest on the given columns, walk the size
/// ladder downward, score each subset on the validation rows (if any), and
/// re-rank within every step.
struct RfePass {
    std::vector<double> accuracy;  // per evaluated size (ascending order)
    std::vector<double> kappa;
    std::vector<std::string> final_subset;
};

inline RfePass rfe_pass(const FeatureTable& fit_part, const FeatureTable* val_part,
                        const std::vector<std::size_t>& sizes_desc, std::size_t stop_size,
                        const ModelSpec& rf_base, std::uint64_t pass_seed) {
    RfePass pass;
    pass.accuracy.assign(sizes_desc.size(), 0.0);
    pass.kappa.assign(sizes_desc.size(), 0.0);
    std::vector<std::string> current = fit_part.columns;

    for (std::size_t si = 0; si < sizes_desc.size(); ++si) {
        const std::size_t size = sizes_desc[si];
        if (size > current.size()) continue;

        // Trim to this size using the most recent ranking.
        // (current is already ranked descending after the previous fit.)
        current.resize(size);
        std::sort(current.begin(), current.end());  // stable column order for the fit

        const FeatureTable sub_fit = fit_part.select_columns(current);
        ModelSpec spec = rf_base;
        spec.seed = derive_seed(pass_seed, "rfe.fit", size);
        if (spec.hyper.find("mtry") == spec.hyper.end())
            spec.hyper["mtry"] = std::max(1.0, std::floor(std::sqrt(static_cast<double>(size))));
        const auto forest = RandomForestClassifier::fit(sub_fit, spec);

        if (val_part != nullptr) {
            const FeatureTable sub_val = val_part->select_columns(current);
            const MetricSet m =
                metric_set(confusion(sub_val.labels, forest->predict_labels(sub_val)));
            pass.accuracy[si] = m.accuracy.value();
            pass.kappa[si] = m.kappa.value_or(0.0);
        }

        // Re-rank within the resample for the next elimination step.
        const ImportanceRanking ranking = forest->importance_gini();
        current.clear();
        for (const auto& [name, score] : ranking.entries) current.push_back(name);
        if (size == stop_size) {
            pass.final_subset.assign(current.begin(), current.begin() + size);
            std::sort(pass.final_subset.begin(), pass.final_subset.end());
        }
    }
    return pass;
}

}  // namespace detail

/// Backwards elimination wrapped in cross-validation: every candidate size is
/// scored by held-out accuracy with rankings recomputed inside each resample.
/// The full feature count is always evaluated as the reference size.
inline RfeResult rfe(const FeatureTable& train, std::vector<std::size_t> sizes, const CvSpec& cv,
                     const ModelSpec& rf_base) {
    require(!sizes.empty(), "rfe: empty size list");
    const std::size_t d = train.n_cols;
    for (std::size_t s : sizes)
        require(s >= 1 && s <= d, "rfe: size " + std::to_string(s) + " outside [1, " +
                                      std::to_string(d) + "]");
    sizes.push_back(d);
    std::sort(sizes.begin(), sizes.end());
    sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
    std::vector<std::size_t> sizes_desc(sizes.rbegin(), sizes.rend());

    std::vector<std::vector<std::size_t>> fold_of(cv.repeats);
    for (std::size_t rep = 0; rep < cv.repeats; ++rep)
        fold_of[rep] = detail::fold_assignment(train.labels, cv.folds, cv.stratified,
                                               derive_seed(cv.seed, "rfe.repeat", rep));

    const std::size_t tasks = cv.repeats * cv.folds;
    std::vector<detail::RfePass> passes(tasks);
    parallel_for(tasks, [&](std::size_t task) {
        const std::size_t rep = task / cv.folds;
        const std::size_t fold = task % cv.folds;
        std::vector<std::size_t> tr, va;
        for (std::size_t r = 0; r < train.n_rows; ++r)
            (fold_of[rep][r] == fold ? va : tr).push_back(r);
        const FeatureTable fit_part = train.take_rows(tr);
        const FeatureTable val_part = train.take_rows(va);
        passes[task] = detail::rfe_pass(fit_part, &val_part, sizes_desc, 0, rf_base,
                                        derive_seed(cv.seed, "rfe.pass", task));
    });

    RfeResult out;
    out.sizes = sizes;
    out.cv_accuracy.assign(sizes.size(), 0.0);
    out.cv_kappa.assign(sizes.size(), 0.0);
    out.per_resample_accuracy.assign(sizes.size(), {});
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const std::size_t di = sizes_desc.size() - 1 - si;  // map ascending -> descending
        for (const auto& pass : passes) {
            out.per_resample_accuracy[si].push_back(pass.accuracy[di]);
            out.cv_accuracy[si] += pass.accuracy[di] / static_cast<double>(tasks);
            out.cv_kappa[si] += pass.kappa[di] / static_cast<double>(tasks);
        }
    }

    std::size_t best = 0;
    for (std::size_t si = 1; si < sizes.size(); ++si)
        if (out.cv_accuracy[si] > out.cv_accuracy[best]) best = si;
    out.chosen_size = sizes[best];

    // Final subset: eliminate on the full training table down to the chosen size.
    const auto final_pass = detail::rfe_pass(train, nullptr, sizes_desc, out.chosen_size,
                                             rf_base, derive_seed(cv.seed, "rfe.final"));
    out.chosen_variables = final_pass.final_subset;
    return out;
}

/// The study's hand-picked subset (the top five shared by the tree rankings).
/// Geography expands to its two dummies downstream.
inline std::vector<std::string> top5_subset() {
    return {"Age", "NumOfProducts", "IsActiveMember", "Balance", "Geography"};
}

/// Expands raw predictor names to model columns using the encoder.
inline std::vector<std::string> expand_to_model_columns(const std::vector<std::string>& predictors,
                                                        const EncoderSpec& encoder) {
    std::vector<std::string> out;
    for (const auto& name : predictors) {
        if (const auto* enc = encoder.find(name)) {
            for (const auto& level : enc->dummy_levels) out.push_back(name + level);
        } else {
            out.push_back(name);
        }
    }
    return out;
}

}  // namespace churnkit
