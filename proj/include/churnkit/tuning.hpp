#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "churnkit/metrics.hpp"
#include "churnkit/parallel.hpp"
#include "churnkit/pipeline.hpp"

namespace churnkit {

/// Repeated stratified k-fold: every row lands in exactly one validation
/// fold per repeat.
struct CvSpec {
    std::size_t folds = 10;
    std::size_t repeats = 3;
    bool stratified = true;
    std::uint64_t seed = 0;
};

namespace detail {

/// Fold id per row for one repeat. Per-class remainders rotate across folds
/// so overall fold sizes differ by at most one.
inline std::vector<std::size_t> fold_assignment(const std::vector<Label>& labels,
                                                std::size_t folds, bool stratified,
                                                std::uint64_t seed) {
    const std::size_t n = labels.size();
    std::vector<std::vector<std::size_t>> groups;
    if (stratified) {
        std::vector<std::size_t> stayed, left;
        for (std::size_t i = 0; i < n; ++i)
            (labels[i] == Label::Left ? left : stayed).push_back(i);
        groups.push_back(std::move(stayed));
        groups.push_back(std::move(left));
    } else {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        groups.push_back(std::move(all));
    }

    std::vector<std::size_t> fold_of(n, 0);
    std::size_t cursor = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto& rows = groups[g];
        require(rows.size() >= folds,
                "cv: class with " + std::to_string(rows.size()) + " rows cannot stratify into " +
                    std::to_string(folds) + " folds");
        Rng rng(derive_seed(seed, "cv.fold.group", g));
        rng.shuffle(rows);
        const std::size_t base = rows.size() / folds;
        const std::size_t rem = rows.size() % folds;
        std::size_t pos = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            std::size_t quota = base;
            // folds [cursor, cursor+rem) mod folds take one extra row
            const std::size_t rel = (f + folds - cursor % folds) % folds;
            if (rel < rem) quota += 1;
            for (std::size_t q = 0; q < quota; ++q) fold_of[rows[pos++]] = f;
        }
        cursor += rem;
    }
    return fold_of;
}

}  // namespace detail

struct FoldScore {
    std::size_t repeat = 0, fold = 0;
    double accuracy = 0;
    double kappa = 0;
};

struct CvResult {
    std::vector<FoldScore> scores;  // canonical (repeat, fold) order

    double mean_accuracy() const { return mean([](const FoldScore& s) { return s.accuracy; }); }
    double sd_accuracy() const { return sd([](const FoldScore& s) { return s.accuracy; }); }
    double mean_kappa() const { return mean([](const FoldScore& s) { return s.kappa; }); }
    double sd_kappa() const { return sd([](const FoldScore& s) { return s.kappa; }); }

private:
    template <typename F>
    double mean(F f) const {
        double s = 0;
        for (const auto& sc : scores) s += f(sc);
        return s / static_cast<double>(scores.size());
    }
    template <typename F>
    double sd(F f) const {
        if (scores.size() < 2) return 0;
        const double m = mean(f);
        double s = 0;
        for (const auto& sc : scores) s += (f(sc) - m) * (f(sc) - m);
        return std::sqrt(s / static_cast<double>(scores.size() - 1));
    }
};

/// folds x repeats scores; all preprocessing is fitted inside each training
/// fold (the pipeline owns it), so no statistic leaks from validation rows.
inline CvResult cv_evaluate(const ModelSpec& spec, const FeatureTable& train, const CvSpec& cv) {
    require(cv.folds >= 2, "cv: need at least 2 folds");
    require(train.has_labels(), "cv: training table has no labels");

    std::vector<std::vector<std::size_t>> fold_of(cv.repeats);
    for (std::size_t rep = 0; rep < cv.repeats; ++rep)
        fold_of[rep] = detail::fold_assignment(train.labels, cv.folds, cv.stratified,
                                               derive_seed(cv.seed, "cv.repeat", rep));

    const std::size_t tasks = cv.repeats * cv.folds;
    CvResult result;
    result.scores.resize(tasks);
    parallel_for(tasks, [&](std::size_t task) {
        const std::size_t rep = task / cv.folds;
        const std::size_t fold = task % cv.folds;
        std::vector<std::size_t> tr, va;
        for (std::size_t r = 0; r < train.n_rows; ++r)
            (fold_of[rep][r] == fold ? va : tr).push_back(r);
        const FeatureTable fit_part = train.take_rows(tr);
        const FeatureTable val_part = train.take_rows(va);
        ModelSpec fold_spec = spec;
        fold_spec.seed = derive_seed(spec.seed, "cv.fit", task);
        const Pipeline p = Pipeline::fit(fold_spec, fit_part);
        const MetricSet m = metric_set(confusion(val_part.labels, p.predict_labels(val_part)));
        FoldScore fs;
        fs.repeat = rep;
        fs.fold = fold;
        fs.accuracy = m.accuracy.value();
        fs.kappa = m.kappa.value_or(0.0);
        result.scores[task] = fs;
    });
    return result;
}

// ---------------------------------------------------------------------------
// Grid search

using Grid = std::map<std::string, std::vector<double>>;

struct GridCell {
    ModelSpec spec;
    std::optional<CvResult> result;  // absent when the fit failed
    std::string error;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::size_t best_index = 0;
    Pipeline best_model;

    const ModelSpec& best_spec() const { return cells[best_index].spec; }
    const CvResult& best_result() const { return *cells[best_index].result; }
};

namespace detail {

/// Ties on mean accuracy go to the simplest model: lower k, fewer hidden
/// units then higher decay, lower mtry, larger cp; then lexicographic over
/// the remaining grid values.
inline std::vector<double> complexity_key(const ModelSpec& spec, const Grid& grid) {
    std::vector<double> key;
    switch (spec.family) {
        case Family::knn: key.push_back(spec.get("k", 0)); break;
        case Family::ann:
            key.push_back(spec.get("size", 0));
            key.push_back(-spec.get("decay", 0));
            break;
        case Family::rf: key.push_back(spec.get("mtry", 0)); break;
        case Family::cart: key.push_back(-spec.get("cp", 0)); break;
        default: break;
    }
    for (const auto& [name, values] : grid) key.push_back(spec.get(name, 0));
    return key;
}

}  // namespace detail

/// Evaluates every grid cell over identical fold partitions (paired
/// comparison), then refits the winning cell on all training rows. A failing
/// cell is recorded rather than fatal, unless every cell fails.
inline GridResult grid_search(const ModelSpec& base, const Grid& grid, const FeatureTable& train,
                              const CvSpec& cv) {
    require(!grid.empty(), "grid_search: empty grid");
    for (const auto& [name, values] : grid)
        require(!values.empty(), "grid_search: no values for parameter " + name);

    // Cartesian product, deterministic order (names sorted by map, values as given).
    std::vector<ModelSpec> specs{base};
    for (const auto& [name, values] : grid) {
        std::vector<ModelSpec> expanded;
        expanded.reserve(specs.size() * values.size());
        for (const auto& s : specs)
            for (double v : values) expanded.push_back(s.with(name, v));
        specs = std::move(expanded);
    }

    GridResult gr;
    gr.cells.resize(specs.size());
    for (std::size_t c = 0; c < specs.size(); ++c) {
        GridCell& cell = gr.cells[c];
        cell.spec = specs[c];
        try {
            cell.result = cv_evaluate(cell.spec, train, cv);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    }

    std::ptrdiff_t best = -1;
    for (std::size_t c = 0; c < gr.cells.size(); ++c) {
        if (!gr.cells[c].result) continue;
        if (best < 0) {
            best = static_cast<std::ptrdiff_t>(c);
            continue;
        }
        const double acc = gr.cells[c].result->mean_accuracy();
        const double best_acc = gr.cells[best].result->mean_accuracy();
        if (acc > best_acc ||
            (acc == best_acc && detail::complexity_key(gr.cells[c].spec, grid) <
                                    detail::complexity_key(gr.cells[best].spec, grid)))
            best = static_cast<std::ptrdiff_t>(c);
    }
    if (best < 0) fail("grid_search: every cell failed; first error: " + gr.cells[0].error);
    gr.best_index = static_cast<std::size_t>(best);
    gr.best_model = Pipeline::fit(gr.cells[best].spec, train);
    return gr;
}

/// Rank of a (name, value) assignment among cells ordered by mean accuracy;
/// 0 = best. Used to check "within top-2 cells" style expectations.
inline std::size_t grid_rank_of(const GridResult& gr,
                                const std::map<std::string, double>& assignment) {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t c = 0; c < gr.cells.size(); ++c)
        if (gr.cells[c].result)
            order.emplace_back(-gr.cells[c].result->mean_accuracy(), c);
    std::sort(order.begin(), order.end());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const auto& spec = gr.cells[order[pos].second].spec;
        bool match = true;
        for (const auto& [name, value] : assignment)
            if (spec.get(name, std::numeric_limits<double>::quiet_NaN()) != value) match = false;
        if (match) return pos;
    }
    fail("grid_rank_of: assignment not present in the grid");
}

}  // namespace churnkit
