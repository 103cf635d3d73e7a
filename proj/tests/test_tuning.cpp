#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "churnkit/tuning.hpp"
#include "support/synthetic.hpp"

using namespace churnkit;

namespace {

const Label S = Label::Stayed, L = Label::Left;

FeatureTable labeled_table(const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& rows,
                           const std::vector<Label>& labels) {
    FeatureTable t;
    t.columns = names;
    t.binary.assign(names.size(), 0);
    t.n_cols = names.size();
    t.n_rows = rows.size();
    for (const auto& r : rows) t.data.insert(t.data.end(), r.begin(), r.end());
    t.labels = labels;
    return t;
}

/// Classes fully separated by the first coordinate.
FeatureTable separable_task(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    std::vector<Label> labels;
    for (std::size_t i = 0; i < n; ++i) {
        const bool left = rng.next_double() < 0.35;
        rows.push_back({(left ? 5.0 : -5.0) + rng.normal(), rng.normal()});
        labels.push_back(left ? L : S);
    }
    return labeled_table({"x", "y"}, rows, labels);
}

CvSpec cv(std::size_t folds, std::size_t repeats, std::uint64_t seed) {
    CvSpec c;
    c.folds = folds;
    c.repeats = repeats;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("fold assignment: partition per repeat, sizes differ by at most one") {
    const FeatureTable t = separable_task(237, 3);
    for (std::size_t folds : {3u, 5u, 10u}) {
        const auto fold_of = detail::fold_assignment(t.labels, folds, true, 99);
        std::vector<std::size_t> sizes(folds, 0);
        for (std::size_t f : fold_of) {
            CHECK(f < folds);
            sizes[f]++;
        }
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        CHECK(*hi - *lo <= 1);
        std::size_t total = 0;
        for (std::size_t s : sizes) total += s;
        CHECK(total == t.n_rows);  // every row in exactly one fold
    }

    SUBCASE("a class smaller than the fold count cannot stratify") {
        std::vector<Label> labels(20, S);
        labels[0] = L;
        labels[1] = L;
        CHECK_THROWS_AS(detail::fold_assignment(labels, 5, true, 1), Error);
    }
}

TEST_CASE("cv_evaluate: perfect synthetic task scores mean 1.0 with sd 0") {
    const FeatureTable t = separable_task(300, 7);
    ModelSpec spec;
    spec.family = Family::cart;
    spec.hyper["cp"] = 0.01;
    const CvResult r = cv_evaluate(spec, t, cv(5, 2, 11));
    CHECK(r.scores.size() == 10);
    CHECK(r.mean_accuracy() == doctest::Approx(1.0));
    CHECK(r.sd_accuracy() == doctest::Approx(0.0));
    CHECK(r.mean_kappa() == doctest::Approx(1.0));
}

TEST_CASE("cv_evaluate: label-shuffled data scores near-zero kappa") {
    const Dataset ds = testsupport::synthetic_dataset(800, 5, []{
        auto dir = std::filesystem::temp_directory_path() / "churnkit_tuning_tests";
        std::filesystem::create_directories(dir);
        return dir.string();
    }());
    FeatureTable t = dummy_encode(ds, EncoderSpec::from_schema(ds.schema));
    Rng rng(12);
    rng.shuffle(t.labels);  // destroy any signal, keep the class balance
    ModelSpec spec;
    spec.family = Family::gnb;
    const CvResult r = cv_evaluate(spec, t, cv(5, 2, 31));
    CHECK(std::fabs(r.mean_kappa()) < 0.05);
}

TEST_CASE("cv_evaluate is deterministic across thread caps") {
    const FeatureTable t = separable_task(240, 17);
    ModelSpec spec;
    spec.family = Family::rf;
    spec.seed = 5;
    spec.hyper["n_trees"] = 30;
    spec.hyper["mtry"] = 1;
    set_thread_cap(1);
    const CvResult a = cv_evaluate(spec, t, cv(4, 2, 7));
    set_thread_cap(2);
    const CvResult b = cv_evaluate(spec, t, cv(4, 2, 7));
    set_thread_cap(0);
    REQUIRE(a.scores.size() == b.scores.size());
    for (std::size_t i = 0; i < a.scores.size(); ++i) {
        CHECK(a.scores[i].accuracy == b.scores[i].accuracy);
        CHECK(a.scores[i].kappa == b.scores[i].kappa);
    }
}

TEST_CASE("grid_search: single cell, identical partitions, audit identity") {
    const FeatureTable t = separable_task(200, 23);
    ModelSpec base;
    base.family = Family::knn;
    const GridResult gr = grid_search(base, {{"k", {3}}}, t, cv(4, 1, 13));
    CHECK(gr.cells.size() == 1);
    CHECK(gr.best_index == 0);
    CHECK(gr.best_spec().get("k", 0) == 3);

    // reported best mean equals the mean of its stored fold scores
    const CvResult& best = gr.best_result();
    double mean = 0;
    for (const auto& s : best.scores) mean += s.accuracy;
    mean /= static_cast<double>(best.scores.size());
    CHECK(gr.best_result().mean_accuracy() == doctest::Approx(mean).epsilon(1e-15));

    // refit model's spec equals the best cell's spec
    CHECK(gr.best_model.spec().family == Family::knn);
    CHECK(gr.best_model.spec().get("k", 0) == 3);
}

TEST_CASE("grid_search: ties break toward the simpler model") {
    const FeatureTable t = separable_task(300, 29);

    SUBCASE("knn: lower k wins a tie") {
        ModelSpec base;
        base.family = Family::knn;
        const GridResult gr = grid_search(base, {{"k", {7, 1, 3}}}, t, cv(4, 1, 3));
        // a fully separable task scores 1.0 for every k
        for (const auto& cell : gr.cells)
            CHECK(cell.result->mean_accuracy() == doctest::Approx(1.0));
        CHECK(gr.best_spec().get("k", 0) == 1);
    }

    SUBCASE("cart: larger cp (simpler tree) wins a tie") {
        ModelSpec base;
        base.family = Family::cart;
        const GridResult gr = grid_search(base, {{"cp", {0.01, 0.3}}}, t, cv(4, 1, 3));
        for (const auto& cell : gr.cells)
            CHECK(cell.result->mean_accuracy() == doctest::Approx(1.0));
        CHECK(gr.best_spec().get("cp", 0) == 0.3);
    }

    SUBCASE("ann: fewer hidden units, then higher decay") {
        ModelSpec base;
        base.family = Family::ann;
        base.hyper["max_iter"] = 100;
        const GridResult gr = grid_search(
            base, {{"size", {3, 1}}, {"decay", {0.0, 0.1}}}, t, cv(3, 1, 3));
        bool all_perfect = true;
        for (const auto& cell : gr.cells)
            if (cell.result->mean_accuracy() < 1.0) all_perfect = false;
        if (all_perfect) {
            CHECK(gr.best_spec().get("size", 0) == 1);
            CHECK(gr.best_spec().get("decay", -1) == 0.1);
        }
    }
}

TEST_CASE("grid_search: a failing cell is recorded; only all-fail is fatal") {
    const FeatureTable t = separable_task(60, 31);
    ModelSpec base;
    base.family = Family::knn;
    // k=1000 exceeds every training fold
    const GridResult gr = grid_search(base, {{"k", {3, 1000}}}, t, cv(3, 1, 5));
    CHECK(gr.cells.size() == 2);
    CHECK(gr.cells[0].result.has_value());
    CHECK_FALSE(gr.cells[1].result.has_value());
    CHECK_FALSE(gr.cells[1].error.empty());
    CHECK(gr.best_spec().get("k", 0) == 3);

    CHECK_THROWS_AS(grid_search(base, {{"k", {1000, 2000}}}, t, cv(3, 1, 5)), Error);
    CHECK_THROWS_AS(grid_search(base, {}, t, cv(3, 1, 5)), Error);
}

TEST_CASE("grid_rank_of: positions follow mean accuracy") {
    const Dataset ds = testsupport::synthetic_dataset(400, 37, []{
        auto dir = std::filesystem::temp_directory_path() / "churnkit_tuning_tests";
        std::filesystem::create_directories(dir);
        return dir.string();
    }());
    const FeatureTable t = dummy_encode(ds, EncoderSpec::from_schema(ds.schema));
    ModelSpec base;
    base.family = Family::cart;
    const GridResult gr = grid_search(base, {{"cp", {0.01, 1.0}}}, t, cv(3, 1, 41));
    // cp=1 collapses to the majority class, so cp=0.01 must rank first
    CHECK(grid_rank_of(gr, {{"cp", 0.01}}) == 0);
    CHECK(grid_rank_of(gr, {{"cp", 1.0}}) == 1);
    CHECK_THROWS_AS(grid_rank_of(gr, {{"cp", 0.5}}), Error);
}
