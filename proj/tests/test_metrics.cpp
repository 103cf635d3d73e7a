#include <doctest.h>

#include <cmath>

#include "churnkit/metrics.hpp"
#include "churnkit/rng.hpp"

using namespace churnkit;

namespace {

const Label S = Label::Stayed, L = Label::Left;

/// Independent oracle written straight from the formulas.
struct OracleMetrics {
    double accuracy, precision, recall, f1, kappa;
};

OracleMetrics oracle(double tp, double fp, double tn, double fn) {
    OracleMetrics o{};
    const double n = tp + fp + tn + fn;
    o.accuracy = (tp + tn) / n;
    o.precision = tp / (tp + fp);
    o.recall = tp / (tp + fn);
    o.f1 = 2.0 * o.precision * o.recall / (o.precision + o.recall);
    const double po = o.accuracy;
    const double pe = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n);
    o.kappa = (po - pe) / (1.0 - pe);
    return o;
}

/// All-pairs oracle for the area under the ROC curve.
double auc_all_pairs(const std::vector<double>& scores, const std::vector<Label>& truth) {
    double wins = 0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] != L) continue;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            if (truth[j] != S) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

/// Trapezoidal area under the ROC curve, built point by point.
double auc_trapezoid(const std::vector<double>& scores, const std::vector<Label>& truth) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double np = 0, nn = 0;
    for (Label l : truth) (l == L ? np : nn) += 1.0;
    double area = 0, tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        double dtp = 0, dfp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (truth[order[j]] == L ? dtp : dfp) += 1.0;
            ++j;
        }
        area += (dfp / nn) * (tp / np) + 0.5 * (dfp / nn) * (dtp / np);
        tp += dtp;
        fp += dfp;
        i = j;
    }
    (void)fp;
    return area;
}

}  // namespace

TEST_CASE("confusion: counts with Left positive, error paths") {
    const std::vector<Label> truth = {L, L, L, S, S, S};
    const std::vector<Label> pred = {L, S, L, S, S, L};
    const ConfusionMatrix cm = confusion(truth, pred);
    CHECK(cm.tp == 2);
    CHECK(cm.fn == 1);
    CHECK(cm.tn == 2);
    CHECK(cm.fp == 1);
    CHECK(cm.total() == 6);

    CHECK_THROWS_AS(confusion({L, S}, {L}), Error);

    const ConfusionMatrix perfect = confusion(truth, truth);
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);

    const std::vector<Label> all_stayed(6, S);
    const ConfusionMatrix none = confusion(truth, all_stayed);
    CHECK(none.tp == 0);
    CHECK(*metric_set(none).recall == 0.0);
}

TEST_CASE("metric_set: hand 6-element tally") {
    // tp=2 fp=1 tn=2 fn=1: acc 4/6, P=R=2/3, F1=2/3, kappa=1/3.
    const MetricSet m = metric_set(confusion({L, L, L, S, S, S}, {L, S, L, S, S, L}));
    CHECK(*m.accuracy == doctest::Approx(4.0 / 6.0));
    CHECK(*m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(*m.recall == doctest::Approx(2.0 / 3.0));
    CHECK(*m.sensitivity == doctest::Approx(2.0 / 3.0));
    CHECK(*m.specificity == doctest::Approx(2.0 / 3.0));
    CHECK(*m.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(*m.kappa == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("metric_set: F1 recomputes from the ANN column's own P and R") {
    // P=0.797, R=0.464 -> F1=0.587 (Table-4 internal consistency)
    const double p = 0.797, r = 0.464;
    const double f1 = 2 * p * r / (p + r);
    CHECK(f1 == doctest::Approx(0.587).epsilon(0.001 / 0.587));
}

TEST_CASE("metric_set: perfect classifier, constant predictor, random counts oracle") {
    ConfusionMatrix perfect;
    perfect.tp = 40;
    perfect.tn = 60;
    const MetricSet mp = metric_set(perfect);
    CHECK(*mp.kappa == doctest::Approx(1.0));
    CHECK(*mp.accuracy == 1.0);
    CHECK(*mp.precision == 1.0);
    CHECK(*mp.recall == 1.0);
    CHECK(*mp.f1 == 1.0);

    // constant predictor -> kappa exactly 0 for any class balance
    for (std::size_t left : {1u, 25u, 80u}) {
        std::vector<Label> truth(100, S);
        for (std::size_t i = 0; i < left; ++i) truth[i] = L;
        const MetricSet mc = metric_set(confusion(truth, std::vector<Label>(100, S)));
        CHECK(*mc.kappa == doctest::Approx(0.0));
        const MetricSet ml = metric_set(confusion(truth, std::vector<Label>(100, L)));
        CHECK(*ml.kappa == doctest::Approx(0.0));
    }

    // random 2x2 counts vs the direct-formula oracle, to 1e-12
    Rng rng(4242);
    for (int trial = 0; trial < 200; ++trial) {
        ConfusionMatrix cm;
        cm.tp = 1 + rng.next_below(50);
        cm.fp = 1 + rng.next_below(50);
        cm.tn = 1 + rng.next_below(50);
        cm.fn = 1 + rng.next_below(50);
        const MetricSet m = metric_set(cm);
        const OracleMetrics o = oracle(static_cast<double>(cm.tp), static_cast<double>(cm.fp),
                                       static_cast<double>(cm.tn), static_cast<double>(cm.fn));
        CHECK(*m.accuracy == doctest::Approx(o.accuracy).epsilon(1e-12));
        CHECK(*m.precision == doctest::Approx(o.precision).epsilon(1e-12));
        CHECK(*m.recall == doctest::Approx(o.recall).epsilon(1e-12));
        CHECK(*m.f1 == doctest::Approx(o.f1).epsilon(1e-12));
        CHECK(*m.kappa == doctest::Approx(o.kappa).epsilon(1e-12));
        // accuracy = 1 - (fp+fn)/N identically
        CHECK(*m.accuracy ==
              doctest::Approx(1.0 - static_cast<double>(cm.fp + cm.fn) /
                                        static_cast<double>(cm.total()))
                  .epsilon(1e-15));
    }
}

TEST_CASE("metric_set: undefined ratios are explicit absences, never zeros") {
    ConfusionMatrix cm;  // nothing predicted positive, nothing actually positive
    cm.tn = 10;
    const MetricSet m = metric_set(cm);
    CHECK_FALSE(m.precision.has_value());
    CHECK_FALSE(m.recall.has_value());
    CHECK_FALSE(m.f1.has_value());
    CHECK(m.accuracy.has_value());
    // all cells in one margin: p_e = 1 -> kappa undefined
    CHECK_FALSE(m.kappa.has_value());
}

TEST_CASE("kappa symmetry: swapping true and predicted roles leaves kappa unchanged") {
    Rng rng(777);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Label> a(60), b(60);
        for (std::size_t i = 0; i < 60; ++i) {
            a[i] = rng.next_double() < 0.3 ? L : S;
            b[i] = rng.next_double() < 0.45 ? L : S;
        }
        const MetricSet m1 = metric_set(confusion(a, b));
        const MetricSet m2 = metric_set(confusion(b, a));
        if (m1.kappa && m2.kappa)
            CHECK(*m1.kappa == doctest::Approx(*m2.kappa).epsilon(1e-12));
    }
}

TEST_CASE("roc_auc: separability anchors and the 8-point all-pairs oracle") {
    CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {L, L, S, S}) == doctest::Approx(1.0));
    CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {L, L, S, S}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {L, L}), Error);

    const std::vector<double> scores = {0.1, 0.4, 0.35, 0.8, 0.65, 0.4, 0.9, 0.05};
    const std::vector<Label> truth = {S, S, L, L, L, S, L, S};
    CHECK(roc_auc(scores, truth) == doctest::Approx(auc_all_pairs(scores, truth)).epsilon(1e-12));
}

TEST_CASE("roc_auc: trapezoidal equals Mann-Whitney to 1e-12; monotone invariance") {
    Rng rng(31415);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + rng.next_below(60);
        std::vector<double> scores(n);
        std::vector<Label> truth(n);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // coarse grid forces plenty of ties
            scores[i] = static_cast<double>(rng.next_below(8)) / 7.0;
            truth[i] = rng.next_double() < 0.4 ? L : S;
            (truth[i] == L ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        const double mw = roc_auc(scores, truth);
        CHECK(mw == doctest::Approx(auc_trapezoid(scores, truth)).epsilon(1e-12));
        CHECK(mw == doctest::Approx(auc_all_pairs(scores, truth)).epsilon(1e-12));

        // strictly increasing transform leaves the area unchanged
        std::vector<double> warped(n);
        for (std::size_t i = 0; i < n; ++i) warped[i] = std::exp(3.0 * scores[i]) - 1.0;
        CHECK(roc_auc(warped, truth) == doctest::Approx(mw).epsilon(1e-12));
    }
}
