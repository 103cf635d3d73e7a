// Acceptance gate: every numbered criterion below runs at its stated
// tolerance and prints one PASS/FAIL/SKIP line. Criteria 1-10 reproduce the
// study's published numbers and therefore need the public 10000-row churn
// CSV (located via --data, $CHURN_DATA, $CHURN_DATA_DIR, or data/ in the
// source tree); when the file is absent those criteria report SKIP and the
// binary exits 77 so the test harness records a skip, not a pass. 
// 11-15 are data-free properties and always run.
//
// Usage: acceptance [--group properties|study|all] [--data PATH]

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "churnkit/churnkit.hpp"
#include "support/synthetic.hpp"

using namespace churnkit;
namespace fs = std::filesystem;

namespace {

const Label S = Label::Stayed, L = Label::Left;

struct Outcome {
    enum Kind { pass, fail, skip } kind = pass;
    std::string detail;
};

struct Criterion {
    int id;
    std::string group;  // "study" or "properties"
    std::string title;
    std::function<Outcome()> run;
};

// ---------------------------------------------------------------------------
// Shared context

struct Context {
    std::string data_path;   // empty when the real CSV is unavailable
    std::string work_dir;

    // lazily computed artifacts over the real dataset
    std::optional<Dataset> raw, mapped;
    std::optional<nlohmann::json> manifest;  // full default-config suite

    const Dataset& real_raw() {
        if (!raw) raw = load_dataset(data_path, churn_schema());
        return *raw;
    }
    const Dataset& real_mapped() {
        if (!mapped) mapped = map_outcome_labels(real_raw());
        return *mapped;
    }
    const nlohmann::json& real_manifest() {
        if (!manifest) {
            ExperimentConfig cfg;
            cfg.data_path = data_path;
            cfg.out_dir = work_dir + "/study_run";
            cfg.master_seed = 42;
            std::cerr << "[acceptance] running the full default-config suite on "
                      << data_path << " (this is the study-scale run)\n";
            ExperimentRunner runner(cfg);
            runner.set_log(&std::cerr);
            for (const auto& stage : {"compare", "select", "balance", "outliers"})
                runner.run(stage);
            manifest = runner.manifest();
        }
        return *manifest;
    }
};

Context ctx;

std::string locate_dataset(const std::string& cli_path) {
    std::vector<std::string> candidates;
    if (!cli_path.empty()) candidates.push_back(cli_path);
    if (const char* env = std::getenv("CHURN_DATA")) candidates.push_back(env);
    std::vector<std::string> names = {"Churn_Modelling.csv", "churn.csv",
                                      "Bank_Customer_Churn.csv"};
    if (const char* dir = std::getenv("CHURN_DATA_DIR"))
        for (const auto& n : names) candidates.push_back(std::string(dir) + "/" + n);
    for (const auto& n : names) candidates.push_back("data/" + n);
    for (const auto& c : candidates)
        if (!c.empty() && fs::exists(c)) return c;
    return "";
}

Outcome ok() { return {Outcome::pass, ""}; }

Outcome failed(const std::string& detail) { return {Outcome::fail, detail}; }

struct Gate {
    std::vector<std::string> problems;

    void within(const std::string& what, double actual, double expected, double tol) {
        if (!(std::fabs(actual - expected) <= tol)) {
            std::ostringstream os;
            os << what << ": got " << actual << ", want " << expected << " +/- " << tol;
            problems.push_back(os.str());
        }
    }
    void is_true(const std::string& what, bool cond) {
        if (!cond) problems.push_back(what);
    }
    Outcome result() const {
        if (problems.empty()) return ok();
        std::string all;
        for (const auto& p : problems) all += (all.empty() ? "" : "; ") + p;
        return failed(all);
    }
};

/// A reported value carried as its printed string, so the tolerance honors
/// its printed precision: the stated +/-0.01, widened to the rounding
/// half-width when the table shows fewer decimals (e.g. "100090.2" can only
/// pin the mean to +/-0.05).
struct Reported {
    double value = 0;
    double tol = 0;

    Reported(const char* printed) {  // NOLINT: implicit by design
        value = std::strtod(printed, nullptr);
        const std::string s(printed);
        const auto dot = s.find('.');
        const int decimals =
            dot == std::string::npos ? 0 : static_cast<int>(s.size() - dot - 1);
        tol = std::max(0.01, 0.5 * std::pow(10.0, -decimals));
    }
};

double jget(const nlohmann::json& j, const std::vector<std::string>& path) {
    const nlohmann::json* cur = &j;
    for (const auto& key : path) cur = &cur->at(key);
    return cur->get<double>();
}

// ---------------------------------------------------------------------------
// Study-data criteria

Outcome c1_class_counts() {
    const ClassCounts cc = class_counts(ctx.real_mapped());
    if (cc.stayed == 7963 && cc.left == 2037) return ok();
    return failed("class counts Stayed=" + std::to_string(cc.stayed) +
                  " Left=" + std::to_string(cc.left) + ", want 7963/2037");
}

Outcome c2_table1_descriptives() {
    struct Row {
        const char* name;
        Reported min, max, mean, sd;  // exactly as printed in the study
    };
    const std::vector<Row> table1 = {
        {"CreditScore", "350", "850", "650.53", "96.65"},
        {"Age", "18", "92", "38.92", "10.49"},
        {"Tenure", "0", "10", "5.01", "2.89"},
        {"Balance", "0", "250898.1", "76485.89", "62397.41"},
        {"NumOfProducts", "1", "4", "1.53", "0.58"},
        {"HasCrCard", "0", "1", "0.71", "0.46"},
        {"IsActiveMember", "0", "1", "0.52", "0.50"},
        {"EstimatedSalary", "11.58", "199992.5", "100090.2", "57510.49"},
        {"Exited", "0", "1", "0.2", "0.40"},
    };
    Gate g;
    for (const auto& row : table1) {
        const ColumnSummary s = describe_column(ctx.real_raw(), row.name);
        g.within(std::string(row.name) + " min", s.min, row.min.value, row.min.tol);
        g.within(std::string(row.name) + " max", s.max, row.max.value, row.max.tol);
        g.within(std::string(row.name) + " mean", s.mean, row.mean.value, row.mean.tol);
        g.within(std::string(row.name) + " sd", s.std_dev, row.sd.value, row.sd.tol);
    }
    return g.result();
}

Outcome c3_table2_correlations() {
    const std::vector<std::string> cols = {"Exited",          "CreditScore",   "Age",
                                           "Tenure",          "Balance",       "NumOfProducts",
                                           "EstimatedSalary", "IsActiveMember", "HasCrCard"};
    // Lower triangle of Table 2, row-major in the order above.
    const std::vector<std::vector<double>> reported = {
        {},
        {-0.027},
        {0.285, -0.004},
        {-0.014, 0.001, -0.010},
        {0.119, 0.006, 0.028, -0.012},
        {-0.048, 0.012, -0.031, 0.013, -0.304},
        {0.012, -0.001, -0.007, 0.008, 0.013, 0.014},
        {-0.156, 0.026, 0.085, -0.028, -0.010, 0.010, -0.011},
        {-0.007, -0.005, -0.012, 0.023, -0.015, 0.003, -0.010, -0.012},
    };
    const CorrelationMatrix m = pearson_correlation_matrix(ctx.real_raw(), cols);
    Gate g;
    for (std::size_t i = 0; i < cols.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            g.within("r(" + cols[i] + "," + cols[j] + ")", m.values[i][j], reported[i][j],
                     0.001);
    return g.result();
}

Outcome c4_chi_square_suite() {
    struct Case {
        const char* factor;
        double statistic;
        int df;
        double p;  // negative = reported below the display floor
    };
    const std::vector<Case> cases = {
        {"Gender", 112.92, 1, -1},        {"Geography", 301.26, 2, -1},
        {"HasCrCard", 0.47134, 1, 0.4924}, {"IsActiveMember", 242.99, 1, -1},
        {"NumOfProducts", 1503.6, 3, -1},
    };
    Gate g;
    for (const auto& c : cases) {
        const ChiSquareResult r = chi_square_independence(ctx.real_mapped(), c.factor, "Exited");
        g.within(std::string(c.factor) + " X2", r.statistic, c.statistic,
                 0.005 * c.statistic);
        g.is_true(std::string(c.factor) + " df", r.df == c.df);
        if (c.p > 0) g.within(std::string(c.factor) + " p", r.p_value, c.p, 0.001);
        else g.is_true(std::string(c.factor) + " p tiny", r.p_value < 2.2e-16 * 10);
    }
    return g.result();
}

Outcome c5_outlier_counts() {
    Gate g;
    const auto credit = iqr_outliers(ctx.real_mapped(), "CreditScore", true);
    g.is_true("CreditScore/Left = 11",
              report_for_class(credit, L).outlier_row_indices.size() == 11);
    const auto age = iqr_outliers(ctx.real_mapped(), "Age", true);
    g.is_true("Age/Left = 13", report_for_class(age, L).outlier_row_indices.size() == 13);
    g.is_true("Age/Stayed = 486",
              report_for_class(age, S).outlier_row_indices.size() == 486);
    for (const char* column : {"Balance", "EstimatedSalary"}) {
        const auto reports = iqr_outliers(ctx.real_mapped(), column, true);
        for (const auto& rep : reports)
            g.is_true(std::string(column) + "/" + to_string(*rep.class_label) + " = 0",
                      rep.outlier_row_indices.empty());
    }
    return g.result();
}

Outcome c6_table4_test_metrics() {
    const auto& m = ctx.real_manifest();
    struct Want {
        const char* model;
        double kappa, accuracy, kappa_tol;
    };
    const std::vector<Want> wants = {
        {"gnb", 0.310, 0.824, 0.06}, {"knn", 0.257, 0.817, 0.06},
        {"svm", 0.488, 0.866, 0.08},  // untuned defaults: widened tolerance
        {"cart", 0.492, 0.865, 0.06}, {"rf", 0.512, 0.864, 0.06},
        {"ann", 0.514, 0.867, 0.06},
    };
    Gate g;
    for (const auto& w : wants) {
        g.within(std::string(w.model) + " test kappa",
                 jget(m, {"stages", "compare", "models", w.model, "test", "metrics", "kappa"}),
                 w.kappa, w.kappa_tol);
        g.within(std::string(w.model) + " test accuracy",
                 jget(m, {"stages", "compare", "models", w.model, "test", "metrics",
                          "accuracy"}),
                 w.accuracy, 0.015);
    }
    return g.result();
}

Outcome c7_rf_overfit_signature() {
    const auto& m = ctx.real_manifest();
    Gate g;
    for (const char* key : {"kappa", "accuracy", "precision", "recall", "f1"})
        g.is_true(std::string("rf train ") + key + " >= 0.99",
                  jget(m, {"stages", "compare", "models", "rf", "train", "metrics", key}) >=
                      0.99);
    const double gap =
        jget(m, {"stages", "compare", "models", "rf", "train", "metrics", "kappa"}) -
        jget(m, {"stages", "compare", "models", "rf", "test", "metrics", "kappa"});
    g.is_true("rf train-test kappa gap >= 0.3", gap >= 0.3);
    return g.result();
}

std::size_t manifest_grid_rank(const nlohmann::json& grid,
                               const std::map<std::string, double>& assignment) {
    std::vector<std::pair<double, std::size_t>> order;
    const auto& cells = grid.at("cells");
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (!cells[c].contains("cv")) continue;
        order.emplace_back(-cells[c]["cv"]["mean_accuracy"].get<double>(), c);
    }
    std::sort(order.begin(), order.end());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const auto& hyper = cells[order[pos].second]["hyperparameters"];
        bool match = true;
        for (const auto& [k, v] : assignment) {
            if (!hyper.contains(k) || hyper[k].get<double>() != v) match = false;
        }
        if (match) return pos;
    }
    return order.size();
}

Outcome c8_tuning_recovers_optima() {
    const auto& m = ctx.real_manifest();
    Gate g;
    g.is_true("compare knn k=9 in top-2",
              manifest_grid_rank(m["stages"]["compare"]["models"]["knn"]["grid"],
                                 {{"k", 9}}) <= 1);
    g.is_true("compare cart cp=0.01 in top-2",
              manifest_grid_rank(m["stages"]["compare"]["models"]["cart"]["grid"],
                                 {{"cp", 0.01}}) <= 1);
    g.is_true("compare rf mtry=4 in top-2",
              manifest_grid_rank(m["stages"]["compare"]["models"]["rf"]["grid"],
                                 {{"mtry", 4}}) <= 1);
    g.is_true("compare ann (size 5, decay 0.1) in top-2",
              manifest_grid_rank(m["stages"]["compare"]["models"]["ann"]["grid"],
                                 {{"size", 5}, {"decay", 0.1}}) <= 1);
    g.is_true("select rf mtry=5 in top-2",
              manifest_grid_rank(m["stages"]["select"]["models"]["rf_selected"]["grid"],
                                 {{"mtry", 5}}) <= 1);
    g.is_true("balance smote ann decay=0.2 in top-2",
              manifest_grid_rank(m["stages"]["balance"]["models"]["ann_smote"]["grid"],
                                 {{"decay", 0.2}}) <= 1);
    g.is_true("balance under rf mtry=2 in top-2",
              manifest_grid_rank(m["stages"]["balance"]["models"]["rf_under"]["grid"],
                                 {{"mtry", 2}}) <= 1);
    return g.result();
}

Outcome c9_balancing_directions() {
    const auto& m = ctx.real_manifest();
    Gate g;
    const double rf_initial =
        jget(m, {"stages", "balance", "models", "rf_initial", "test", "metrics", "recall"});
    const double ann_initial =
        jget(m, {"stages", "balance", "models", "ann_initial", "test", "metrics", "recall"});
    for (const char* mode : {"under", "smote"}) {
        g.is_true(std::string("rf_") + mode + " test recall above initial",
                  jget(m, {"stages", "balance", "models", std::string("rf_") + mode, "test",
                           "metrics", "recall"}) > rf_initial);
        g.is_true(std::string("ann_") + mode + " test recall above initial",
                  jget(m, {"stages", "balance", "models", std::string("ann_") + mode, "test",
                           "metrics", "recall"}) > ann_initial);
    }
    g.within("smote ann test F1",
             jget(m, {"stages", "balance", "models", "ann_smote", "test", "metrics", "f1"}),
             0.622, 0.06);
    g.within("smote rf training ROC",
             jget(m, {"stages", "balance", "models", "rf_smote", "train", "metrics",
                      "roc_auc"}),
             0.936, 0.03);
    return g.result();
}

Outcome c10_outlier_ablation_directions() {
    const auto& m = ctx.real_manifest();
    const double rf_delta =
        jget(m, {"stages", "outliers", "models", "rf_cleaned", "test", "metrics", "kappa"}) -
        jget(m, {"stages", "outliers", "models", "rf_initial", "test", "metrics", "kappa"});
    const double ann_delta =
        jget(m, {"stages", "outliers", "models", "ann_cleaned", "test", "metrics", "kappa"}) -
        jget(m, {"stages", "outliers", "models", "ann_initial", "test", "metrics", "kappa"});
    Gate g;
    g.is_true("cleaning does not improve rf (delta kappa < 0)", rf_delta < 0);
    g.is_true("ann degrades less than rf", std::fabs(ann_delta) < std::fabs(rf_delta));
    return g.result();
}

// ---------------------------------------------------------------------------
// Property criteria (no study data)

Outcome c11_ann_gradient_check() {
    Rng rng(90210);
    Gate g;
    for (int trial = 0; trial < 3; ++trial) {
        const std::size_t d = 3 + trial, hidden = 2 + trial, n = 6;
        FeatureTable x;
        for (std::size_t c = 0; c < d; ++c) {
            x.columns.push_back("f" + std::to_string(c));
            x.binary.push_back(0);
        }
        x.n_cols = d;
        x.n_rows = n;
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < d; ++c) x.data.push_back(rng.normal());
            y[i] = rng.next_double() < 0.5 ? 1.0 : 0.0;
        }
        std::vector<double> w(AnnClassifier::n_params(d, hidden));
        for (auto& v : w) v = rng.uniform(-0.7, 0.7);
        const auto lg = AnnClassifier::loss_and_gradient(w, x, y, 0.05, hidden);
        const double h = 1e-6;
        double max_rel = 0;
        for (std::size_t p = 0; p < w.size(); ++p) {
            std::vector<double> wp = w, wm = w;
            wp[p] += h;
            wm[p] -= h;
            const double fd = (AnnClassifier::loss_and_gradient(wp, x, y, 0.05, hidden).loss -
                               AnnClassifier::loss_and_gradient(wm, x, y, 0.05, hidden).loss) /
                              (2 * h);
            max_rel = std::max(max_rel,
                               std::fabs(fd - lg.grad[p]) /
                                   std::max(1e-8, std::fabs(lg.grad[p])));
        }
        g.is_true("gradient max relative error < 1e-5 (trial " + std::to_string(trial) + ")",
                  max_rel < 1e-5);
    }
    return g.result();
}

Outcome c12_metric_identities() {
    Gate g;
    Rng rng(1212);
    for (int trial = 0; trial < 300; ++trial) {
        ConfusionMatrix cm;
        cm.tp = 1 + rng.next_below(40);
        cm.fp = 1 + rng.next_below(40);
        cm.tn = 1 + rng.next_below(40);
        cm.fn = 1 + rng.next_below(40);
        const MetricSet m = metric_set(cm);
        const double tp = cm.tp, fp = cm.fp, tn = cm.tn, fn = cm.fn;
        const double n = tp + fp + tn + fn;
        const double precision = tp / (tp + fp), recall = tp / (tp + fn);
        const double f1 = 2 * precision * recall / (precision + recall);
        const double po = (tp + tn) / n;
        const double pe = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / (n * n);
        const double kappa = (po - pe) / (1 - pe);
        g.is_true("f1 identity", std::fabs(*m.f1 - f1) <= 1e-12);
        g.is_true("kappa identity", std::fabs(*m.kappa - kappa) <= 1e-12);
        g.is_true("accuracy identity", std::fabs(*m.accuracy - po) <= 1e-12);
        if (!g.problems.empty()) break;
    }

    // constant predictor -> kappa exactly 0
    std::vector<Label> truth(50, S);
    for (int i = 0; i < 14; ++i) truth[i] = L;
    g.is_true("constant predictor kappa = 0",
              *metric_set(confusion(truth, std::vector<Label>(50, S))).kappa == 0.0);

    // trapezoid vs Mann-Whitney
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 6 + rng.next_below(50);
        std::vector<double> scores(n);
        std::vector<Label> truth2(n);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.next_below(6)) / 5.0;
            truth2[i] = rng.next_double() < 0.4 ? L : S;
            (truth2[i] == L ? pos : neg) = true;
        }
        if (!pos || !neg) continue;
        // trapezoid over the tie-grouped ROC curve
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
        double np = 0, nn = 0;
        for (Label l : truth2) (l == L ? np : nn) += 1.0;
        double area = 0, tp = 0;
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            double dtp = 0, dfp = 0;
            while (j < n && scores[order[j]] == scores[order[i]]) {
                (truth2[order[j]] == L ? dtp : dfp) += 1.0;
                ++j;
            }
            area += (dfp / nn) * (tp / np) + 0.5 * (dfp / nn) * (dtp / np);
            tp += dtp;
            i = j;
        }
        g.is_true("trapezoid equals Mann-Whitney",
                  std::fabs(area - roc_auc(scores, truth2)) <= 1e-12);
        if (!g.problems.empty()) break;
    }
    return g.result();
}

Outcome c13_resampling_properties() {
    Gate g;
    Rng rng(333);
    std::vector<std::vector<double>> rows;
    std::vector<Label> labels;
    for (int i = 0; i < 90; ++i) {
        rows.push_back({rng.normal(), rng.normal(), rng.next_double() < 0.5 ? 0.0 : 1.0});
        labels.push_back(S);
    }
    for (int i = 0; i < 20; ++i) {
        rows.push_back({3 + rng.normal(), 3 + rng.normal(),
                        rng.next_double() < 0.5 ? 0.0 : 1.0});
        labels.push_back(L);
    }
    FeatureTable train;
    train.columns = {"x", "y", "flag"};
    train.binary = {0, 0, 1};
    train.n_cols = 3;
    train.n_rows = rows.size();
    for (const auto& r : rows) train.data.insert(train.data.end(), r.begin(), r.end());
    train.labels = labels;

    ResamplePlan under;
    under.kind = ResampleKind::under;
    under.seed = 5;
    const FeatureTable u = undersample(train, under);
    std::size_t u_left = 0;
    for (Label l : u.labels)
        if (l == L) ++u_left;
    g.is_true("undersample 1:1", u_left * 2 == u.n_rows);
    g.is_true("undersample keeps all minority rows", u_left == 20);

    ResamplePlan sm;
    sm.kind = ResampleKind::smote;
    sm.k_neighbors = 1;  // pins the generating segment for the check below
    sm.seed = 6;
    const FeatureTable s = smote(train, sm);
    std::size_t s_left = 0;
    for (Label l : s.labels)
        if (l == L) ++s_left;
    g.is_true("smote 1:1", s_left * 2 == s.n_rows);
    g.is_true("smote is a superset", s.n_rows > train.n_rows);

    std::vector<std::size_t> minority;
    for (std::size_t r = 0; r < train.n_rows; ++r)
        if (train.labels[r] == L) minority.push_back(r);
    auto nearest = [&](std::size_t a) {
        double best = 1e300;
        std::size_t who = a;
        for (std::size_t b : minority) {
            if (b == minority[a]) continue;
            double d2 = 0;
            for (std::size_t c = 0; c < train.n_cols; ++c) {
                const double diff = train.at(minority[a], c) - train.at(b, c);
                d2 += diff * diff;
            }
            if (d2 < best) {
                best = d2;
                who = b;
            }
        }
        return who;
    };
    for (std::size_t t = 0; t + train.n_rows < s.n_rows; ++t) {
        const std::size_t row = train.n_rows + t;
        const std::size_t a = minority[t % minority.size()];
        const std::size_t b = nearest(t % minority.size());
        for (std::size_t c = 0; c < 2; ++c) {  // continuous coordinates
            const double lo = std::min(train.at(a, c), train.at(b, c)) - 1e-12;
            const double hi = std::max(train.at(a, c), train.at(b, c)) + 1e-12;
            g.is_true("synthetic coordinate within its generating segment",
                      s.at(row, c) >= lo && s.at(row, c) <= hi);
        }
        const double flag = s.at(row, 2);
        g.is_true("binary coordinate rounded", flag == 0.0 || flag == 1.0);
        if (!g.problems.empty()) break;
    }
    return g.result();
}

ExperimentConfig determinism_config(const std::string& data, const std::string& out,
                                    std::uint64_t seed) {
    ExperimentConfig cfg;
    cfg.data_path = data;
    cfg.out_dir = out;
    cfg.master_seed = seed;
    cfg.cv_folds = 3;
    cfg.cv_repeats = 1;
    cfg.rfe_folds = 3;
    cfg.rfe_repeats = 1;
    cfg.knn_grid_k = {3, 9};
    cfg.cart_grid_cp = {0.01, 0.1};
    cfg.rf_grid_mtry = {2, 4};
    cfg.ann_grid_size = {3, 5};
    cfg.ann_grid_decay = {0.1, 0.2};
    cfg.rfe_sizes = {2, 5, 8};
    cfg.rf_trees = 40;
    cfg.ann_max_iter = 80;
    return cfg;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Outcome c14_full_suite_determinism() {
    const std::string data =
        testsupport::write_synthetic_csv(ctx.work_dir + "/det_data.csv", 500, 777);
    const std::string out = ctx.work_dir + "/det_run";

    auto run_suite = [&](std::size_t threads) {
        fs::remove_all(out);
        set_thread_cap(threads);
        ExperimentRunner runner(determinism_config(data, out, 20240842));
        runner.run("all");
        set_thread_cap(0);
        return file_bytes(out + "/manifest.json");
    };

    const std::string first = run_suite(1);
    const std::string second = run_suite(1);
    const std::string threaded = run_suite(4);
    Gate g;
    g.is_true("repeat run produces byte-identical manifest", first == second);
    g.is_true("thread count does not change the manifest", first == threaded);
    g.is_true("manifest is non-trivial", first.size() > 10000);
    return g.result();
}

/// Audits one stage: runs it clean, poisons exactly that stage's test rows
/// (every numeric cell rewritten; labels and factors untouched so the
/// stratified split repeats), reruns, and demands bit-identical
/// training-side results.
Outcome leakage_audit_stage(const std::string& stage, Gate& g) {
    const std::string data_a = ctx.work_dir + "/leak_" + stage + "_a.csv";
    testsupport::write_synthetic_csv(data_a, 400, 555);
    const std::string out_a = ctx.work_dir + "/leak_" + stage + "_run_a";
    const std::string out_b = ctx.work_dir + "/leak_" + stage + "_run_b";

    auto run_stage = [&](const std::string& data, const std::string& out) {
        fs::remove_all(out);
        ExperimentRunner runner(determinism_config(data, out, 11));
        runner.run(stage);
        return runner.manifest();
    };

    const nlohmann::json m1 = run_stage(data_a, out_a);
    const auto test_rows =
        m1["stages"][stage]["split"]["test_indices"].get<std::vector<std::size_t>>();

    csv::Table t = csv::read_file(data_a);
    const std::vector<std::size_t> numeric_cols = {3, 6, 7, 8, 9, 12};  // schema numerics
    for (std::size_t r : test_rows)
        for (std::size_t c : numeric_cols)
            t.rows[r][c] = csv::format_fixed(
                csv::parse_number(t.rows[r][c], r, "cell") * 1000.0 + 7777.0, 4);
    const std::string data_b = ctx.work_dir + "/leak_" + stage + "_b.csv";
    csv::write_file(data_b, t.header, t.rows);

    const nlohmann::json m2 = run_stage(data_b, out_b);

    g.is_true(stage + " split identical",
              m1["stages"][stage]["split"] == m2["stages"][stage]["split"]);
    bool any_test_changed = false;
    for (const auto& [name, entry] : m1["stages"][stage]["models"].items()) {
        const auto& other = m2["stages"][stage]["models"][name];
        g.is_true(stage + "/" + name + " tuned hyperparameters identical",
                  entry["hyperparameters"] == other["hyperparameters"]);
        if (entry.contains("grid"))
            g.is_true(stage + "/" + name + " grid search identical",
                      entry["grid"] == other["grid"]);
        g.is_true(stage + "/" + name + " training evaluation identical",
                  entry["train"] == other["train"]);
        if (entry["test"] != other["test"]) any_test_changed = true;
    }
    g.is_true(stage + ": poisoned test rows visibly changed some test evaluation",
              any_test_changed);

    // The serialized models (including fitted scaler/transform parameters)
    // must also be bit-identical: no preprocessing statistic saw a test row.
    for (const auto& dump : fs::directory_iterator(out_a + "/models"))
        g.is_true("model dump identical: " + dump.path().filename().string(),
                  file_bytes(dump.path().string()) ==
                      file_bytes(out_b + "/models/" + dump.path().filename().string()));
    return g.result();
}

Outcome c15_leakage_audit() {
    Gate g;
    leakage_audit_stage("compare", g);
    leakage_audit_stage("balance", g);
    return g.result();
}

}  // namespace

int main(int argc, char** argv) {
    std::string group = "all", data_arg;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--group" && i + 1 < argc) group = argv[++i];
        else if (a == "--data" && i + 1 < argc) data_arg = argv[++i];
        else {
            std::cerr << "usage: acceptance [--group properties|study|all] [--data CSV]\n";
            return 2;
        }
    }

    ctx.work_dir = (fs::temp_directory_path() / "churnkit_acceptance").string();
    fs::create_directories(ctx.work_dir);
    ctx.data_path = locate_dataset(data_arg);

    const std::vector<Criterion> criteria = {
        {1, "study", "class counts Stayed=7963 / Left=2037", c1_class_counts},
        {2, "study", "Table 1 descriptive statistics within tolerance", c2_table1_descriptives},
        {3, "study", "Table 2 correlations within 0.001", c3_table2_correlations},
        {4, "study", "chi-square suite within 0.5% / p 0.001", c4_chi_square_suite},
        {5, "study", "IQR outlier counts 11 / 13 / 486 / 0", c5_outlier_counts},
        {6, "study", "Table 4 test metrics per model", c6_table4_test_metrics},
        {7, "study", "Table 3 RF overfit signature", c7_rf_overfit_signature},
        {8, "study", "tuning recovers the study's optima (top-2 cells)", c8_tuning_recovers_optima},
        {9, "study", "Table 9 balancing directions and values", c9_balancing_directions},
        {10, "study", "Table 11 outlier-ablation directions", c10_outlier_ablation_directions},
        {11, "properties", "backprop gradient vs central differences < 1e-5", c11_ann_gradient_check},
        {12, "properties", "metric identities and AUC equivalences to 1e-12", c12_metric_identities},
        {13, "properties", "resampling properties (segments, subsets, 1:1)", c13_resampling_properties},
        {14, "properties", "full-suite determinism across runs and threads", c14_full_suite_determinism},
        {15, "properties", "leakage audit: nothing fitted sees a test row", c15_leakage_audit},
    };

    bool any_fail = false, any_ran = false, any_skip = false;
    for (const auto& c : criteria) {
        if (group != "all" && c.group != group) continue;
        Outcome outcome;
        if (c.group == "study" && ctx.data_path.empty()) {
            outcome = {Outcome::skip,
                       "churn CSV not found (set CHURN_DATA or place data/Churn_Modelling.csv)"};
        } else {
            try {
                outcome = c.run();
            } catch (const std::exception& e) {
                outcome = failed(std::string("exception: ") + e.what());
            }
        }
        const char* tag = outcome.kind == Outcome::pass ? "PASS"
                          : outcome.kind == Outcome::fail ? "FAIL"
                                                          : "SKIP";
        std::ostringstream line;
        line << "[" << tag << "] C" << (c.id < 10 ? "0" : "") << c.id << " " << c.title;
        if (!outcome.detail.empty()) line << " -- " << outcome.detail;
        std::cout << line.str() << "\n" << std::flush;
        if (outcome.kind == Outcome::fail) any_fail = true;
        if (outcome.kind == Outcome::skip) any_skip = true;
        if (outcome.kind != Outcome::skip) any_ran = true;
    }

    if (any_fail) return 1;
    if (!any_ran && any_skip) return 77;
    return 0;
}
