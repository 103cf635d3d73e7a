#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "churnkit/feature_selection.hpp"
#include "churnkit/report.hpp"
#include "churnkit/resampling.hpp"
#include "churnkit/stats.hpp"

namespace churnkit {

/// Everything a run needs; the master seed fans out into named per-stage
/// streams (see derive_seed) so each stage reproduces in isolation.
struct ExperimentConfig {
    std::string data_path;
    std::string out_dir = "runs/out";
    std::uint64_t master_seed = 42;
    double train_fraction = 0.8;

    std::size_t cv_folds = 10, cv_repeats = 3;
    std::size_t rfe_folds = 10, rfe_repeats = 1;

    std::vector<double> knn_grid_k = {1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23};
    std::vector<double> cart_grid_cp = {0.001, 0.005, 0.01, 0.05, 0.1};
    std::vector<double> rf_grid_mtry = {2, 3, 4, 5, 6};
    std::vector<double> ann_grid_size = {1, 3, 5, 7, 9};
    std::vector<double> ann_grid_decay = {0.0, 0.1, 0.2, 0.5};
    std::vector<double> rfe_sizes = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

    double rf_trees = 500;
    double ann_max_iter = 500;
    double svm_cost = 1.0;
    std::size_t smote_k = 5;
    std::size_t histogram_bins = 30;

    // Published tuned values used where a stage needs a reference model without
    // re-running the full grid (the "initial" columns).
    double initial_cart_cp = 0.01;
    double initial_rf_mtry = 4;
    double initial_rf_mtry_top5 = 5;
    double initial_ann_size = 5;
    double initial_ann_decay = 0.1;

    nlohmann::json to_json() const {
        return {{"data_path", data_path},
                {"out_dir", out_dir},
                {"master_seed", master_seed},
                {"train_fraction", train_fraction},
                {"cv_folds", cv_folds},
                {"cv_repeats", cv_repeats},
                {"rfe_folds", rfe_folds},
                {"rfe_repeats", rfe_repeats},
                {"knn_grid_k", knn_grid_k},
                {"cart_grid_cp", cart_grid_cp},
                {"rf_grid_mtry", rf_grid_mtry},
                {"ann_grid_size", ann_grid_size},
                {"ann_grid_decay", ann_grid_decay},
                {"rfe_sizes", rfe_sizes},
                {"rf_trees", rf_trees},
                {"ann_max_iter", ann_max_iter},
                {"svm_cost", svm_cost},
                {"smote_k", smote_k},
                {"histogram_bins", histogram_bins},
                {"initial_cart_cp", initial_cart_cp},
                {"initial_rf_mtry", initial_rf_mtry},
                {"initial_rf_mtry_top5", initial_rf_mtry_top5},
                {"initial_ann_size", initial_ann_size},
                {"initial_ann_decay", initial_ann_decay}};
    }
};

namespace exp_detail {

inline nlohmann::json labels01(const std::vector<Label>& v) {
    nlohmann::json j = nlohmann::json::array();
    for (Label l : v) j.push_back(l == Label::Left ? 1 : 0);
    return j;
}

/// Scores + derived labels + metrics for one (model, partition) pair.
struct EvalRecord {
    std::vector<double> scores;
    std::vector<Label> predicted;
    std::vector<Label> truth;
    ConfusionMatrix cm;
    MetricSet metrics;
};

inline EvalRecord evaluate_scores(std::vector<double> scores, const std::vector<Label>& truth) {
    EvalRecord rec;
    rec.scores = std::move(scores);
    rec.truth = truth;
    rec.predicted.resize(rec.scores.size());
    for (std::size_t i = 0; i < rec.scores.size(); ++i)
        rec.predicted[i] = rec.scores[i] >= 0.5 ? Label::Left : Label::Stayed;
    rec.cm = confusion(rec.truth, rec.predicted);
    rec.metrics = metric_set(rec.cm);
    bool both = rec.cm.tp + rec.cm.fn > 0 && rec.cm.tn + rec.cm.fp > 0;
    if (both) rec.metrics.roc_auc = roc_auc(rec.scores, rec.truth);
    return rec;
}

inline nlohmann::json to_json(const EvalRecord& rec) {
    return {{"confusion", churnkit::to_json(rec.cm)},
            {"metrics", churnkit::to_json(rec.metrics)},
            {"predictions",
             {{"truth", labels01(rec.truth)},
              {"labels", labels01(rec.predicted)},
              {"scores", rec.scores}}}};
}

inline nlohmann::json cv_result_json(const CvResult& r) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& s : r.scores)
        folds.push_back({{"repeat", s.repeat},
                         {"fold", s.fold},
                         {"accuracy", s.accuracy},
                         {"kappa", s.kappa}});
    return {{"mean_accuracy", r.mean_accuracy()},
            {"sd_accuracy", r.sd_accuracy()},
            {"mean_kappa", r.mean_kappa()},
            {"sd_kappa", r.sd_kappa()},
            {"folds", std::move(folds)}};
}

inline nlohmann::json grid_json(const GridResult& gr) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : gr.cells) {
        nlohmann::json cj = {{"hyperparameters", c.spec.hyper}};
        if (c.result) cj["cv"] = cv_result_json(*c.result);
        else cj["error"] = c.error;
        cells.push_back(std::move(cj));
    }
    return {{"cells", std::move(cells)},
            {"best_index", gr.best_index},
            {"best_hyperparameters", gr.best_spec().hyper}};
}

inline std::optional<double> metric_by_name(const MetricSet& m, const std::string& name) {
    if (name == "Sensitivity") return m.sensitivity;
    if (name == "Specificity") return m.specificity;
    if (name == "Kappa") return m.kappa;
    if (name == "Accuracy") return m.accuracy;
    if (name == "Precision") return m.precision;
    if (name == "Recall") return m.recall;
    if (name == "F1") return m.f1;
    if (name == "ROC") return m.roc_auc;
    fail("unknown metric row: " + name);
}

inline ReportTable metric_table(const std::string& id, const std::string& tag,
                                const std::string& caption,
                                const std::vector<std::string>& metric_rows,
                                const std::vector<std::string>& col_labels,
                                const std::vector<const MetricSet*>& columns) {
    ReportTable t;
    t.id = id;
    t.tag = tag;
    t.caption = caption;
    t.corner = "Measure";
    t.row_labels = metric_rows;
    t.col_labels = col_labels;
    for (const auto& row : metric_rows) {
        std::vector<nlohmann::json> cells;
        for (const MetricSet* m : columns) {
            const auto v = metric_by_name(*m, row);
            cells.push_back(v ? nlohmann::json(*v) : nlohmann::json());
        }
        t.cells.push_back(std::move(cells));
    }
    return t;
}

}  // namespace exp_detail

/// Runs the study's stages and writes the run directory:
/// manifest.json, timings.json, tables/*.csv, figures/*.csv, models/*.json.
/// Progress goes to stderr; stdout stays clean for summaries.
class ExperimentRunner {
public:
    explicit ExperimentRunner(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
        manifest_["format_version"] = 1;
        manifest_["config"] = cfg_.to_json();
        manifest_["stages"] = nlohmann::json::object();
        timings_ = nlohmann::json::object();
    }

    /// Progress sink; null disables logging.
    void set_log(std::ostream* log) { log_ = log; }

    static const std::vector<std::string>& stage_names() {
        static const std::vector<std::string> names = {"eda", "compare", "select", "balance",
                                                       "outliers"};
        return names;
    }

    /// stage = one of eda/compare/select/balance/outliers, or "all".
    void run(const std::string& stage) {
        load();
        if (stage == "all") {
            for (const auto& s : stage_names()) run_stage(s);
        } else {
            run_stage(stage);
        }
        write_outputs();
    }

    const nlohmann::json& manifest() const { return manifest_; }

private:
    void load() {
        if (loaded_) return;
        raw_ = load_dataset(cfg_.data_path, churn_schema());
        mapped_ = map_outcome_labels(raw_);
        encoder_ = EncoderSpec::from_schema(mapped_.schema);
        loaded_ = true;
    }

    void run_stage(const std::string& name) {
        const auto t0 = std::chrono::steady_clock::now();
        log("stage " + name);
        if (name == "eda") manifest_["stages"]["eda"] = stage_eda();
        else if (name == "compare") manifest_["stages"]["compare"] = stage_compare();
        else if (name == "select") manifest_["stages"]["select"] = stage_select();
        else if (name == "balance") manifest_["stages"]["balance"] = stage_balance();
        else if (name == "outliers") manifest_["stages"]["outliers"] = stage_outliers();
        else fail("unknown stage: " + name);
        const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
        timings_[name] = ms;
        log("stage " + name + " done in " + std::to_string(ms) + " ms");
    }

    void log(const std::string& msg) const {
        if (log_ != nullptr) (*log_) << "[churnkit] " << msg << std::endl;
    }

    // -- stage: eda ---------------------------------------------------------

    nlohmann::json stage_eda() {
        nlohmann::json stage;
        stage["seed"] = derive_seed(cfg_.master_seed, "stage.eda");

        const ClassCounts cc = class_counts(mapped_);
        stage["class_counts"] = {{"Stayed", cc.stayed}, {"Left", cc.left}};

        // Table 1: descriptive statistics of the numeric view (raw outcome codes).
        const std::vector<std::string> numeric_cols = {
            "CreditScore", "Age",       "Tenure",         "Balance", "NumOfProducts",
            "HasCrCard",   "IsActiveMember", "EstimatedSalary", "Exited"};
        ReportTable t1;
        t1.id = "table01_descriptives";
        t1.tag = "Table 1";
        t1.caption = "Variable definitions and descriptive statistics";
        t1.corner = "Variable";
        t1.col_labels = {"Minimum", "Maximum", "Mean", "Std. Deviation"};
        nlohmann::json describe = nlohmann::json::object();
        for (const auto& name : numeric_cols) {
            const ColumnSummary s = describe_column(raw_, name);
            t1.row_labels.push_back(name);
            t1.cells.push_back({s.min, s.max, s.mean, s.std_dev});
            describe[name] = {{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"sd", s.std_dev}};
        }
        for (const auto& name : {"Geography", "Gender"}) {
            const ColumnSummary s = describe_column(raw_, name);
            describe[name] = {{"level_counts", s.level_counts}};
        }
        stage["describe"] = describe;
        stage["tables"]["table01_descriptives"] = t1.to_json();

        // Table 2: correlations, published column order.
        const std::vector<std::string> corr_cols = {
            "Exited", "CreditScore", "Age", "Tenure", "Balance", "NumOfProducts",
            "EstimatedSalary", "IsActiveMember", "HasCrCard"};
        const CorrelationMatrix corr = pearson_correlation_matrix(raw_, corr_cols);
        ReportTable t2;
        t2.id = "table02_correlations";
        t2.tag = "Table 2";
        t2.caption = "Correlation table";
        t2.corner = "";
        t2.row_labels = corr_cols;
        t2.col_labels = corr_cols;
        for (std::size_t i = 0; i < corr_cols.size(); ++i) {
            std::vector<nlohmann::json> row;
            for (std::size_t j = 0; j < corr_cols.size(); ++j) row.push_back(corr.values[i][j]);
            t2.cells.push_back(std::move(row));
        }
        stage["tables"]["table02_correlations"] = t2.to_json();
        stage["correlations"] = {{"labels", corr.labels}, {"values", corr.values}};

        // Chi-square tests of the churn dependencies.
        nlohmann::json chi = nlohmann::json::object();
        for (const auto& factor : {"Gender", "Geography", "HasCrCard", "IsActiveMember",
                                   "NumOfProducts"}) {
            const ChiSquareResult r = chi_square_independence(mapped_, factor, "Exited");
            chi[factor] = {{"statistic", r.statistic}, {"df", r.df}, {"p_value", r.p_value}};
        }
        stage["chi_square"] = chi;

        // Per-class IQR outliers for the numeric predictors; counts under
        // the hinge convention ride along so any residual delta against
        // published boxplot counts is explained in place.
        const std::vector<Label> eda_labels = mapped_.labels();
        nlohmann::json outliers = nlohmann::json::object();
        for (const auto& column : {"CreditScore", "Age", "Balance", "EstimatedSalary"}) {
            const auto reports = iqr_outliers(mapped_, column, true);
            nlohmann::json per_class = nlohmann::json::object();
            for (const auto& rep : reports) {
                std::vector<double> vals;
                for (std::size_t r = 0; r < mapped_.n; ++r)
                    if (eda_labels[r] == *rep.class_label)
                        vals.push_back(mapped_.column(column).nums[r]);
                const auto [h1, h3] = tukey_hinges(vals);
                const double hlo = h1 - 1.5 * (h3 - h1), hhi = h3 + 1.5 * (h3 - h1);
                std::size_t hinge_count = 0;
                for (double v : vals)
                    if (v < hlo || v > hhi) ++hinge_count;
                per_class[to_string(*rep.class_label)] = {
                    {"count", rep.outlier_row_indices.size()},
                    {"lower_fence", rep.lower_fence},
                    {"upper_fence", rep.upper_fence},
                    {"count_tukey_hinges", hinge_count}};
            }
            outliers[column] = per_class;
        }
        stage["outliers"] = outliers;
        stage["quartile_convention"] =
            "linear interpolation between order statistics (type 7); "
            "count_tukey_hinges reports the boxplot-hinge alternative";

        // Figure data files.
        figures_.clear();
        auto queue_figure = [&](const std::string& file, FigureKind kind,
                                const std::string& column) {
            FigureSpec spec;
            spec.kind = kind;
            spec.column = column;
            spec.bins = cfg_.histogram_bins;
            figures_.emplace_back(file, spec);
        };
        queue_figure("fig01_credit_score_hist", FigureKind::histogram, "CreditScore");
        queue_figure("fig02_age_hist", FigureKind::histogram, "Age");
        queue_figure("fig03_balance_hist", FigureKind::histogram, "Balance");
        queue_figure("fig04_estimated_salary_hist", FigureKind::histogram, "EstimatedSalary");
        queue_figure("fig05_tenure_bar", FigureKind::bar, "Tenure");
        queue_figure("fig06_num_products_bar", FigureKind::bar, "NumOfProducts");
        queue_figure("fig07_gender_by_class", FigureKind::stacked_bar, "Gender");
        queue_figure("fig08_geography_by_class", FigureKind::stacked_bar, "Geography");
        queue_figure("fig09_has_cr_card_by_class", FigureKind::stacked_bar, "HasCrCard");
        queue_figure("fig10_is_active_by_class", FigureKind::stacked_bar, "IsActiveMember");
        queue_figure("fig11_num_products_by_class", FigureKind::stacked_bar, "NumOfProducts");
        nlohmann::json figure_list = nlohmann::json::array();
        for (const auto& [file, spec] : figures_) figure_list.push_back(file + ".csv");
        stage["figure_files"] = figure_list;
        return stage;
    }

    // -- shared fitting helpers ----------------------------------------------

    struct FittedEntry {
        std::string name;
        Pipeline pipeline;
        nlohmann::json grid;  // empty when the family is not tuned
        exp_detail::EvalRecord train_eval, test_eval;
    };

    CvSpec cv_spec(std::uint64_t stage_seed) const {
        CvSpec cv;
        cv.folds = cfg_.cv_folds;
        cv.repeats = cfg_.cv_repeats;
        cv.stratified = true;
        cv.seed = derive_seed(stage_seed, "cv");
        return cv;
    }

    ModelSpec base_spec(Family family, std::uint64_t stage_seed) const {
        ModelSpec spec;
        spec.family = family;
        spec.seed = derive_seed(stage_seed, "fit." + to_string(family));
        switch (family) {
            case Family::rf:
                spec.hyper["n_trees"] = cfg_.rf_trees;
                break;
            case Family::ann:
                spec.hyper["max_iter"] = cfg_.ann_max_iter;
                break;
            case Family::svm:
                spec.hyper["C"] = cfg_.svm_cost;
                break;
            default: break;
        }
        return spec;
    }

    Grid family_grid(Family family) const {
        switch (family) {
            case Family::knn: return {{"k", cfg_.knn_grid_k}};
            case Family::cart: return {{"cp", cfg_.cart_grid_cp}};
            case Family::rf: return {{"mtry", cfg_.rf_grid_mtry}};
            case Family::ann:
                return {{"size", cfg_.ann_grid_size}, {"decay", cfg_.ann_grid_decay}};
            default: return {};
        }
    }

    /// Grid-tunes (when the family has a grid), refits on all training rows,
    /// and evaluates on both partitions.
    FittedEntry fit_and_evaluate(const std::string& name, Family family,
                                 std::uint64_t stage_seed, const FeatureTable& train,
                                 const FeatureTable& test, bool tune,
                                 const std::map<std::string, double>& fixed_hyper = {},
                                 bool rf_train_oob = false) {
        const auto t0 = std::chrono::steady_clock::now();
        log(std::string("  ") + (tune ? "tuning " : "fitting ") + name + " on " +
            std::to_string(train.n_rows) + " rows");
        FittedEntry e;
        e.name = name;
        ModelSpec spec = base_spec(family, stage_seed);
        for (const auto& [k, v] : fixed_hyper) spec.hyper[k] = v;
        Grid grid = tune ? family_grid(family) : Grid{};
        // Drop grid axes that are pinned by fixed_hyper.
        for (const auto& [k, v] : fixed_hyper) grid.erase(k);
        if (tune && !grid.empty()) {
            // mtry values above the feature count cannot be fitted; trim.
            if (auto it = grid.find("mtry"); it != grid.end()) {
                std::vector<double> ok;
                for (double v : it->second)
                    if (v <= static_cast<double>(train.n_cols)) ok.push_back(v);
                it->second = ok;
            }
            GridResult gr = grid_search(spec, grid, train, cv_spec(stage_seed));
            e.grid = exp_detail::grid_json(gr);
            e.pipeline = std::move(gr.best_model);
        } else {
            e.pipeline = Pipeline::fit(spec, train);
        }
        std::vector<double> train_scores;
        if (rf_train_oob && family == Family::rf) {
            train_scores =
                dynamic_cast<const RandomForestClassifier&>(e.pipeline.model()).oob_scores();
        } else {
            train_scores = e.pipeline.predict_scores(train);
        }
        e.train_eval = exp_detail::evaluate_scores(std::move(train_scores), train.labels);
        e.test_eval = exp_detail::evaluate_scores(e.pipeline.predict_scores(test), test.labels);
        log("  " + name + " done in " +
            std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - t0)
                               .count()) +
            " ms");
        return e;
    }

    nlohmann::json entry_json(const FittedEntry& e) const {
        nlohmann::json j;
        j["hyperparameters"] = e.pipeline.spec().hyper;
        j["seed"] = e.pipeline.spec().seed;
        if (!e.grid.is_null() && !e.grid.empty()) j["grid"] = e.grid;
        j["train"] = exp_detail::to_json(e.train_eval);
        j["test"] = exp_detail::to_json(e.test_eval);
        return j;
    }

    void queue_model_dump(const std::string& stage, const FittedEntry& e) {
        model_dumps_.emplace_back(stage + "_" + e.name, e.pipeline.to_json());
    }

    struct SplitTables {
        FeatureTable train, test;
        SplitIndices idx;
    };

    SplitTables split_encoded(const Dataset& ds, std::uint64_t seed) const {
        const FeatureTable all = dummy_encode(ds, encoder_);
        SplitSpec sp;
        sp.train_fraction = cfg_.train_fraction;
        sp.seed = seed;
        sp.stratified = true;
        SplitTables st{{}, {}, split_indices(all.labels, sp)};
        st.train = all.take_rows(st.idx.train);
        st.test = all.take_rows(st.idx.test);
        return st;
    }

    static nlohmann::json split_json(const SplitIndices& idx) {
        return {{"train_indices", idx.train}, {"test_indices", idx.test}};
    }

    // -- stage: compare ------------------------------------------------------

    nlohmann::json stage_compare() {
        const std::uint64_t seed = derive_seed(cfg_.master_seed, "stage.compare");
        nlohmann::json stage;
        stage["seed"] = seed;
        const SplitTables st = split_encoded(mapped_, derive_seed(seed, "split"));
        stage["split"] = split_json(st.idx);
        stage["rf_train_evaluation"] = "resubstitution";

        const std::vector<std::pair<std::string, Family>> families = {
            {"gnb", Family::gnb}, {"knn", Family::knn},   {"svm", Family::svm},
            {"cart", Family::cart}, {"rf", Family::rf},   {"ann", Family::ann}};

        std::vector<FittedEntry> entries;
        for (const auto& [name, family] : families) {
            const bool tune = family != Family::gnb && family != Family::svm;
            entries.push_back(fit_and_evaluate(name, family, seed, st.train, st.test, tune));
            queue_model_dump("compare", entries.back());
        }

        nlohmann::json models = nlohmann::json::object();
        for (const auto& e : entries) models[e.name] = entry_json(e);
        stage["models"] = std::move(models);

        const std::vector<std::string> rows = {"Kappa", "Accuracy", "Precision", "Recall", "F1"};
        const std::vector<std::string> cols = {"Naive Bayes", "k-nn",          "SVM",
                                               "Decision Trees", "Random Forest", "ANN"};
        std::vector<const MetricSet*> train_cols, test_cols;
        for (const auto& e : entries) {
            train_cols.push_back(&e.train_eval.metrics);
            test_cols.push_back(&e.test_eval.metrics);
        }
        stage["tables"]["table03_train_initial"] =
            exp_detail::metric_table("table03_train_initial", "Table 3",
                                     "Performance measures for the training set", rows, cols,
                                     train_cols)
                .to_json();
        stage["tables"]["table04_test_initial"] =
            exp_detail::metric_table("table04_test_initial", "Table 4",
                                     "Performance measures for the testing set", rows, cols,
                                     test_cols)
                .to_json();
        return stage;
    }

    // -- stage: select -------------------------------------------------------

    nlohmann::json stage_select() {
        const std::uint64_t seed = derive_seed(cfg_.master_seed, "stage.select");
        nlohmann::json stage;
        stage["seed"] = seed;
        const SplitTables st = split_encoded(mapped_, derive_seed(seed, "split"));
        stage["split"] = split_json(st.idx);
        stage["rf_train_evaluation"] = "resubstitution";

        // Embedded rankings from the reference-tuned tree models.
        log("  computing embedded importance rankings");
        ModelSpec cart_spec = base_spec(Family::cart, seed);
        cart_spec.hyper["cp"] = cfg_.initial_cart_cp;
        ModelSpec rf_spec = base_spec(Family::rf, seed);
        rf_spec.hyper["mtry"] = cfg_.initial_rf_mtry;
        const EmbeddedRankings rankings = embedded_rankings(st.train, cart_spec, rf_spec);
        stage["rankings"] = {{"cart", churnkit::to_json(rankings.cart)},
                             {"rf_mda", churnkit::to_json(rankings.rf_mda)},
                             {"rf_mdg", churnkit::to_json(rankings.rf_mdg)}};

        // Table 5: decision-tree scores next to the forest's accuracy ranking.
        ReportTable t5;
        t5.id = "table05_importance";
        t5.tag = "Table 5";
        t5.caption = "Variable importance by tree-based models";
        t5.corner = "Rank";
        t5.col_labels = {"Decision Trees Variable", "Decision Trees Score",
                         "Random Forest Variable", "Random Forest Score"};
        for (std::size_t i = 0; i < rankings.cart.entries.size(); ++i) {
            t5.row_labels.push_back(std::to_string(i + 1));
            t5.cells.push_back({rankings.cart.entries[i].first,
                                rankings.cart.entries[i].second,
                                rankings.rf_mda.entries[i].first,
                                rankings.rf_mda.entries[i].second});
        }
        stage["tables"]["table05_importance"] = t5.to_json();

        // Figure 12 data: both forest criteria side by side.
        {
            FigureData fd;
            fd.header = {"variable", "mean_decrease_accuracy", "mean_decrease_gini"};
            for (const auto& [name, score] : rankings.rf_mda.entries)
                fd.rows.push_back({name, csv::format_fixed(score, 3),
                                   csv::format_fixed(rankings.rf_mdg.score_of(name), 3)});
            figure_tables_.emplace_back("fig12_rf_importance", fd);
            stage["figure_files"] = nlohmann::json::array({"fig12_rf_importance.csv"});
        }

        // RFE over the configured subset sizes.
        log("  running recursive feature elimination");
        CvSpec rfe_cv;
        rfe_cv.folds = cfg_.rfe_folds;
        rfe_cv.repeats = cfg_.rfe_repeats;
        rfe_cv.stratified = true;
        rfe_cv.seed = derive_seed(seed, "rfe");
        std::vector<std::size_t> sizes;
        for (double s : cfg_.rfe_sizes)
            if (s >= 1 && s <= static_cast<double>(st.train.n_cols))
                sizes.push_back(static_cast<std::size_t>(s));
        ModelSpec rfe_base = base_spec(Family::rf, seed);
        const RfeResult rfe_res = rfe(st.train, sizes, rfe_cv, rfe_base);
        {
            nlohmann::json rj;
            rj["sizes"] = rfe_res.sizes;
            rj["cv_accuracy"] = rfe_res.cv_accuracy;
            rj["cv_kappa"] = rfe_res.cv_kappa;
            rj["per_resample_accuracy"] = rfe_res.per_resample_accuracy;
            rj["chosen_size"] = rfe_res.chosen_size;
            rj["chosen_variables"] = rfe_res.chosen_variables;
            stage["rfe"] = std::move(rj);
        }

        // The study's named top-5 subset, expanded to model columns.
        const std::vector<std::string> top5 = top5_subset();
        const std::vector<std::string> top5_cols = expand_to_model_columns(top5, encoder_);
        stage["top5"] = {{"predictors", top5}, {"model_columns", top5_cols}};
        const FeatureTable train5 = st.train.select_columns(top5_cols);
        const FeatureTable test5 = st.test.select_columns(top5_cols);

        // Initial models (all features, reference tuned values) vs re-tuned top-5 models.
        const auto rf_initial = fit_and_evaluate(
            "rf_initial", Family::rf, seed, st.train, st.test, false,
            {{"mtry", cfg_.initial_rf_mtry}});
        const auto ann_initial = fit_and_evaluate(
            "ann_initial", Family::ann, seed, st.train, st.test, false,
            {{"size", cfg_.initial_ann_size}, {"decay", cfg_.initial_ann_decay}});
        const auto rf_selected =
            fit_and_evaluate("rf_selected", Family::rf, seed, train5, test5, true);
        const auto ann_selected =
            fit_and_evaluate("ann_selected", Family::ann, seed, train5, test5, true);
        queue_model_dump("select", rf_selected);
        queue_model_dump("select", ann_selected);

        nlohmann::json models = nlohmann::json::object();
        for (const auto* e : {&rf_initial, &ann_initial, &rf_selected, &ann_selected})
            models[e->name] = entry_json(*e);

        // Side experiment: the forest on the top four predictors alone.
        {
            std::vector<std::string> top4 = top5;
            top4.erase(std::remove(top4.begin(), top4.end(), "Geography"), top4.end());
            const auto cols4 = expand_to_model_columns(top4, encoder_);
            const auto rf_top4 = fit_and_evaluate("rf_top4", Family::rf, seed,
                                                  st.train.select_columns(cols4),
                                                  st.test.select_columns(cols4), true);
            nlohmann::json sj = entry_json(rf_top4);
            sj["predictors"] = top4;
            stage["side_experiments"]["rf_top4"] = std::move(sj);
        }
        stage["models"] = std::move(models);

        const std::vector<std::string> rows = {"Sensitivity", "Specificity", "Kappa",
                                               "Accuracy",    "Precision",   "Recall", "F1"};
        const std::vector<std::string> cols = {
            "Random Forest Initial", "Random Forest After Feature Selection", "ANN Initial",
            "ANN After Feature Selection"};
        stage["tables"]["table06_train_selected"] =
            exp_detail::metric_table(
                "table06_train_selected", "Table 6",
                "Performance measures following feature selection for the training set", rows,
                cols,
                {&rf_initial.train_eval.metrics, &rf_selected.train_eval.metrics,
                 &ann_initial.train_eval.metrics, &ann_selected.train_eval.metrics})
                .to_json();
        stage["tables"]["table07_test_selected"] =
            exp_detail::metric_table(
                "table07_test_selected", "Table 7",
                "Performance measures following feature selection for the testing set", rows,
                cols,
                {&rf_initial.test_eval.metrics, &rf_selected.test_eval.metrics,
                 &ann_initial.test_eval.metrics, &ann_selected.test_eval.metrics})
                .to_json();
        return stage;
    }

    // -- stage: balance ------------------------------------------------------

    /// Tunes + fits on a resampled training table, evaluates the training
    /// side on that same (resampled) table and the test side untouched.
    FittedEntry fit_resampled(const std::string& name, Family family, std::uint64_t seed,
                              const FeatureTable& train, const FeatureTable& test,
                              ResampleKind kind) {
        ResamplePlan plan;
        plan.kind = kind;
        plan.k_neighbors = cfg_.smote_k;
        plan.seed = derive_seed(seed, "resample." + name);
        const FeatureTable balanced = resample(train, plan);
        return fit_and_evaluate(name, family, seed, balanced, test, true, {}, true);
    }

    nlohmann::json stage_balance() {
        const std::uint64_t seed = derive_seed(cfg_.master_seed, "stage.balance");
        nlohmann::json stage;
        stage["seed"] = seed;
        const SplitTables st = split_encoded(mapped_, derive_seed(seed, "split"));
        stage["split"] = split_json(st.idx);
        stage["rf_train_evaluation"] = "oob_for_resampled";

        const auto top5_cols = expand_to_model_columns(top5_subset(), encoder_);
        const FeatureTable train5 = st.train.select_columns(top5_cols);
        const FeatureTable test5 = st.test.select_columns(top5_cols);

        const auto rf_initial = fit_and_evaluate(
            "rf_initial", Family::rf, seed, train5, test5, false,
            {{"mtry", cfg_.initial_rf_mtry_top5}});
        const auto ann_initial = fit_and_evaluate(
            "ann_initial", Family::ann, seed, train5, test5, false,
            {{"size", cfg_.initial_ann_size}, {"decay", cfg_.initial_ann_decay}});

        const auto rf_under =
            fit_resampled("rf_under", Family::rf, seed, train5, test5, ResampleKind::under);
        const auto rf_smote =
            fit_resampled("rf_smote", Family::rf, seed, train5, test5, ResampleKind::smote);
        const auto ann_under =
            fit_resampled("ann_under", Family::ann, seed, train5, test5, ResampleKind::under);
        const auto ann_smote =
            fit_resampled("ann_smote", Family::ann, seed, train5, test5, ResampleKind::smote);
        queue_model_dump("balance", rf_under);
        queue_model_dump("balance", rf_smote);
        queue_model_dump("balance", ann_under);
        queue_model_dump("balance", ann_smote);

        nlohmann::json models = nlohmann::json::object();
        for (const auto* e :
             {&rf_initial, &rf_under, &rf_smote, &ann_initial, &ann_under, &ann_smote})
            models[e->name] = entry_json(*e);
        stage["models"] = std::move(models);

        const std::vector<std::string> rows = {"Sensitivity", "Specificity", "Kappa", "Accuracy",
                                               "Precision",   "Recall",      "F1",    "ROC"};
        const std::vector<std::string> cols = {
            "Random Forest Initial", "Random Forest Under-Sampled", "Random Forest Over-Sampled",
            "ANN Initial",           "ANN Under-Sampled",           "ANN Over-Sampled"};
        stage["tables"]["table08_train_balanced"] =
            exp_detail::metric_table(
                "table08_train_balanced", "Table 8",
                "Performance measures following balancing data for the training set", rows, cols,
                {&rf_initial.train_eval.metrics, &rf_under.train_eval.metrics,
                 &rf_smote.train_eval.metrics, &ann_initial.train_eval.metrics,
                 &ann_under.train_eval.metrics, &ann_smote.train_eval.metrics})
                .to_json();
        stage["tables"]["table09_test_balanced"] =
            exp_detail::metric_table(
                "table09_test_balanced", "Table 9",
                "Performance measures following balancing data for the testing set", rows, cols,
                {&rf_initial.test_eval.metrics, &rf_under.test_eval.metrics,
                 &rf_smote.test_eval.metrics, &ann_initial.test_eval.metrics,
                 &ann_under.test_eval.metrics, &ann_smote.test_eval.metrics})
                .to_json();
        return stage;
    }

    // -- stage: outliers -----------------------------------------------------

    nlohmann::json stage_outliers() {
        const std::uint64_t seed = derive_seed(cfg_.master_seed, "stage.outliers");
        nlohmann::json stage;
        stage["seed"] = seed;
        stage["rf_train_evaluation"] = "oob_for_resampled";

        // Remove the Age outliers of the Stayed class before splitting.
        const auto reports = iqr_outliers(mapped_, "Age", true);
        const OutlierReport& stayed = report_for_class(reports, Label::Stayed);
        const Dataset cleaned = remove_rows(mapped_, stayed.outlier_row_indices);
        stage["removed_rows"] = stayed.outlier_row_indices.size();
        stage["rows_after_cleaning"] = cleaned.n;

        const auto top5_cols = expand_to_model_columns(top5_subset(), encoder_);

        auto run_side = [&](const Dataset& ds, const std::string& tag) {
            const SplitTables st = split_encoded(ds, derive_seed(seed, "split." + tag));
            const FeatureTable train5 = st.train.select_columns(top5_cols);
            const FeatureTable test5 = st.test.select_columns(top5_cols);
            std::map<std::string, FittedEntry> out;
            out.emplace("rf", fit_resampled("rf_" + tag, Family::rf, seed, train5, test5,
                                            ResampleKind::smote));
            out.emplace("ann", fit_resampled("ann_" + tag, Family::ann, seed, train5, test5,
                                             ResampleKind::smote));
            return std::make_pair(split_json(st.idx), std::move(out));
        };

        auto [initial_split, initial] = run_side(mapped_, "initial");
        auto [cleaned_split, cleaned_fits] = run_side(cleaned, "cleaned");
        stage["split_initial"] = initial_split;
        stage["split_cleaned"] = cleaned_split;
        queue_model_dump("outliers", cleaned_fits.at("rf"));
        queue_model_dump("outliers", cleaned_fits.at("ann"));

        nlohmann::json models = nlohmann::json::object();
        for (const auto& [k, e] : initial) models[e.name] = entry_json(e);
        for (const auto& [k, e] : cleaned_fits) models[e.name] = entry_json(e);
        stage["models"] = std::move(models);

        const std::vector<std::string> rows = {"Sensitivity", "Specificity", "Kappa", "Accuracy",
                                               "Precision",   "Recall",      "F1"};
        const std::vector<std::string> cols = {"Random Forest Initial", "Random Forest Cleaned",
                                               "ANN Initial", "ANN Cleaned"};
        stage["tables"]["table10_train_outliers"] =
            exp_detail::metric_table(
                "table10_train_outliers", "Table 10",
                "Performance measures in the absence of outliers for the training set", rows,
                cols,
                {&initial.at("rf").train_eval.metrics, &cleaned_fits.at("rf").train_eval.metrics,
                 &initial.at("ann").train_eval.metrics,
                 &cleaned_fits.at("ann").train_eval.metrics})
                .to_json();
        stage["tables"]["table11_test_outliers"] =
            exp_detail::metric_table(
                "table11_test_outliers", "Table 11",
                "Performance measures in the absence of outliers for the testing set", rows, cols,
                {&initial.at("rf").test_eval.metrics, &cleaned_fits.at("rf").test_eval.metrics,
                 &initial.at("ann").test_eval.metrics,
                 &cleaned_fits.at("ann").test_eval.metrics})
                .to_json();
        return stage;
    }

    // -- output --------------------------------------------------------------

    void write_outputs() {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(cfg_.out_dir, ec);
        fs::create_directories(fs::path(cfg_.out_dir) / "figures", ec);
        fs::create_directories(fs::path(cfg_.out_dir) / "models", ec);

        {
            std::ofstream out(fs::path(cfg_.out_dir) / "manifest.json", std::ios::binary);
            if (!out) fail("cannot write manifest.json under " + cfg_.out_dir);
            out << manifest_.dump(1) << '\n';
        }
        {
            std::ofstream out(fs::path(cfg_.out_dir) / "timings.json", std::ios::binary);
            out << timings_.dump(1) << '\n';
        }
        emit_report(manifest_, "csv", cfg_.out_dir);

        for (const auto& [file, spec] : figures_)
            emit_figure_data(mapped_, spec,
                             (fs::path(cfg_.out_dir) / "figures" / (file + ".csv")).string());
        for (const auto& [file, fd] : figure_tables_)
            csv::write_file((fs::path(cfg_.out_dir) / "figures" / (file + ".csv")).string(),
                            fd.header, fd.rows);
        for (const auto& [name, j] : model_dumps_) {
            std::ofstream out(fs::path(cfg_.out_dir) / "models" / (name + ".json"),
                              std::ios::binary);
            if (!out) fail("cannot write model dump " + name);
            out << j.dump() << '\n';
        }
    }

    ExperimentConfig cfg_;
    Dataset raw_, mapped_;
    EncoderSpec encoder_;
    bool loaded_ = false;
    std::ostream* log_ = nullptr;
    nlohmann::json manifest_, timings_;
    std::vector<std::pair<std::string, FigureSpec>> figures_;
    std::vector<std::pair<std::string, FigureData>> figure_tables_;
    std::vector<std::pair<std::string, nlohmann::json>> model_dumps_;
};

}  // namespace churnkit
