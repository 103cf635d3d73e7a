#pragma once

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "churnkit/experiments.hpp"
#include "churnkit/serialization.hpp"

namespace churnkit {

namespace cli_detail {

inline std::string fmt3(const std::optional<double>& v) {
    return v ? csv::format_fixed(*v, 3) : std::string("NA");
}

inline void print_inspect(const Dataset& raw, std::ostream& out) {
    out << "Variable          Min         Max        Mean     Std.Dev\n";
    for (const auto& sc : raw.schema) {
        const ColumnSummary s = describe_column(raw, sc.name);
        if (s.numeric) {
            char line[160];
            std::snprintf(line, sizeof line, "%-15s %9.2f %11.2f %11.4f %11.4f\n",
                          sc.name.c_str(), s.min, s.max, s.mean, s.std_dev);
            out << line;
        } else {
            out << sc.name << " (" << to_string(sc.role) << "):";
            for (const auto& [level, count] : s.level_counts)
                out << ' ' << level << '=' << count;
            out << '\n';
        }
    }
    out << "N=" << raw.n << ", no missing values\n";
}

}  // namespace cli_detail

/// The command-line front end, callable in-process for tests. argv excludes
/// the program name. Returns 0 on success, 1 on pipeline errors, 2 on usage
/// errors.
inline int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"churnkit: bank-customer churn classification toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    // Section [experiment] in the file addresses the experiment subcommand's
    // options; command-line flags override file values.
    app.set_config("--config", "", "TOML/INI config file; flags override file values");

    std::string data_path, out_dir = "runs/out", config_path, model_path, manifest_path;
    std::string stage = "all", format = "csv";
    std::uint64_t seed = 42;
    std::size_t threads = 0;
    std::string family_name = "rf", chi2_factor, outlier_column;
    bool do_corr = false;
    bool use_top5 = false;

    auto add_common = [&](CLI::App* cmd, bool needs_data) {
        auto* opt = cmd->add_option("--data", data_path, "path to the churn CSV");
        if (needs_data) opt->required();
        cmd->add_option("--seed", seed, "master seed (default 42)");
        cmd->add_option("--threads", threads, "worker cap, 0 = auto; never changes results");
    };

    auto* inspect = app.add_subcommand("inspect", "print Table-1 style descriptive statistics");
    add_common(inspect, true);

    auto* eda = app.add_subcommand("eda", "exploratory analysis: correlations, chi-square, outliers");
    add_common(eda, true);
    eda->add_option("--chi2", chi2_factor, "factor column: chi-square test against the outcome");
    eda->add_flag("--corr", do_corr, "print the correlation table");
    eda->add_option("--outliers", outlier_column, "numeric column: per-class IQR outlier counts");

    auto* tune = app.add_subcommand("tune", "grid search one family on the 80% training split");
    add_common(tune, true);
    tune->add_option("--family", family_name, "one of gnb knn svm cart rf ann")->required();
    tune->add_flag("--top5", use_top5, "restrict to the study's top-5 predictors");

    auto* train = app.add_subcommand("train", "fit one family on all rows and save the model");
    add_common(train, true);
    train->add_option("--family", family_name, "one of gnb knn svm cart rf ann")->required();
    train->add_option("--out", model_path, "output model JSON path")->required();
    train->add_flag("--top5", use_top5, "restrict to the study's top-5 predictors");

    auto* evaluate = app.add_subcommand("evaluate", "score a saved model against a labeled CSV");
    add_common(evaluate, true);
    evaluate->add_option("--model", model_path, "model JSON produced by train")->required();

    ExperimentConfig exp_cfg;
    auto* experiment = app.add_subcommand("experiment", "run the study's stages end to end");
    add_common(experiment, true);
    experiment->add_option("--stage", stage,
                           "compare|select|balance|outliers|eda|all (default all)");
    experiment->add_option("--out", out_dir, "output directory (default runs/out)");
    experiment->add_option("--format", format, "additional table format: csv|json|markdown");
    experiment->add_option("--train-fraction", exp_cfg.train_fraction,
                           "training share of the split (default 0.8)");
    experiment->add_option("--cv-folds", exp_cfg.cv_folds, "cross-validation folds (default 10)");
    experiment->add_option("--cv-repeats", exp_cfg.cv_repeats,
                           "cross-validation repeats (default 3)");
    experiment->add_option("--rfe-folds", exp_cfg.rfe_folds, "RFE resampling folds (default 10)");
    experiment->add_option("--rfe-repeats", exp_cfg.rfe_repeats,
                           "RFE resampling repeats (default 1)");
    experiment->add_option("--rf-trees", exp_cfg.rf_trees, "trees per forest (default 500)");
    experiment->add_option("--ann-max-iter", exp_cfg.ann_max_iter,
                           "network optimizer iteration cap (default 500)");
    experiment->add_option("--smote-k", exp_cfg.smote_k, "SMOTE neighbor count (default 5)");
    experiment->add_option("--histogram-bins", exp_cfg.histogram_bins,
                           "bins for histogram figure data (default 30)");
    experiment->add_option("--knn-grid", exp_cfg.knn_grid_k, "k values for the k-NN grid");
    experiment->add_option("--cart-grid", exp_cfg.cart_grid_cp, "cp values for the tree grid");
    experiment->add_option("--rf-grid", exp_cfg.rf_grid_mtry, "mtry values for the forest grid");
    experiment->add_option("--ann-size-grid", exp_cfg.ann_grid_size,
                           "hidden-layer sizes for the network grid");
    experiment->add_option("--ann-decay-grid", exp_cfg.ann_grid_decay,
                           "weight-decay values for the network grid");
    experiment->add_option("--rfe-sizes", exp_cfg.rfe_sizes, "subset sizes evaluated by RFE");

    auto* report = app.add_subcommand("report", "re-emit tables from an existing manifest");
    report->add_option("--manifest", manifest_path, "manifest.json path")->required();
    report->add_option("--format", format, "csv|json|markdown")->required();
    report->add_option("--out", out_dir, "output directory")->required();

    std::vector<const char*> cargs;
    cargs.push_back("churnkit");
    for (const auto& a : argv) cargs.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
        // Help requests print the (sub)command help and exit 0; genuine
        // usage errors print a diagnostic and exit 2.
        const int code = app.exit(e, out, err);
        if (code == 0) return 0;
        err << "run with --help for usage\n";
        return 2;
    }

    try {
        set_thread_cap(threads);

        if (inspect->parsed()) {
            const Dataset raw = load_dataset(data_path, churn_schema());
            cli_detail::print_inspect(raw, out);
            return 0;
        }

        if (eda->parsed()) {
            const Dataset raw = load_dataset(data_path, churn_schema());
            const Dataset ds = map_outcome_labels(raw);
            bool did_something = false;
            if (!chi2_factor.empty()) {
                const ChiSquareResult r = chi_square_independence(ds, chi2_factor, "Exited");
                out << "X-squared = " << csv::format_fixed(r.statistic, 2) << ", df = " << r.df
                    << ", p-value = " << r.p_value << '\n';
                did_something = true;
            }
            if (do_corr) {
                const std::vector<std::string> cols = {
                    "Exited", "CreditScore", "Age", "Tenure", "Balance", "NumOfProducts",
                    "EstimatedSalary", "IsActiveMember", "HasCrCard"};
                const CorrelationMatrix m = pearson_correlation_matrix(raw, cols);
                for (std::size_t i = 0; i < cols.size(); ++i) {
                    out << cols[i] << ':';
                    for (std::size_t j = 0; j <= i; ++j)
                        out << ' ' << csv::format_fixed(m.values[i][j], 3);
                    out << '\n';
                }
                did_something = true;
            }
            if (!outlier_column.empty()) {
                for (const auto& rep : iqr_outliers(ds, outlier_column, true))
                    out << outlier_column << " / " << to_string(*rep.class_label) << ": "
                        << rep.outlier_row_indices.size() << " outliers (fences "
                        << csv::format_fixed(rep.lower_fence, 3) << " .. "
                        << csv::format_fixed(rep.upper_fence, 3) << ")\n";
                did_something = true;
            }
            if (!did_something) {
                const ClassCounts cc = class_counts(ds);
                out << "Stayed=" << cc.stayed << " Left=" << cc.left << '\n';
            }
            return 0;
        }

        if (tune->parsed() || train->parsed() || evaluate->parsed()) {
            const Dataset raw = load_dataset(data_path, churn_schema());
            const Dataset ds = map_outcome_labels(raw);
            const EncoderSpec encoder = EncoderSpec::from_schema(ds.schema);
            FeatureTable table = dummy_encode(ds, encoder);
            if (use_top5)
                table = table.select_columns(expand_to_model_columns(top5_subset(), encoder));

            if (evaluate->parsed()) {
                std::ifstream in(model_path, std::ios::binary);
                if (!in) fail("cannot open model file: " + model_path);
                const LoadedPipeline lp =
                    LoadedPipeline::from_json(nlohmann::json::parse(in));
                const auto rec =
                    exp_detail::evaluate_scores(lp.predict_scores(table), table.labels);
                out << "n=" << table.n_rows << " kappa=" << cli_detail::fmt3(rec.metrics.kappa)
                    << " accuracy=" << cli_detail::fmt3(rec.metrics.accuracy)
                    << " precision=" << cli_detail::fmt3(rec.metrics.precision)
                    << " recall=" << cli_detail::fmt3(rec.metrics.recall)
                    << " f1=" << cli_detail::fmt3(rec.metrics.f1)
                    << " roc_auc=" << cli_detail::fmt3(rec.metrics.roc_auc) << '\n';
                return 0;
            }

            const Family family = family_from_string(family_name);
            ExperimentConfig cfg;
            cfg.master_seed = seed;
            if (tune->parsed()) {
                SplitSpec sp;
                sp.seed = derive_seed(seed, "cli.tune.split");
                const SplitIndices idx = split_indices(table.labels, sp);
                const FeatureTable tr = table.take_rows(idx.train);
                ModelSpec spec;
                spec.family = family;
                spec.seed = derive_seed(seed, "cli.tune.fit");
                if (family == Family::rf) spec.hyper["n_trees"] = cfg.rf_trees;
                if (family == Family::ann) spec.hyper["max_iter"] = cfg.ann_max_iter;
                Grid grid;
                if (family == Family::knn) grid = {{"k", cfg.knn_grid_k}};
                else if (family == Family::cart) grid = {{"cp", cfg.cart_grid_cp}};
                else if (family == Family::rf) grid = {{"mtry", cfg.rf_grid_mtry}};
                else if (family == Family::ann)
                    grid = {{"size", cfg.ann_grid_size}, {"decay", cfg.ann_grid_decay}};
                else fail("family " + family_name + " has no tuning grid");
                CvSpec cv;
                cv.folds = cfg.cv_folds;
                cv.repeats = cfg.cv_repeats;
                cv.seed = derive_seed(seed, "cli.tune.cv");
                const GridResult gr = grid_search(spec, grid, tr, cv);
                out << "best:";
                for (const auto& [k, v] : gr.best_spec().hyper) out << ' ' << k << '=' << v;
                out << " (cv accuracy " << csv::format_fixed(gr.best_result().mean_accuracy(), 4)
                    << ", kappa " << csv::format_fixed(gr.best_result().mean_kappa(), 4) << ")\n";
                return 0;
            }

            // train
            ModelSpec spec;
            spec.family = family;
            spec.seed = derive_seed(seed, "cli.train.fit");
            if (family == Family::rf) spec.hyper["n_trees"] = cfg.rf_trees;
            if (family == Family::ann) spec.hyper["max_iter"] = cfg.ann_max_iter;
            const Pipeline p = Pipeline::fit(spec, table);
            std::ofstream mo(model_path, std::ios::binary);
            if (!mo) fail("cannot write model file: " + model_path);
            mo << p.to_json().dump() << '\n';
            const auto rec = exp_detail::evaluate_scores(p.predict_scores(table), table.labels);
            out << "trained " << family_name << " on " << table.n_rows
                << " rows; training kappa=" << cli_detail::fmt3(rec.metrics.kappa)
                << " accuracy=" << cli_detail::fmt3(rec.metrics.accuracy) << '\n';
            err << "model written to " << model_path << '\n';
            return 0;
        }

        if (experiment->parsed()) {
            ExperimentConfig cfg = exp_cfg;
            cfg.data_path = data_path;
            cfg.out_dir = out_dir;
            cfg.master_seed = seed;
            ExperimentRunner runner(cfg);
            runner.set_log(&err);
            runner.run(stage);
            if (format != "csv") emit_report(runner.manifest(), format, out_dir);
            const auto& stages = runner.manifest().at("stages");
            out << "stages run:";
            for (const auto& [name, s] : stages.items()) out << ' ' << name;
            out << "\nmanifest: " << out_dir << "/manifest.json\n";
            return 0;
        }

        if (report->parsed()) {
            std::ifstream in(manifest_path, std::ios::binary);
            if (!in) fail("cannot open manifest: " + manifest_path);
            nlohmann::json manifest = nlohmann::json::parse(in);
            const auto files = emit_report(manifest, format, out_dir);
            for (const auto& f : files) out << f << '\n';
            return 0;
        }

        err << "error: no subcommand executed\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace churnkit
