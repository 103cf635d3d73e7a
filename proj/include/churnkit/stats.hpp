#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "churnkit/dataset.hpp"
#include "churnkit/special.hpp"

namespace churnkit {

// ---------------------------------------------------------------------------
// Correlations

struct CorrelationMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> values;  // symmetric, unit diagonal

    double at(const std::string& a, const std::string& b) const {
        return values[index_of(a)][index_of(b)];
    }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == name) return i;
        fail("correlation matrix has no column " + name);
    }
};

namespace detail {

/// Numeric view of a column; a mapped outcome is coded Stayed=0, Left=1.
inline std::vector<double> numeric_view(const Dataset& ds, const std::string& name) {
    const Column& col = ds.column(name);
    if (!col.is_text()) return col.nums;
    const ColumnSchema& sc = ds.schema[ds.column_index(name)];
    if (sc.role == ColumnRole::outcome) {
        std::vector<double> v(ds.n);
        for (std::size_t r = 0; r < ds.n; ++r)
            v[r] = col.cats[r] == "Left" ? 1.0 : 0.0;
        return v;
    }
    fail("column " + name + " is categorical; it has no numeric view");
}

}  // namespace detail

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && !x.empty(), "pearson: length mismatch");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) fail("pearson: zero-variance column, r undefined");
    return sxy / std::sqrt(sxx * syy);
}

inline CorrelationMatrix pearson_correlation_matrix(const Dataset& ds,
                                                    const std::vector<std::string>& columns) {
    require(!columns.empty(), "pearson_correlation_matrix: no columns given");
    CorrelationMatrix m;
    m.labels = columns;
    std::vector<std::vector<double>> views;
    views.reserve(columns.size());
    for (const auto& c : columns) views.push_back(detail::numeric_view(ds, c));
    const std::size_t k = columns.size();
    m.values.assign(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i) {
        m.values[i][i] = 1.0;
        for (std::size_t j = i + 1; j < k; ++j) {
            double r = 0;
            try {
                r = pearson(views[i], views[j]);
            } catch (const Error&) {
                fail("correlation undefined for pair (" + columns[i] + ", " + columns[j] +
                     "): zero variance");
            }
            m.values[i][j] = r;
            m.values[j][i] = r;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Chi-square test of independence

struct ChiSquareResult {
    double statistic = 0;
    int df = 0;
    double p_value = 1;
};

enum class ChiSquareCorrection { automatic, none, yates };

namespace detail {

/// Distinct level keys of a column, in a fixed order. Numeric columns must be
/// small-integer-like factors (at most 20 distinct values).
inline std::vector<std::string> level_keys(const Dataset& ds, const std::string& name,
                                           std::vector<std::string>& row_keys) {
    const Column& col = ds.column(name);
    row_keys.resize(ds.n);
    if (col.is_text()) {
        for (std::size_t r = 0; r < ds.n; ++r) row_keys[r] = col.cats[r];
    } else {
        for (std::size_t r = 0; r < ds.n; ++r) {
            double v = col.nums[r];
            if (v != std::floor(v))
                fail("column " + name + " is not factor-like (non-integer value)");
            row_keys[r] = std::to_string(static_cast<long long>(v));
        }
    }
    std::vector<std::string> levels = row_keys;
    std::sort(levels.begin(), levels.end(), [&](const std::string& a, const std::string& b) {
        if (!col.is_text()) return std::stoll(a) < std::stoll(b);
        return a < b;
    });
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (!col.is_text() && levels.size() > 20)
        fail("column " + name + " has too many distinct values to treat as a factor");
    return levels;
}

}  // namespace detail

/// Contingency table factor x outcome. Yates' continuity correction follows
/// the convention of mainstream statistical software: applied to 2x2 tables
/// only (with the min(0.5, min|O-E|) clamp), never to larger ones. The
/// study's df=1 statistics reproduce only under that rule.
inline ChiSquareResult chi_square_independence(
    const Dataset& ds, const std::string& factor, const std::string& outcome,
    ChiSquareCorrection correction = ChiSquareCorrection::automatic) {
    std::vector<std::string> fk, ok;
    const std::vector<std::string> flev = detail::level_keys(ds, factor, fk);
    const std::vector<std::string> olev = detail::level_keys(ds, outcome, ok);
    const std::size_t R = flev.size(), C = olev.size();
    if (R < 2 || C < 2)
        fail("chi-square: degenerate table (" + factor + " x " + outcome + " has a single level)");

    std::map<std::string, std::size_t> fidx, oidx;
    for (std::size_t i = 0; i < R; ++i) fidx[flev[i]] = i;
    for (std::size_t j = 0; j < C; ++j) oidx[olev[j]] = j;

    std::vector<std::vector<double>> obs(R, std::vector<double>(C, 0.0));
    for (std::size_t r = 0; r < ds.n; ++r) obs[fidx[fk[r]]][oidx[ok[r]]] += 1.0;

    std::vector<double> row_tot(R, 0.0), col_tot(C, 0.0);
    double total = 0;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            row_tot[i] += obs[i][j];
            col_tot[j] += obs[i][j];
            total += obs[i][j];
        }

    bool use_yates = correction == ChiSquareCorrection::yates ||
                     (correction == ChiSquareCorrection::automatic && R == 2 && C == 2);
    double clamp = 0.0;
    if (use_yates) {
        clamp = 0.5;
        for (std::size_t i = 0; i < R; ++i)
            for (std::size_t j = 0; j < C; ++j) {
                const double e = row_tot[i] * col_tot[j] / total;
                clamp = std::min(clamp, std::fabs(obs[i][j] - e));
            }
    }

    ChiSquareResult res;
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            const double e = row_tot[i] * col_tot[j] / total;
            require(e > 0.0, "chi-square: zero expected count");
            const double d = std::fabs(obs[i][j] - e) - clamp;
            res.statistic += d * d / e;
        }
    res.df = static_cast<int>((R - 1) * (C - 1));
    res.p_value = chi_square_survival(res.statistic, res.df);
    return res;
}

// ---------------------------------------------------------------------------
// Quantiles and IQR outliers

/// Linear interpolation between order statistics (R's default type 7).
inline double quantile_linear(std::vector<double> x, double p) {
    require(!x.empty(), "quantile of empty sample");
    require(p >= 0.0 && p <= 1.0, "quantile: p outside [0,1]");
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= x.size()) return x.back();
    const double frac = h - static_cast<double>(lo);
    return x[lo] + frac * (x[lo + 1] - x[lo]);
}

/// Tukey's hinges (the boxplot/fivenum convention), for reporting outlier
/// counts under the alternative quartile definition.
inline std::pair<double, double> tukey_hinges(std::vector<double> x) {
    require(!x.empty(), "hinges of empty sample");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    const double n4 = std::floor((n + 3.0) / 2.0) / 2.0;
    auto at = [&](double pos) {  // 1-based, possibly half-integral
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos)) - 1;
        const std::size_t hi = static_cast<std::size_t>(std::ceil(pos)) - 1;
        return 0.5 * (x[lo] + x[hi]);
    };
    return {at(n4), at(n + 1.0 - n4)};
}

struct OutlierReport {
    std::string column;
    std::optional<Label> class_label;  // absent when computed over all rows
    double lower_fence = 0, upper_fence = 0;
    std::vector<std::size_t> outlier_row_indices;  // indices into the dataset
};

namespace detail {

inline OutlierReport iqr_report(const Dataset& ds, const std::string& column,
                                const std::vector<std::size_t>& rows,
                                std::optional<Label> cls) {
    require(rows.size() >= 4, "iqr_outliers: fewer than 4 rows in class");
    const Column& col = ds.column(column);
    require(!col.is_text(), "iqr_outliers: column " + column + " is not numeric");
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (std::size_t r : rows) vals.push_back(col.nums[r]);
    const double q1 = quantile_linear(vals, 0.25);
    const double q3 = quantile_linear(vals, 0.75);
    const double iqr = q3 - q1;
    OutlierReport rep;
    rep.column = column;
    rep.class_label = cls;
    rep.lower_fence = q1 - 1.5 * iqr;
    rep.upper_fence = q3 + 1.5 * iqr;
    for (std::size_t r : rows) {
        const double v = col.nums[r];
        if (v < rep.lower_fence || v > rep.upper_fence) rep.outlier_row_indices.push_back(r);
    }
    return rep;
}

}  // namespace detail

/// Tukey fences per outcome class (by_class) or over all rows. Flagged rows
/// lie strictly outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR].
inline std::vector<OutlierReport> iqr_outliers(const Dataset& ds, const std::string& column,
                                               bool by_class) {
    std::vector<OutlierReport> reports;
    if (!by_class) {
        std::vector<std::size_t> all(ds.n);
        for (std::size_t r = 0; r < ds.n; ++r) all[r] = r;
        reports.push_back(detail::iqr_report(ds, column, all, std::nullopt));
        return reports;
    }
    const std::vector<Label> labels = ds.labels();
    for (Label cls : {Label::Stayed, Label::Left}) {
        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < ds.n; ++r)
            if (labels[r] == cls) rows.push_back(r);
        reports.push_back(detail::iqr_report(ds, column, rows, cls));
    }
    return reports;
}

inline const OutlierReport& report_for_class(const std::vector<OutlierReport>& reports, Label cls) {
    for (const auto& r : reports)
        if (r.class_label && *r.class_label == cls) return r;
    fail("no outlier report for class " + to_string(cls));
}

// ---------------------------------------------------------------------------
// Class distribution across factor levels

struct LevelClassCounts {
    std::size_t stayed = 0, left = 0;
};

inline std::map<std::string, LevelClassCounts> class_distribution_by_level(
    const Dataset& ds, const std::string& factor) {
    std::vector<std::string> keys;
    detail::level_keys(ds, factor, keys);  // validates factor-likeness
    const std::vector<Label> labels = ds.labels();
    std::map<std::string, LevelClassCounts> out;
    for (std::size_t r = 0; r < ds.n; ++r) {
        auto& cell = out[keys[r]];
        (labels[r] == Label::Left ? cell.left : cell.stayed)++;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Figure data emission

enum class FigureKind { histogram, bar, stacked_bar };

struct FigureSpec {
    FigureKind kind = FigureKind::histogram;
    std::string column;
    std::size_t bins = 30;  // histogram only
};

struct FigureData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline FigureData figure_data(const Dataset& ds, const FigureSpec& spec) {
    require(!spec.column.empty(), "figure: no column selected");
    FigureData fd;
    switch (spec.kind) {
        case FigureKind::histogram: {
            const Column& col = ds.column(spec.column);
            require(!col.is_text(), "histogram needs a numeric column");
            require(spec.bins >= 1, "histogram needs at least one bin");
            const double lo = *std::min_element(col.nums.begin(), col.nums.end());
            const double hi = *std::max_element(col.nums.begin(), col.nums.end());
            const double width = hi > lo ? (hi - lo) / static_cast<double>(spec.bins) : 1.0;
            std::vector<std::size_t> counts(spec.bins, 0);
            for (double v : col.nums) {
                std::size_t b = hi > lo
                                    ? std::min(spec.bins - 1,
                                               static_cast<std::size_t>((v - lo) / width))
                                    : 0;
                counts[b]++;
            }
            fd.header = {"bin_low", "bin_high", "count"};
            for (std::size_t b = 0; b < spec.bins; ++b)
                fd.rows.push_back({csv::format_fixed(lo + width * static_cast<double>(b), 6),
                                   csv::format_fixed(lo + width * static_cast<double>(b + 1), 6),
                                   std::to_string(counts[b])});
            return fd;
        }
        case FigureKind::bar: {
            std::vector<std::string> keys;
            const auto levels = detail::level_keys(ds, spec.column, keys);
            std::map<std::string, std::size_t> counts;
            for (const auto& k : keys) counts[k]++;
            fd.header = {"level", "count"};
            for (const auto& lv : levels)
                fd.rows.push_back({lv, std::to_string(counts[lv])});
            return fd;
        }
        case FigureKind::stacked_bar: {
            std::vector<std::string> keys;
            const auto levels = detail::level_keys(ds, spec.column, keys);
            const auto dist = class_distribution_by_level(ds, spec.column);
            fd.header = {"level", "count_Stayed", "count_Left"};
            for (const auto& lv : levels) {
                const auto& cell = dist.at(lv);
                fd.rows.push_back(
                    {lv, std::to_string(cell.stayed), std::to_string(cell.left)});
            }
            return fd;
        }
    }
    fail("unknown figure kind");
}

inline void emit_figure_data(const Dataset& ds, const FigureSpec& spec, const std::string& path) {
    const FigureData fd = figure_data(ds, spec);
    csv::write_file(path, fd.header, fd.rows);
}

}  // namespace churnkit
