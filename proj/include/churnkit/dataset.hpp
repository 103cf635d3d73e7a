#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "churnkit/csv.hpp"
#include "churnkit/error.hpp"

namespace churnkit {

enum class ColumnRole { numeric, categorical, binary, outcome, ignored };

inline std::string to_string(ColumnRole r) {
    switch (r) {
        case ColumnRole::numeric: return "numeric";
        case ColumnRole::categorical: return "categorical";
        case ColumnRole::binary: return "binary";
        case ColumnRole::outcome: return "outcome";
        case ColumnRole::ignored: return "ignored";
    }
    return "?";
}

enum class Label : std::uint8_t { Stayed = 0, Left = 1 };

inline const std::string& to_string(Label l) {
    static const std::string stayed = "Stayed", left = "Left";
    return l == Label::Left ? left : stayed;
}

inline Label label_from_string(const std::string& s) {
    if (s == "Left") return Label::Left;
    if (s == "Stayed") return Label::Stayed;
    fail("unknown label '" + s + "' (expected Stayed or Left)");
}

struct ColumnSchema {
    std::string name;
    ColumnRole role = ColumnRole::numeric;
    /// Categorical only: the full level set, reference level first.
    std::optional<std::vector<std::string>> allowed_levels;
};

/// One retained column: numeric roles fill `nums`, categorical fills `cats`.
/// A mapped outcome column holds Stayed/Left in `cats`.
struct Column {
    std::vector<double> nums;
    std::vector<std::string> cats;

    bool is_text() const { return !cats.empty(); }
    std::size_t size() const { return is_text() ? cats.size() : nums.size(); }
};

struct ColumnSummary {
    double min = 0, max = 0, mean = 0, std_dev = 0;
    std::map<std::string, std::size_t> level_counts;
    bool numeric = true;
};

struct Dataset {
    std::vector<ColumnSchema> schema;  // modeling view: ignored columns already dropped
    std::vector<Column> cols;
    std::size_t n = 0;
    bool outcome_mapped = false;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < schema.size(); ++i)
            if (schema[i].name == name) return i;
        fail("unknown column: " + name);
    }

    bool has_column(const std::string& name) const {
        for (const auto& s : schema)
            if (s.name == name) return true;
        return false;
    }

    std::size_t outcome_index() const {
        for (std::size_t i = 0; i < schema.size(); ++i)
            if (schema[i].role == ColumnRole::outcome) return i;
        fail("dataset has no outcome column");
    }

    const Column& column(const std::string& name) const { return cols[column_index(name)]; }

    /// Outcome as labels; requires map_outcome_labels to have run.
    std::vector<Label> labels() const {
        require(outcome_mapped, "outcome has not been mapped to labels yet");
        const Column& c = cols[outcome_index()];
        std::vector<Label> out(n);
        for (std::size_t r = 0; r < n; ++r) out[r] = label_from_string(c.cats[r]);
        return out;
    }
};

/// Schema of the churn study file (Table-1 layout). RowNumber, CustomerId and
/// Surname carry no signal and are dropped at load.
inline std::vector<ColumnSchema> churn_schema() {
    using R = ColumnRole;
    return {
        {"RowNumber", R::ignored, {}},
        {"CustomerId", R::ignored, {}},
        {"Surname", R::ignored, {}},
        {"CreditScore", R::numeric, {}},
        {"Geography", R::categorical, std::vector<std::string>{"France", "Germany", "Spain"}},
        {"Gender", R::categorical, std::vector<std::string>{"Female", "Male"}},
        {"Age", R::numeric, {}},
        {"Tenure", R::numeric, {}},
        {"Balance", R::numeric, {}},
        {"NumOfProducts", R::numeric, {}},
        {"HasCrCard", R::binary, {}},
        {"IsActiveMember", R::binary, {}},
        {"EstimatedSalary", R::numeric, {}},
        {"Exited", R::outcome, {}},
    };
}

namespace detail {
inline void validate_schema(const std::vector<ColumnSchema>& schema) {
    std::size_t outcomes = 0;
    for (const auto& c : schema)
        if (c.role == ColumnRole::outcome) ++outcomes;
    require(outcomes == 1, "schema must declare exactly one outcome column, found " +
                               std::to_string(outcomes));
}
}  // namespace detail

/// Loads and types a CSV against the schema. Ignored schema columns may be
/// absent from the file; an extra leading RowNumber column is tolerated even
/// when the schema does not mention it. Any missing value is an error.
inline Dataset load_dataset(const std::string& path, const std::vector<ColumnSchema>& schema) {
    detail::validate_schema(schema);
    csv::Table t = csv::read_file(path);

    // Pair each retained schema column with its file position.
    std::vector<std::pair<ColumnSchema, std::size_t>> retained;
    std::size_t file_pos = 0;
    std::size_t schema_pos = 0;
    if (!t.header.empty() && t.header[0] == "RowNumber" &&
        (schema.empty() || schema[0].name != "RowNumber"))
        file_pos = 1;  // tolerated leading RowNumber not covered by the schema
    for (; schema_pos < schema.size(); ++schema_pos) {
        const ColumnSchema& sc = schema[schema_pos];
        if (file_pos < t.header.size() && t.header[file_pos] == sc.name) {
            if (sc.role != ColumnRole::ignored) retained.emplace_back(sc, file_pos);
            ++file_pos;
        } else if (sc.role == ColumnRole::ignored) {
            continue;  // ignored column absent from the file
        } else {
            std::string seen = file_pos < t.header.size() ? t.header[file_pos] : "<end>";
            fail("header mismatch at file column " + std::to_string(file_pos + 1) +
                 ": expected '" + sc.name + "', found '" + seen + "'");
        }
    }
    if (file_pos != t.header.size())
        fail("unexpected trailing column '" + t.header[file_pos] + "' in " + path);

    require(!t.rows.empty(), "dataset is empty: " + path);

    Dataset ds;
    ds.n = t.rows.size();
    for (const auto& [sc, pos] : retained) {
        ds.schema.push_back(sc);
        Column col;
        bool text = sc.role == ColumnRole::categorical;
        // An outcome column holding Stayed/Left (a saved mapped dataset)
        // reloads as labels.
        if (sc.role == ColumnRole::outcome &&
            (t.rows[0][pos] == "Stayed" || t.rows[0][pos] == "Left")) {
            text = true;
            ds.outcome_mapped = true;
        }
        if (text) col.cats.reserve(ds.n);
        else col.nums.reserve(ds.n);
        for (std::size_t r = 0; r < ds.n; ++r) {
            const std::string& cell = t.rows[r][pos];
            if (cell.empty())
                fail("missing value at row " + std::to_string(r + 1) + ", column " + sc.name);
            if (text) {
                if (sc.role == ColumnRole::outcome) {
                    if (cell != "Stayed" && cell != "Left")
                        fail("outcome value '" + cell + "' at row " + std::to_string(r + 1) +
                             " is not a label");
                } else if (sc.allowed_levels) {
                    const auto& lv = *sc.allowed_levels;
                    if (std::find(lv.begin(), lv.end(), cell) == lv.end())
                        fail("level '" + cell + "' not allowed for column " + sc.name +
                             " at row " + std::to_string(r + 1));
                }
                col.cats.push_back(cell);
            } else {
                col.nums.push_back(csv::parse_number(cell, r + 1, sc.name));
            }
        }
        ds.cols.push_back(std::move(col));
    }
    return ds;
}

/// Writes the modeling view back out; load(save(ds)) round-trips.
inline void save_dataset(const Dataset& ds, const std::string& path) {
    std::vector<std::string> header;
    for (const auto& sc : ds.schema) header.push_back(sc.name);
    std::vector<std::vector<std::string>> rows(ds.n);
    for (std::size_t r = 0; r < ds.n; ++r) rows[r].reserve(ds.schema.size());
    for (std::size_t c = 0; c < ds.cols.size(); ++c) {
        const Column& col = ds.cols[c];
        for (std::size_t r = 0; r < ds.n; ++r) {
            if (col.is_text()) {
                rows[r].push_back(col.cats[r]);
            } else {
                double v = col.nums[r];
                // Shortest representation that parses back to the same double.
                char buf[32];
                int len = std::snprintf(buf, sizeof buf, "%.17g", v);
                for (int prec = 1; prec < 17; ++prec) {
                    char tmp[32];
                    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
                    double back = 0;
                    std::from_chars(tmp, tmp + std::strlen(tmp), back);
                    if (back == v) {
                        std::strcpy(buf, tmp);
                        len = static_cast<int>(std::strlen(tmp));
                        break;
                    }
                }
                rows[r].emplace_back(buf, buf + len);
            }
        }
    }
    csv::write_file(path, header, rows);
}

/// Replaces the {0,1} outcome codes with Stayed/Left.
inline Dataset map_outcome_labels(const Dataset& ds) {
    Dataset out = ds;
    const std::size_t oi = out.outcome_index();
    Column& c = out.cols[oi];
    require(!c.is_text(), "outcome column is already label-valued");
    std::vector<std::string> mapped;
    mapped.reserve(out.n);
    for (std::size_t r = 0; r < out.n; ++r) {
        double v = c.nums[r];
        if (v == 0.0) mapped.push_back("Stayed");
        else if (v == 1.0) mapped.push_back("Left");
        else
            fail("outcome value " + std::to_string(v) + " at row " + std::to_string(r + 1) +
                 " is outside {0,1}");
    }
    c.nums.clear();
    c.cats = std::move(mapped);
    out.outcome_mapped = true;
    return out;
}

struct ClassCounts {
    std::size_t stayed = 0, left = 0;
};

inline ClassCounts class_counts(const Dataset& ds) {
    ClassCounts cc;
    for (Label l : ds.labels())
        (l == Label::Left ? cc.left : cc.stayed)++;
    return cc;
}

/// Numeric columns get min/max/mean/sd (sample sd, n-1); categorical and
/// mapped-outcome columns get level counts.
inline ColumnSummary describe_column(const Dataset& ds, const std::string& name) {
    const Column& col = ds.column(name);
    ColumnSummary s;
    if (col.is_text()) {
        s.numeric = false;
        for (const auto& v : col.cats) s.level_counts[v]++;
        return s;
    }
    const auto& x = col.nums;
    require(!x.empty(), "column " + name + " is empty");
    double mean = 0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double m2 = 0;
    for (double v : x) m2 += (v - mean) * (v - mean);
    s.mean = mean;
    s.std_dev = x.size() > 1 ? std::sqrt(m2 / static_cast<double>(x.size() - 1)) : 0.0;
    s.min = *std::min_element(x.begin(), x.end());
    s.max = *std::max_element(x.begin(), x.end());
    return s;
}

/// Drops the given rows (used with outlier reports). Removing everything is
/// an error: an empty Dataset is not representable.
inline Dataset remove_rows(const Dataset& ds, const std::vector<std::size_t>& indices) {
    std::vector<bool> drop(ds.n, false);
    for (std::size_t i : indices) {
        require(i < ds.n, "remove_rows: index " + std::to_string(i) + " out of range");
        drop[i] = true;
    }
    std::size_t kept = 0;
    for (std::size_t r = 0; r < ds.n; ++r)
        if (!drop[r]) ++kept;
    require(kept > 0, "remove_rows would leave an empty dataset");

    Dataset out;
    out.schema = ds.schema;
    out.outcome_mapped = ds.outcome_mapped;
    out.n = kept;
    out.cols.resize(ds.cols.size());
    for (std::size_t c = 0; c < ds.cols.size(); ++c) {
        const Column& src = ds.cols[c];
        Column& dst = out.cols[c];
        if (src.is_text()) {
            dst.cats.reserve(kept);
            for (std::size_t r = 0; r < ds.n; ++r)
                if (!drop[r]) dst.cats.push_back(src.cats[r]);
        } else {
            dst.nums.reserve(kept);
            for (std::size_t r = 0; r < ds.n; ++r)
                if (!drop[r]) dst.nums.push_back(src.nums[r]);
        }
    }
    return out;
}

}  // namespace churnkit
