#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "churnkit/dataset.hpp"
#include "churnkit/rng.hpp"

namespace churnkit {

/// Dense numeric design matrix with named columns. Models check the
/// fingerprint so a table prepared for one fit cannot silently feed another.
struct FeatureTable {
    std::vector<std::string> columns;
    std::vector<std::uint8_t> binary;  // per column: values are {0,1} by construction
    std::vector<double> data;          // row-major, n_rows x n_cols
    std::vector<Label> labels;         // empty when unlabeled
    std::size_t n_rows = 0, n_cols = 0;

    double at(std::size_t r, std::size_t c) const { return data[r * n_cols + c]; }
    double& at(std::size_t r, std::size_t c) { return data[r * n_cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data.data() + r * n_cols, n_cols);
    }

    bool has_labels() const { return !labels.empty(); }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        fail("feature table has no column " + name);
    }

    /// Hash of column names + binary flags; the shape contract for predict.
    std::uint64_t fingerprint() const {
        std::string key;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            key += columns[i];
            key += binary[i] ? "|b;" : "|n;";
        }
        return fnv1a(key);
    }

    FeatureTable select_columns(const std::vector<std::string>& names) const {
        FeatureTable out;
        out.columns = names;
        out.n_rows = n_rows;
        out.n_cols = names.size();
        out.labels = labels;
        std::vector<std::size_t> idx;
        idx.reserve(names.size());
        for (const auto& nm : names) idx.push_back(column_index(nm));
        for (std::size_t i : idx) out.binary.push_back(binary[i]);
        out.data.resize(n_rows * out.n_cols);
        for (std::size_t r = 0; r < n_rows; ++r)
            for (std::size_t c = 0; c < idx.size(); ++c)
                out.at(r, c) = at(r, idx[c]);
        return out;
    }

    FeatureTable take_rows(const std::vector<std::size_t>& rows) const {
        FeatureTable out;
        out.columns = columns;
        out.binary = binary;
        out.n_cols = n_cols;
        out.n_rows = rows.size();
        out.data.resize(out.n_rows * n_cols);
        if (has_labels()) out.labels.reserve(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t r = rows[i];
            require(r < n_rows, "take_rows: index out of range");
            for (std::size_t c = 0; c < n_cols; ++c) out.at(i, c) = at(r, c);
            if (has_labels()) out.labels.push_back(labels[r]);
        }
        return out;
    }
};

}  // namespace churnkit
