#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "churnkit/feature_table.hpp"
#include "churnkit/rng.hpp"

namespace churnkit {

// ---------------------------------------------------------------------------
// Dummy encoding

/// Treatment coding: a k-level factor becomes k-1 {0,1} dummies named
/// <column><level>; the reference level (first in the schema's level list)
/// maps to all zeros.
struct EncoderSpec {
    struct ColumnEncoding {
        std::string column;
        std::string reference;
        std::vector<std::string> dummy_levels;  // non-reference levels, schema order
    };
    std::vector<ColumnEncoding> encodings;

    static EncoderSpec from_schema(const std::vector<ColumnSchema>& schema) {
        EncoderSpec spec;
        for (const auto& sc : schema) {
            if (sc.role != ColumnRole::categorical) continue;
            require(sc.allowed_levels && sc.allowed_levels->size() >= 2,
                    "categorical column " + sc.name + " needs an explicit level list");
            ColumnEncoding enc;
            enc.column = sc.name;
            enc.reference = (*sc.allowed_levels)[0];
            for (std::size_t i = 1; i < sc.allowed_levels->size(); ++i)
                enc.dummy_levels.push_back((*sc.allowed_levels)[i]);
            spec.encodings.push_back(std::move(enc));
        }
        return spec;
    }

    const ColumnEncoding* find(const std::string& column) const {
        for (const auto& e : encodings)
            if (e.column == column) return &e;
        return nullptr;
    }
};

inline FeatureTable dummy_encode(const Dataset& ds, const EncoderSpec& spec) {
    FeatureTable t;
    t.n_rows = ds.n;

    for (std::size_t c = 0; c < ds.schema.size(); ++c) {
        const ColumnSchema& sc = ds.schema[c];
        if (sc.role == ColumnRole::outcome) continue;
        if (sc.role == ColumnRole::categorical) {
            const auto* enc = spec.find(sc.name);
            require(enc != nullptr, "encoder spec does not cover column " + sc.name);
            for (const auto& level : enc->dummy_levels) {
                t.columns.push_back(sc.name + level);
                t.binary.push_back(1);
            }
        } else {
            t.columns.push_back(sc.name);
            t.binary.push_back(sc.role == ColumnRole::binary ? 1 : 0);
        }
    }
    t.n_cols = t.columns.size();
    t.data.assign(t.n_rows * t.n_cols, 0.0);

    std::size_t out_c = 0;
    for (std::size_t c = 0; c < ds.schema.size(); ++c) {
        const ColumnSchema& sc = ds.schema[c];
        if (sc.role == ColumnRole::outcome) continue;
        const Column& col = ds.cols[c];
        if (sc.role == ColumnRole::categorical) {
            const auto* enc = spec.find(sc.name);
            for (std::size_t r = 0; r < ds.n; ++r) {
                const std::string& v = col.cats[r];
                if (v == enc->reference) continue;
                bool hit = false;
                for (std::size_t d = 0; d < enc->dummy_levels.size(); ++d) {
                    if (enc->dummy_levels[d] == v) {
                        t.at(r, out_c + d) = 1.0;
                        hit = true;
                        break;
                    }
                }
                if (!hit)
                    fail("unseen level '" + v + "' in column " + sc.name + " at row " +
                         std::to_string(r + 1));
            }
            out_c += enc->dummy_levels.size();
        } else {
            for (std::size_t r = 0; r < ds.n; ++r) t.at(r, out_c) = col.nums[r];
            ++out_c;
        }
    }

    if (ds.outcome_mapped) t.labels = ds.labels();
    return t;
}

/// Inverse of the dummy pattern for one encoded column (round-trip check).
inline std::string decode_level(const EncoderSpec::ColumnEncoding& enc,
                                const FeatureTable& t, std::size_t row) {
    for (std::size_t d = 0; d < enc.dummy_levels.size(); ++d)
        if (t.at(row, t.column_index(enc.column + enc.dummy_levels[d])) == 1.0)
            return enc.dummy_levels[d];
    return enc.reference;
}

// ---------------------------------------------------------------------------
// Scaling

enum class ScalerKind { zscore, minmax };

struct ScalerSpec {
    ScalerKind kind = ScalerKind::zscore;
    std::vector<std::string> columns;
    std::vector<double> p1;  // mean or min, per column
    std::vector<double> p2;  // sd or max, per column
};

/// Fits on training rows only. Zero variance / zero range is an error.
inline ScalerSpec fit_scaler(const FeatureTable& train, ScalerKind kind) {
    ScalerSpec spec;
    spec.kind = kind;
    spec.columns = train.columns;
    require(train.n_rows > 1, "fit_scaler: need at least two rows");
    for (std::size_t c = 0; c < train.n_cols; ++c) {
        if (kind == ScalerKind::zscore) {
            double mean = 0;
            for (std::size_t r = 0; r < train.n_rows; ++r) mean += train.at(r, c);
            mean /= static_cast<double>(train.n_rows);
            double m2 = 0;
            for (std::size_t r = 0; r < train.n_rows; ++r) {
                const double d = train.at(r, c) - mean;
                m2 += d * d;
            }
            const double sd = std::sqrt(m2 / static_cast<double>(train.n_rows - 1));
            if (sd <= 0.0)
                fail("fit_scaler: zero variance in column " + train.columns[c]);
            spec.p1.push_back(mean);
            spec.p2.push_back(sd);
        } else {
            double lo = train.at(0, c), hi = train.at(0, c);
            for (std::size_t r = 1; r < train.n_rows; ++r) {
                lo = std::min(lo, train.at(r, c));
                hi = std::max(hi, train.at(r, c));
            }
            if (hi <= lo)
                fail("fit_scaler: zero range in column " + train.columns[c]);
            spec.p1.push_back(lo);
            spec.p2.push_back(hi);
        }
    }
    return spec;
}

/// z-score: (x - mean) / sd. min-max: (x - min) / (max - min), clipped to
/// [0,1] so unseen data stays inside the trained range.
inline FeatureTable apply_scaler(const ScalerSpec& spec, const FeatureTable& table) {
    require(spec.columns == table.columns, "apply_scaler: column mismatch with fitted spec");
    FeatureTable out = table;
    for (std::size_t c = 0; c < out.n_cols; ++c) {
        for (std::size_t r = 0; r < out.n_rows; ++r) {
            double v = out.at(r, c);
            if (spec.kind == ScalerKind::zscore) {
                v = (v - spec.p1[c]) / spec.p2[c];
            } else {
                v = (v - spec.p1[c]) / (spec.p2[c] - spec.p1[c]);
                v = std::clamp(v, 0.0, 1.0);
            }
            out.at(r, c) = v;
        }
        out.binary[c] = 0;  // scaled values are no longer {0,1}
    }
    return out;
}

// ---------------------------------------------------------------------------
// Yeo-Johnson power transform

/// Strictly increasing in x for any lambda; maps 0 to 0.
inline double yeo_johnson(double x, double lambda) {
    if (x >= 0.0) {
        if (std::fabs(lambda) < 1e-12) return std::log1p(x);
        return (std::pow(x + 1.0, lambda) - 1.0) / lambda;
    }
    const double two_ml = 2.0 - lambda;
    if (std::fabs(two_ml) < 1e-12) return -std::log1p(-x);
    return -(std::pow(1.0 - x, two_ml) - 1.0) / two_ml;
}

struct PowerTransformSpec {
    std::vector<std::string> columns;
    std::vector<double> lambdas;
};

namespace detail {

/// Profile log-likelihood of the Gaussianized sample (constants dropped).
inline double yj_profile_loglik(const std::vector<double>& x, double lambda) {
    const double n = static_cast<double>(x.size());
    double mean = 0;
    std::vector<double> psi(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        psi[i] = yeo_johnson(x[i], lambda);
        mean += psi[i];
    }
    mean /= n;
    double var = 0;
    for (double p : psi) var += (p - mean) * (p - mean);
    var /= n;
    if (!(var > 0.0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
    double jac = 0;
    for (double v : x) jac += (v >= 0 ? 1.0 : -1.0) * std::log1p(std::fabs(v));
    return -0.5 * n * std::log(var) + (lambda - 1.0) * jac;
}

inline double yj_fit_lambda(const std::vector<double>& x) {
    // Coarse scan, then golden-section refinement on the best bracket.
    const double lo_bound = -5.0, hi_bound = 5.0;
    const int grid = 101;
    double best_l = 1.0, best_ll = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < grid; ++i) {
        const double l = lo_bound + (hi_bound - lo_bound) * i / (grid - 1);
        const double ll = yj_profile_loglik(x, l);
        if (ll > best_ll) {
            best_ll = ll;
            best_l = l;
        }
    }
    if (!std::isfinite(best_ll)) fail("fit_power_transform: non-finite likelihood");
    const double step = (hi_bound - lo_bound) / (grid - 1);
    double a = std::max(lo_bound, best_l - step), b = std::min(hi_bound, best_l + step);
    const double gr = 0.61803398874989484820;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = yj_profile_loglik(x, c), fd = yj_profile_loglik(x, d);
    for (int it = 0; it < 200 && (b - a) > 1e-10; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = yj_profile_loglik(x, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = yj_profile_loglik(x, d);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace detail

/// Lambda per column by maximum likelihood, fit on training rows only.
inline PowerTransformSpec fit_power_transform(const FeatureTable& train,
                                              const std::vector<std::string>& columns) {
    PowerTransformSpec spec;
    spec.columns = columns;
    for (const auto& name : columns) {
        const std::size_t c = train.column_index(name);
        std::vector<double> x(train.n_rows);
        for (std::size_t r = 0; r < train.n_rows; ++r) x[r] = train.at(r, c);
        spec.lambdas.push_back(detail::yj_fit_lambda(x));
    }
    return spec;
}

inline FeatureTable apply_power_transform(const PowerTransformSpec& spec,
                                          const FeatureTable& table) {
    FeatureTable out = table;
    for (std::size_t i = 0; i < spec.columns.size(); ++i) {
        const std::size_t c = out.column_index(spec.columns[i]);
        for (std::size_t r = 0; r < out.n_rows; ++r)
            out.at(r, c) = yeo_johnson(out.at(r, c), spec.lambdas[i]);
        out.binary[c] = 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stratified splitting

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool stratified = true;
};

struct SplitIndices {
    std::vector<std::size_t> train;  // ascending
    std::vector<std::size_t> test;   // ascending
};

/// Partitions [0, n) with per-class largest-remainder allocation so that
/// |train| = round(f*n) and every class is within one row of f*n_class.
inline SplitIndices split_indices(const std::vector<Label>& labels, const SplitSpec& spec) {
    const std::size_t n = labels.size();
    require(n >= 10, "split: need at least 10 rows");
    require(spec.train_fraction > 0.0 && spec.train_fraction < 1.0,
            "split: train_fraction must be in (0,1)");
    const std::size_t train_total =
        static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));

    std::vector<std::vector<std::size_t>> groups;
    if (spec.stratified) {
        std::vector<std::size_t> stayed, left;
        for (std::size_t i = 0; i < n; ++i)
            (labels[i] == Label::Left ? left : stayed).push_back(i);
        require(stayed.size() >= 2 && left.size() >= 2,
                "split: a class has fewer than 2 rows, cannot stratify");
        groups.push_back(std::move(stayed));
        groups.push_back(std::move(left));
    } else {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        groups.push_back(std::move(all));
    }

    // Largest-remainder shares per group, summing exactly to train_total.
    std::vector<std::size_t> share(groups.size());
    std::vector<std::pair<double, std::size_t>> fracs;
    std::size_t base_sum = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double ideal = spec.train_fraction * static_cast<double>(groups[g].size());
        share[g] = static_cast<std::size_t>(std::floor(ideal));
        base_sum += share[g];
        fracs.emplace_back(ideal - std::floor(ideal), g);
    }
    require(base_sum <= train_total, "split: allocation underflow");
    std::sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t k = 0; k < train_total - base_sum; ++k) share[fracs[k].second]++;

    SplitIndices out;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Rng rng(derive_seed(spec.seed, "split.group", g));
        rng.shuffle(groups[g]);
        for (std::size_t i = 0; i < groups[g].size(); ++i)
            (i < share[g] ? out.train : out.test).push_back(groups[g][i]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline Dataset subset_rows(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.schema = ds.schema;
    out.outcome_mapped = ds.outcome_mapped;
    out.n = indices.size();
    require(out.n > 0, "subset_rows: empty selection");
    out.cols.resize(ds.cols.size());
    for (std::size_t c = 0; c < ds.cols.size(); ++c) {
        const Column& src = ds.cols[c];
        Column& dst = out.cols[c];
        if (src.is_text()) {
            dst.cats.reserve(out.n);
            for (std::size_t r : indices) dst.cats.push_back(src.cats.at(r));
        } else {
            dst.nums.reserve(out.n);
            for (std::size_t r : indices) dst.nums.push_back(src.nums.at(r));
        }
    }
    return out;
}

inline std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, const SplitSpec& spec) {
    const SplitIndices idx = split_indices(ds.labels(), spec);
    return {subset_rows(ds, idx.train), subset_rows(ds, idx.test)};
}

// ---------------------------------------------------------------------------
// JSON round-trips for reproducibility manifests

inline nlohmann::json to_json(const EncoderSpec& spec) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : spec.encodings)
        j.push_back({{"column", e.column},
                     {"reference", e.reference},
                     {"dummy_levels", e.dummy_levels}});
    return j;
}

inline nlohmann::json to_json(const ScalerSpec& spec) {
    return {{"kind", spec.kind == ScalerKind::zscore ? "zscore" : "minmax"},
            {"columns", spec.columns},
            {"p1", spec.p1},
            {"p2", spec.p2}};
}

inline ScalerSpec scaler_from_json(const nlohmann::json& j) {
    ScalerSpec s;
    s.kind = j.at("kind") == "zscore" ? ScalerKind::zscore : ScalerKind::minmax;
    s.columns = j.at("columns").get<std::vector<std::string>>();
    s.p1 = j.at("p1").get<std::vector<double>>();
    s.p2 = j.at("p2").get<std::vector<double>>();
    return s;
}

inline nlohmann::json to_json(const PowerTransformSpec& spec) {
    return {{"columns", spec.columns}, {"lambdas", spec.lambdas}};
}

inline PowerTransformSpec power_transform_from_json(const nlohmann::json& j) {
    PowerTransformSpec s;
    s.columns = j.at("columns").get<std::vector<std::string>>();
    s.lambdas = j.at("lambdas").get<std::vector<double>>();
    return s;
}

}  // namespace churnkit
