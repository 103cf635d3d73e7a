#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "churnkit/feature_table.hpp"

namespace churnkit {

enum class Family { gnb, knn, svm, cart, rf, ann };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::gnb: return "gnb";
        case Family::knn: return "knn";
        case Family::svm: return "svm";
        case Family::cart: return "cart";
        case Family::rf: return "rf";
        case Family::ann: return "ann";
    }
    return "?";
}

inline Family family_from_string(const std::string& s) {
    if (s == "gnb") return Family::gnb;
    if (s == "knn") return Family::knn;
    if (s == "svm") return Family::svm;
    if (s == "cart") return Family::cart;
    if (s == "rf") return Family::rf;
    if (s == "ann") return Family::ann;
    fail("unknown model family: " + s);
}

/// Family + hyperparameters + seed. Unknown hyperparameter names are
/// rejected up front, before any fitting starts.
struct ModelSpec {
    Family family = Family::gnb;
    std::map<std::string, double> hyper;
    std::uint64_t seed = 0;

    double get(const std::string& name, double fallback) const {
        auto it = hyper.find(name);
        return it == hyper.end() ? fallback : it->second;
    }

    ModelSpec with(const std::string& name, double value) const {
        ModelSpec copy = *this;
        copy.hyper[name] = value;
        return copy;
    }

    void validate() const {
        static const std::map<Family, std::vector<std::string>> known = {
            {Family::gnb, {}},
            {Family::knn, {"k"}},
            {Family::svm, {"C", "gamma", "kkt_tolerance", "max_iter", "cache_mb"}},
            {Family::cart, {"cp", "min_split", "min_leaf"}},
            {Family::rf, {"n_trees", "mtry", "min_leaf", "min_split", "bootstrap"}},
            {Family::ann, {"size", "decay", "max_iter"}},
        };
        const auto& names = known.at(family);
        for (const auto& [name, value] : hyper) {
            bool ok = false;
            for (const auto& k : names)
                if (k == name) ok = true;
            require(ok, "hyperparameter '" + name + "' is not valid for family " +
                            to_string(family));
            (void)value;
        }
        if (family == Family::knn)
            require(get("k", 9) >= 1, "knn: k must be positive");
        if (family == Family::ann) {
            require(get("size", 5) >= 1, "ann: size must be >= 1");
            require(get("decay", 0.1) >= 0, "ann: decay must be >= 0");
        }
        if (family == Family::cart)
            require(get("cp", 0.01) >= 0, "cart: cp must be >= 0");
        if (family == Family::rf)
            require(get("n_trees", 500) >= 1, "rf: n_trees must be >= 1");
        if (family == Family::svm) {
            require(get("C", 1.0) > 0, "svm: C must be positive");
            require(get("gamma", 0.0) >= 0, "svm: gamma must be >= 0 (0 = 1/d)");
        }
    }
};

/// Uniform contract over all six families: one score in [0,1] per row
/// (the estimated chance of Left), label = Left iff score >= 0.5.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual Family family() const = 0;
    virtual std::vector<double> predict_scores(const FeatureTable& t) const = 0;
    virtual nlohmann::json to_json() const = 0;

    std::vector<Label> predict_labels(const FeatureTable& t) const {
        const std::vector<double> s = predict_scores(t);
        std::vector<Label> out(s.size());
        for (std::size_t i = 0; i < s.size(); ++i)
            out[i] = s[i] >= 0.5 ? Label::Left : Label::Stayed;
        return out;
    }

    std::uint64_t fingerprint() const { return fingerprint_; }

protected:
    void set_fingerprint(const FeatureTable& train) { fingerprint_ = train.fingerprint(); }

    void check_fingerprint(const FeatureTable& t) const {
        require(t.fingerprint() == fingerprint_,
                "feature table does not match the columns this model was trained on");
    }

private:
    std::uint64_t fingerprint_ = 0;
};

/// Importance scores rescaled so the top variable sits at exactly 100
/// (unless everything is zero), in descending order.
struct ImportanceRanking {
    std::vector<std::pair<std::string, double>> entries;

    static ImportanceRanking from_raw(std::vector<std::pair<std::string, double>> raw) {
        double top = 0;
        for (const auto& [name, v] : raw) top = std::max(top, v);
        if (top > 0)
            for (auto& [name, v] : raw) v = 100.0 * v / top;
        std::stable_sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        ImportanceRanking r;
        r.entries = std::move(raw);
        return r;
    }

    double score_of(const std::string& name) const {
        for (const auto& [n, v] : entries)
            if (n == name) return v;
        fail("no importance entry for " + name);
    }

    std::size_t rank_of(const std::string& name) const {
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (entries[i].first == name) return i;
        fail("no importance entry for " + name);
    }
};

inline nlohmann::json to_json(const ImportanceRanking& r) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [name, score] : r.entries) j.push_back({{"variable", name}, {"score", score}});
    return j;
}

}  // namespace churnkit
