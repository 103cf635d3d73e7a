#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "churnkit/ann.hpp"
#include "churnkit/cart.hpp"
#include "churnkit/forest.hpp"
#include "churnkit/gnb.hpp"
#include "churnkit/knn.hpp"
#include "churnkit/preprocess.hpp"
#include "churnkit/svm.hpp"

namespace churnkit {

/// Preprocessing each family expects on top of the dummy-encoded table:
/// gnb gets the normality transform, k-NN and SVM get z-scores, the network
/// gets min-max into [0,1], trees and forests take the columns raw.
inline std::optional<ScalerKind> family_scaler(Family f) {
    switch (f) {
        case Family::knn:
        case Family::svm: return ScalerKind::zscore;
        case Family::ann: return ScalerKind::minmax;
        default: return std::nullopt;
    }
}

inline bool family_uses_power_transform(Family f) { return f == Family::gnb; }

/// A fitted model together with the preprocessing fitted on its own training
/// rows. This is the unit of evaluation everywhere (CV folds included), so
/// no scaling or transform statistic can ever see validation rows.
class Pipeline {
public:
    static Pipeline fit(const ModelSpec& spec, const FeatureTable& train) {
        spec.validate();
        Pipeline p;
        p.spec_ = spec;
        FeatureTable prepared = train;
        if (family_uses_power_transform(spec.family)) {
            p.power_ = fit_power_transform(prepared, prepared.columns);
            prepared = apply_power_transform(*p.power_, prepared);
        }
        if (auto kind = family_scaler(spec.family)) {
            p.scaler_ = fit_scaler(prepared, *kind);
            prepared = apply_scaler(*p.scaler_, prepared);
        }
        p.model_ = fit_family(spec, prepared);
        return p;
    }

    std::vector<double> predict_scores(const FeatureTable& t) const {
        return model_->predict_scores(prepare(t));
    }

    std::vector<Label> predict_labels(const FeatureTable& t) const {
        return model_->predict_labels(prepare(t));
    }

    const ModelSpec& spec() const { return spec_; }
    const Classifier& model() const { return *model_; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format_version"] = 1;
        j["family"] = to_string(spec_.family);
        j["hyperparameters"] = spec_.hyper;
        j["seed"] = spec_.seed;
        j["preprocessing"] = nlohmann::json::object();
        if (power_) j["preprocessing"]["power_transform"] = churnkit::to_json(*power_);
        if (scaler_) j["preprocessing"]["scaler"] = churnkit::to_json(*scaler_);
        j["model"] = model_->to_json();
        return j;
    }

private:
    FeatureTable prepare(const FeatureTable& t) const {
        FeatureTable out = t;
        if (power_) out = apply_power_transform(*power_, out);
        if (scaler_) out = apply_scaler(*scaler_, out);
        return out;
    }

    static std::unique_ptr<Classifier> fit_family(const ModelSpec& spec,
                                                  const FeatureTable& prepared) {
        switch (spec.family) {
            case Family::gnb: return GaussianNaiveBayes::fit(prepared, spec);
            case Family::knn: return KnnClassifier::fit(prepared, spec);
            case Family::svm: return SvmClassifier::fit(prepared, spec);
            case Family::cart: return CartClassifier::fit(prepared, spec);
            case Family::rf: return RandomForestClassifier::fit(prepared, spec);
            case Family::ann: return AnnClassifier::fit(prepared, spec);
        }
        fail("unknown family");
    }

    ModelSpec spec_;
    std::optional<PowerTransformSpec> power_;
    std::optional<ScalerSpec> scaler_;
    std::unique_ptr<Classifier> model_;
};

}  // namespace churnkit
