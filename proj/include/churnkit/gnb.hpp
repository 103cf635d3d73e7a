#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "churnkit/model.hpp"

namespace churnkit {

/// Gaussian naive Bayes. Class priors from frequencies; one Gaussian per
/// class per feature with a small sd floor; posterior by the product rule in
/// log space. Binary features are modeled the same way (one code path).
class GaussianNaiveBayes : public Classifier {
public:
    static std::unique_ptr<GaussianNaiveBayes> fit(const FeatureTable& train,
                                                   const ModelSpec& spec) {
        spec.validate();
        require(train.has_labels(), "gnb: training table has no labels");
        auto model = std::make_unique<GaussianNaiveBayes>();
        model->set_fingerprint(train);

        const std::size_t d = train.n_cols;
        std::size_t n_left = 0;
        for (Label l : train.labels)
            if (l == Label::Left) ++n_left;
        const std::size_t n_stayed = train.n_rows - n_left;
        require(n_left >= 2 && n_stayed >= 2, "gnb: each class needs at least two rows");

        model->log_prior_left_ = std::log(static_cast<double>(n_left) / train.n_rows);
        model->log_prior_stayed_ = std::log(static_cast<double>(n_stayed) / train.n_rows);
        model->mean_.assign(2, std::vector<double>(d, 0.0));
        model->sd_.assign(2, std::vector<double>(d, 0.0));

        for (int cls = 0; cls < 2; ++cls) {
            const Label want = cls == 1 ? Label::Left : Label::Stayed;
            const std::size_t nc = cls == 1 ? n_left : n_stayed;
            for (std::size_t c = 0; c < d; ++c) {
                double mean = 0;
                for (std::size_t r = 0; r < train.n_rows; ++r)
                    if (train.labels[r] == want) mean += train.at(r, c);
                mean /= static_cast<double>(nc);
                double m2 = 0;
                for (std::size_t r = 0; r < train.n_rows; ++r)
                    if (train.labels[r] == want) {
                        const double dv = train.at(r, c) - mean;
                        m2 += dv * dv;
                    }
                double sd = std::sqrt(m2 / static_cast<double>(nc - 1));
                if (sd < kSdFloor) sd = kSdFloor;
                model->mean_[cls][c] = mean;
                model->sd_[cls][c] = sd;
            }
        }
        return model;
    }

    Family family() const override { return Family::gnb; }

    std::vector<double> predict_scores(const FeatureTable& t) const override {
        check_fingerprint(t);
        std::vector<double> out(t.n_rows);
        for (std::size_t r = 0; r < t.n_rows; ++r) {
            double ll_left = log_prior_left_, ll_stayed = log_prior_stayed_;
            for (std::size_t c = 0; c < t.n_cols; ++c) {
                const double x = t.at(r, c);
                ll_left += log_density(x, mean_[1][c], sd_[1][c]);
                ll_stayed += log_density(x, mean_[0][c], sd_[0][c]);
            }
            // P(Left | x) = 1 / (1 + exp(ll_stayed - ll_left))
            out[r] = 1.0 / (1.0 + std::exp(ll_stayed - ll_left));
        }
        return out;
    }

    nlohmann::json to_json() const override {
        return {{"family", "gnb"},
                {"format_version", 1},
                {"log_prior_stayed", log_prior_stayed_},
                {"log_prior_left", log_prior_left_},
                {"mean_stayed", mean_[0]},
                {"mean_left", mean_[1]},
                {"sd_stayed", sd_[0]},
                {"sd_left", sd_[1]}};
    }

    static constexpr double kSdFloor = 1e-3;

private:
    static double log_density(double x, double mean, double sd) {
        const double z = (x - mean) / sd;
        return -0.5 * z * z - std::log(sd) - 0.91893853320467274178;  // log sqrt(2 pi)
    }

    double log_prior_stayed_ = 0, log_prior_left_ = 0;
    std::vector<std::vector<double>> mean_, sd_;  // [class 0=Stayed, 1=Left][feature]
};

}  // namespace churnkit
