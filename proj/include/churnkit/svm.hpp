#pragma once

#include <cmath>
#include <list>
#include <memory>
#include <unordered_map>
#include <vector>

#include "churnkit/model.hpp"

namespace churnkit {

/// Soft-margin RBF SVM trained by sequential minimal optimization on the
/// dual: min 1/2 a'Qa - e'a subject to 0 <= a_i <= C, y'a = 0, with
/// Q_ij = y_i y_j K(x_i, x_j). Working-set selection is the maximal
/// violating pair; training stops when the violation m(a) - M(a) drops to
/// kkt_tolerance. Defaults C = 1, gamma = 1/d.
class SvmClassifier : public Classifier {
public:
    static std::unique_ptr<SvmClassifier> fit(const FeatureTable& train, const ModelSpec& spec) {
        spec.validate();
        require(train.has_labels(), "svm: training table has no labels");
        const std::size_t n = train.n_rows, d = train.n_cols;
        require(n >= 2, "svm: need at least two rows");

        const double C = spec.get("C", 1.0);
        double gamma = spec.get("gamma", 0.0);
        if (gamma <= 0.0) gamma = 1.0 / static_cast<double>(d);
        const double eps = spec.get("kkt_tolerance", 1e-3);
        const std::size_t max_iter = static_cast<std::size_t>(
            spec.get("max_iter", std::max<double>(100000.0, 100.0 * static_cast<double>(n))));
        const double cache_mb = spec.get("cache_mb", 100.0);

        std::vector<double> y(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = train.labels[i] == Label::Left ? 1.0 : -1.0;
            (y[i] > 0 ? has_pos : has_neg) = true;
        }
        require(has_pos && has_neg, "svm: both classes must be present");

        KernelCache cache(train, gamma, cache_mb);

        std::vector<double> alpha(n, 0.0);
        std::vector<double> grad(n, -1.0);  // G_i = (Qa)_i - 1; a = 0 initially

        constexpr double tau = 1e-12;
        std::size_t iter = 0;
        double violation = 0.0;
        for (;; ++iter) {
            // Maximal violating pair.
            double m_up = -std::numeric_limits<double>::infinity();
            double m_low = std::numeric_limits<double>::infinity();
            std::ptrdiff_t i = -1, j = -1;
            for (std::size_t t = 0; t < n; ++t) {
                const bool in_up = (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0);
                const bool in_low = (y[t] < 0 && alpha[t] < C) || (y[t] > 0 && alpha[t] > 0);
                const double v = -y[t] * grad[t];
                if (in_up && v > m_up) {
                    m_up = v;
                    i = static_cast<std::ptrdiff_t>(t);
                }
                if (in_low && v < m_low) {
                    m_low = v;
                    j = static_cast<std::ptrdiff_t>(t);
                }
            }
            violation = m_up - m_low;
            if (violation <= eps) break;
            if (iter >= max_iter)
                fail("svm: SMO did not converge within " + std::to_string(max_iter) +
                     " iterations (max KKT violation " + std::to_string(violation) + ")");

            const double* Qi = cache.row(static_cast<std::size_t>(i), y);
            const double* Qj = cache.row(static_cast<std::size_t>(j), y);
            const double old_ai = alpha[i], old_aj = alpha[j];

            if (y[i] != y[j]) {
                double quad = Qi[i] + Qj[j] + 2.0 * Qi[j];
                if (quad <= 0) quad = tau;
                const double delta = (-grad[i] - grad[j]) / quad;
                const double diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if (diff > 0 && alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                } else if (diff <= 0 && alpha[i] < 0) {
                    alpha[i] = 0;
                    alpha[j] = -diff;
                }
                if (diff > 0 && alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                } else if (diff <= 0 && alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = C + diff;
                }
            } else {
                double quad = Qi[i] + Qj[j] - 2.0 * Qi[j];
                if (quad <= 0) quad = tau;
                const double delta = (grad[i] - grad[j]) / quad;
                const double sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if (sum > C && alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                } else if (sum <= C && alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = sum;
                }
                if (sum > C && alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                } else if (sum <= C && alpha[i] < 0) {
                    alpha[i] = 0;
                    alpha[j] = sum;
                }
            }

            const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
            for (std::size_t t = 0; t < n; ++t) grad[t] += Qi[t] * dai + Qj[t] * daj;
        }

        // Intercept: average over free vectors, midpoint of the bounds otherwise.
        double ub = std::numeric_limits<double>::infinity();
        double lb = -std::numeric_limits<double>::infinity();
        double sum_free = 0;
        std::size_t n_free = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const double yg = y[t] * grad[t];
            if (alpha[t] >= C) {
                if (y[t] < 0) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else if (alpha[t] <= 0) {
                if (y[t] > 0) ub = std::min(ub, yg);
                else lb = std::max(lb, yg);
            } else {
                ++n_free;
                sum_free += yg;
            }
        }
        const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free)
                                      : 0.5 * (ub + lb);

        auto model = std::make_unique<SvmClassifier>();
        model->set_fingerprint(train);
        model->gamma_ = gamma;
        model->C_ = C;
        model->rho_ = rho;
        model->iterations_ = iter;
        model->final_violation_ = violation;
        for (std::size_t t = 0; t < n; ++t) {
            if (alpha[t] > 0) {
                model->sv_coef_.push_back(alpha[t] * y[t]);
                const auto row = train.row(t);
                model->sv_.insert(model->sv_.end(), row.begin(), row.end());
            }
        }
        model->dim_ = d;
        return model;
    }

    Family family() const override { return Family::svm; }

    double decision_value(std::span<const double> x) const {
        double sum = 0;
        const std::size_t n_sv = sv_coef_.size();
        for (std::size_t s = 0; s < n_sv; ++s) {
            const double* v = sv_.data() + s * dim_;
            double dist = 0;
            for (std::size_t c = 0; c < dim_; ++c) {
                const double diff = v[c] - x[c];
                dist += diff * diff;
            }
            sum += sv_coef_[s] * std::exp(-gamma_ * dist);
        }
        return sum - rho_;
    }

    /// Monotone map of the margin into [0,1]; the sign boundary stays at 0.5.
    std::vector<double> predict_scores(const FeatureTable& t) const override {
        check_fingerprint(t);
        std::vector<double> out(t.n_rows);
        for (std::size_t r = 0; r < t.n_rows; ++r)
            out[r] = 1.0 / (1.0 + std::exp(-decision_value(t.row(r))));
        return out;
    }

    std::size_t support_vector_count() const { return sv_coef_.size(); }
    std::size_t iterations() const { return iterations_; }
    double final_violation() const { return final_violation_; }
    double rho() const { return rho_; }
    double gamma() const { return gamma_; }
    double box_constraint() const { return C_; }

    nlohmann::json to_json() const override {
        return {{"family", "svm"},
                {"format_version", 1},
                {"gamma", gamma_},
                {"C", C_},
                {"rho", rho_},
                {"dim", dim_},
                {"sv_coef", sv_coef_},
                {"support_vectors", sv_}};
    }

private:
    /// LRU cache of Q rows (Q_ij = y_i y_j K_ij).
    class KernelCache {
    public:
        KernelCache(const FeatureTable& train, double gamma, double budget_mb)
            : train_(train), gamma_(gamma) {
            norms_.resize(train.n_rows);
            for (std::size_t r = 0; r < train.n_rows; ++r) {
                double s = 0;
                for (double v : train.row(r)) s += v * v;
                norms_[r] = s;
            }
            const double bytes = budget_mb * 1e6;
            max_rows_ = static_cast<std::size_t>(
                bytes / (8.0 * static_cast<double>(train.n_rows)));
            if (max_rows_ < 2) max_rows_ = 2;
        }

        const double* row(std::size_t i, const std::vector<double>& y) {
            auto it = index_.find(i);
            if (it != index_.end()) {
                lru_.splice(lru_.begin(), lru_, it->second.first);
                return it->second.second.data();
            }
            if (index_.size() >= max_rows_) {
                const std::size_t victim = lru_.back();
                lru_.pop_back();
                index_.erase(victim);
            }
            std::vector<double> qrow(train_.n_rows);
            const auto xi = train_.row(i);
            for (std::size_t t = 0; t < train_.n_rows; ++t) {
                const auto xt = train_.row(t);
                double dot = 0;
                for (std::size_t c = 0; c < train_.n_cols; ++c) dot += xi[c] * xt[c];
                const double dist = norms_[i] + norms_[t] - 2.0 * dot;
                qrow[t] = y[i] * y[t] * std::exp(-gamma_ * std::max(0.0, dist));
            }
            lru_.push_front(i);
            auto [pos, inserted] =
                index_.emplace(i, std::make_pair(lru_.begin(), std::move(qrow)));
            return pos->second.second.data();
        }

    private:
        const FeatureTable& train_;
        double gamma_;
        std::vector<double> norms_;
        std::size_t max_rows_;
        std::list<std::size_t> lru_;
        std::unordered_map<std::size_t,
                           std::pair<std::list<std::size_t>::iterator, std::vector<double>>>
            index_;
    };

    std::vector<double> sv_coef_;  // alpha_i * y_i per support vector
    std::vector<double> sv_;       // support vector rows, flattened
    std::size_t dim_ = 0;
    double gamma_ = 0, C_ = 1, rho_ = 0;
    std::size_t iterations_ = 0;
    double final_violation_ = 0;
};

}  // namespace churnkit
