#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "churnkit/model.hpp"
#include "churnkit/parallel.hpp"
#include "churnkit/rng.hpp"

namespace churnkit {

/// Single-hidden-layer network: `size` logistic units plus one logistic
/// output, trained on cross-entropy plus decay * sum(w^2) over every weight
/// and bias. Parameter layout: hidden unit u owns [u*(d+1), u*(d+1)+d]
/// (inputs then bias), followed by the output unit's h weights and bias.
class AnnClassifier : public Classifier {
public:
    struct LossGrad {
        double loss = 0;
        std::vector<double> grad;
    };

    /// Exact backpropagation gradient of the regularized loss. Cross-entropy
    /// is evaluated from the output pre-activation (softplus form), so the
    /// value is finite and the gradient is exactly (o - y) * ... everywhere.
    static LossGrad loss_and_gradient(const std::vector<double>& params,
                                      const FeatureTable& x,
                                      const std::vector<double>& targets, double decay,
                                      std::size_t hidden) {
        const std::size_t d = x.n_cols;
        const std::size_t p = n_params(d, hidden);
        require(params.size() == p, "ann: parameter vector has the wrong length");
        require(targets.size() == x.n_rows, "ann: target vector length mismatch");

        // Fixed-size chunks, combined in index order: the reduction is
        // bit-identical for every thread count.
        const std::size_t chunk = 1024;
        const std::size_t n_chunks = x.n_rows == 0 ? 0 : 1 + (x.n_rows - 1) / chunk;
        std::vector<LossGrad> partial(n_chunks);
        parallel_for(n_chunks, [&](std::size_t ci) {
            LossGrad lg;
            lg.grad.assign(p, 0.0);
            std::vector<double> z(hidden), delta_z(hidden);
            const std::size_t lo = ci * chunk;
            const std::size_t hi = std::min(x.n_rows, lo + chunk);
            const double* out_w = params.data() + hidden * (d + 1);
            for (std::size_t r = lo; r < hi; ++r) {
                const auto row = x.row(r);
                for (std::size_t u = 0; u < hidden; ++u) {
                    const double* w = params.data() + u * (d + 1);
                    double a = w[d];
                    for (std::size_t c = 0; c < d; ++c) a += w[c] * row[c];
                    z[u] = logistic(a);
                }
                double ao = out_w[hidden];
                for (std::size_t u = 0; u < hidden; ++u) ao += out_w[u] * z[u];

                const double y = targets[r];
                lg.loss += softplus(ao) - y * ao;
                const double delta_o = logistic(ao) - y;

                double* gout = lg.grad.data() + hidden * (d + 1);
                for (std::size_t u = 0; u < hidden; ++u) gout[u] += delta_o * z[u];
                gout[hidden] += delta_o;
                for (std::size_t u = 0; u < hidden; ++u)
                    delta_z[u] = delta_o * out_w[u] * z[u] * (1.0 - z[u]);
                for (std::size_t u = 0; u < hidden; ++u) {
                    double* gw = lg.grad.data() + u * (d + 1);
                    const double dz = delta_z[u];
                    if (dz == 0.0) continue;
                    for (std::size_t c = 0; c < d; ++c) gw[c] += dz * row[c];
                    gw[d] += dz;
                }
            }
            partial[ci] = std::move(lg);
        });

        LossGrad total;
        total.grad.assign(p, 0.0);
        for (const auto& lg : partial) {
            total.loss += lg.loss;
            for (std::size_t i = 0; i < p; ++i) total.grad[i] += lg.grad[i];
        }
        for (std::size_t i = 0; i < p; ++i) {
            total.loss += decay * params[i] * params[i];
            total.grad[i] += 2.0 * decay * params[i];
        }
        return total;
    }

    static std::unique_ptr<AnnClassifier> fit(const FeatureTable& train, const ModelSpec& spec) {
        spec.validate();
        require(train.has_labels(), "ann: training table has no labels");
        const std::size_t hidden = static_cast<std::size_t>(spec.get("size", 5));
        const double decay = spec.get("decay", 0.1);
        const std::size_t max_iter = static_cast<std::size_t>(spec.get("max_iter", 500));

        auto model = std::make_unique<AnnClassifier>();
        model->set_fingerprint(train);
        model->hidden_ = hidden;
        model->dim_ = train.n_cols;

        std::vector<double> targets(train.n_rows);
        for (std::size_t r = 0; r < train.n_rows; ++r)
            targets[r] = train.labels[r] == Label::Left ? 1.0 : 0.0;

        Rng rng(derive_seed(spec.seed, "ann.init"));
        std::vector<double> params(n_params(train.n_cols, hidden));
        for (auto& w : params) w = rng.uniform(-0.5, 0.5);

        minimize_lbfgs(params, train, targets, decay, hidden, max_iter, 1e-5);
        model->params_ = std::move(params);
        return model;
    }

    Family family() const override { return Family::ann; }

    std::vector<double> predict_scores(const FeatureTable& t) const override {
        check_fingerprint(t);
        std::vector<double> out(t.n_rows);
        std::vector<double> z(hidden_);
        const double* out_w = params_.data() + hidden_ * (dim_ + 1);
        for (std::size_t r = 0; r < t.n_rows; ++r) {
            const auto row = t.row(r);
            for (std::size_t u = 0; u < hidden_; ++u) {
                const double* w = params_.data() + u * (dim_ + 1);
                double a = w[dim_];
                for (std::size_t c = 0; c < dim_; ++c) a += w[c] * row[c];
                z[u] = logistic(a);
            }
            double ao = out_w[hidden_];
            for (std::size_t u = 0; u < hidden_; ++u) ao += out_w[u] * z[u];
            out[r] = logistic(ao);
        }
        return out;
    }

    const std::vector<double>& parameters() const { return params_; }
    std::size_t hidden_units() const { return hidden_; }

    /// Layer sizes plus the full weight vector: the textual form of the
    /// fitted architecture.
    nlohmann::json to_json() const override {
        return {{"family", "ann"},
                {"format_version", 1},
                {"layers", {dim_, hidden_, 1}},
                {"weights", params_}};
    }

    static std::size_t n_params(std::size_t d, std::size_t hidden) {
        return hidden * (d + 1) + hidden + 1;
    }

private:
    static double logistic(double a) {
        if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
        const double e = std::exp(a);
        return e / (1.0 + e);
    }

    static double softplus(double a) {
        if (a > 0) return a + std::log1p(std::exp(-a));
        return std::log1p(std::exp(a));
    }

    /// L-BFGS (m = 10) with a strong-Wolfe line search. Stops at gradient
    /// norm <= tol or after max_iter iterations.
    static void minimize_lbfgs(std::vector<double>& params, const FeatureTable& x,
                               const std::vector<double>& targets, double decay,
                               std::size_t hidden, std::size_t max_iter, double tol) {
        const std::size_t p = params.size();
        const std::size_t m = 10;
        std::vector<std::vector<double>> s_hist, y_hist;
        std::vector<double> rho_hist;

        auto eval = [&](const std::vector<double>& w) {
            LossGrad lg = loss_and_gradient(w, x, targets, decay, hidden);
            require(std::isfinite(lg.loss), "ann: non-finite loss during training");
            return lg;
        };

        LossGrad cur = eval(params);
        for (std::size_t iter = 0; iter < max_iter; ++iter) {
            const double gnorm = norm(cur.grad);
            if (gnorm <= tol) break;

            // Two-loop recursion for the search direction.
            std::vector<double> q = cur.grad;
            const std::size_t k = s_hist.size();
            std::vector<double> alpha_buf(k);
            for (std::size_t h = k; h-- > 0;) {
                alpha_buf[h] = rho_hist[h] * dot(s_hist[h], q);
                axpy(q, y_hist[h], -alpha_buf[h]);
            }
            if (k > 0) {
                const double gamma =
                    dot(s_hist[k - 1], y_hist[k - 1]) / dot(y_hist[k - 1], y_hist[k - 1]);
                for (auto& v : q) v *= gamma;
            }
            for (std::size_t h = 0; h < k; ++h) {
                const double beta = rho_hist[h] * dot(y_hist[h], q);
                axpy(q, s_hist[h], alpha_buf[h] - beta);
            }
            for (auto& v : q) v = -v;  // descent direction

            double dg = dot(q, cur.grad);
            if (dg >= 0) {  // not a descent direction; restart from steepest descent
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                for (std::size_t i = 0; i < p; ++i) q[i] = -cur.grad[i];
                dg = -gnorm * gnorm;
            }

            const double step0 = k == 0 ? std::min(1.0, 1.0 / gnorm) : 1.0;
            const auto ls = wolfe_line_search(params, q, cur, dg, step0, eval);
            if (!ls.ok) break;  // no further progress possible

            std::vector<double> s(p), yv(p);
            for (std::size_t i = 0; i < p; ++i) {
                s[i] = ls.point[i] - params[i];
                yv[i] = ls.at_point.grad[i] - cur.grad[i];
            }
            const double sy = dot(s, yv);
            if (sy > 1e-10) {
                if (s_hist.size() == m) {
                    s_hist.erase(s_hist.begin());
                    y_hist.erase(y_hist.begin());
                    rho_hist.erase(rho_hist.begin());
                }
                s_hist.push_back(std::move(s));
                y_hist.push_back(std::move(yv));
                rho_hist.push_back(1.0 / sy);
            }
            params = ls.point;
            cur = std::move(ls.at_point);
        }
    }

    struct LineSearchResult {
        bool ok = false;
        std::vector<double> point;
        LossGrad at_point;
    };

    template <typename Eval>
    static LineSearchResult wolfe_line_search(const std::vector<double>& x0,
                                              const std::vector<double>& dir,
                                              const LossGrad& f0, double dg0, double step0,
                                              Eval&& eval) {
        constexpr double c1 = 1e-4, c2 = 0.9;
        LineSearchResult res;
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double step = step0;
        double f_lo = f0.loss, g_lo = dg0;

        std::vector<double> trial(x0.size());
        for (int it = 0; it < 60; ++it) {
            for (std::size_t i = 0; i < x0.size(); ++i) trial[i] = x0[i] + step * dir[i];
            LossGrad lg = eval(trial);
            const double dg = dot(lg.grad, dir);
            if (lg.loss > f0.loss + c1 * step * dg0) {
                hi = step;
            } else if (std::fabs(dg) <= -c2 * dg0) {
                res.ok = true;
                res.point = trial;
                res.at_point = std::move(lg);
                return res;
            } else if (dg >= 0) {
                hi = step;
            } else {
                lo = step;
                f_lo = lg.loss;
                g_lo = dg;
                // Sufficient decrease holds; keep this point as a fallback.
                res.ok = true;
                res.point = trial;
                res.at_point = std::move(lg);
            }
            if (std::isinf(hi)) {
                step *= 2.0;
            } else {
                step = 0.5 * (lo + hi);
                if (hi - lo < 1e-16 * std::max(1.0, lo)) break;
            }
        }
        (void)f_lo;
        (void)g_lo;
        return res;  // best point satisfying Armijo, if any
    }

    static double dot(const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }

    static void axpy(std::vector<double>& y, const std::vector<double>& x, double a) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
    }

    static double norm(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

    std::vector<double> params_;
    std::size_t hidden_ = 0, dim_ = 0;
};

}  // namespace churnkit
