#pragma once

#include <cmath>
#include <limits>

#include "churnkit/error.hpp"

// Regularized incomplete gamma functions, series + continued fraction form.
// Accuracy target: absolute error <= 1e-12 over the chi-square range used
// here (df up to a few hundred), comfortably inside the 1e-10 contract.

namespace churnkit {

inline double log_gamma(double x) {
    // Lanczos, g=7, n=9.
    static const double coef[9] = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (x < 0.5) {
        // reflection
        return std::log(3.141592653589793238462643383279502884 /
                        std::sin(3.141592653589793238462643383279502884 * x)) -
               log_gamma(1.0 - x);
    }
    x -= 1.0;
    double a = coef[0];
    const double t = x + 7.5;
    for (int i = 1; i < 9; ++i) a += coef[i] / (x + i);
    return 0.5 * std::log(2.0 * 3.141592653589793238462643383279502884) +
           (x + 0.5) * std::log(t) - t + std::log(a);
}

namespace detail {

inline double gamma_p_series(double a, double x) {
    double sum = 1.0 / a;
    double term = sum;
    for (int n = 1; n < 10000; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    // Lentz's algorithm for the continued fraction of Q(a, x).
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 10000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-17) break;
    }
    return std::exp(-x + a * std::log(x) - log_gamma(a)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    require(a > 0.0 && x >= 0.0, "gamma_p: need a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_contfrac(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
    require(a > 0.0 && x >= 0.0, "gamma_q: need a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_contfrac(a, x);
}

/// Upper-tail probability of the chi-square distribution.
inline double chi_square_survival(double x, int df) {
    require(x >= 0.0, "chi_square_survival: statistic must be >= 0");
    require(df >= 1, "chi_square_survival: df must be positive");
    return gamma_q(0.5 * df, 0.5 * x);
}

}  // namespace churnkit
