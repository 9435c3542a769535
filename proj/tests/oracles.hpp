// Test-only numerical oracles, kept independent of the library's loss and
// density code paths: adaptive quadrature of the raw NIG joint density, used
// to pin the frozen expected values in the suites below.
#pragma once

#include <cmath>
#include <functional>

namespace oracle {

inline double simpson(const std::function<double(double)>& f, double a, double m, double b,
                      double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double fa, double fm, double fb, double whole, double tol,
                                   int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, lm, m, fa, flm, fm);
    const double right = simpson(f, m, rm, b, fm, frm, fb);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol) {
        return left + right + (left + right - whole) / 15.0;
    }
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol,
                        int depth = 40) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    const double whole = simpson(f, a, m, b, fa, fm, fb);
    return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

// Raw NIG joint density, written out directly from its closed form (not via
// the library's log-density helper).
inline double nig_joint_pdf(double mu, double sigma2, double g, double nu, double a, double b) {
    if (sigma2 <= 0.0) return 0.0;
    return std::pow(b, a) * std::sqrt(nu) / (std::tgamma(a) * std::sqrt(2.0 * M_PI * sigma2)) *
           std::pow(1.0 / sigma2, a + 1.0) *
           std::exp(-(2.0 * b + nu * (g - mu) * (g - mu)) / (2.0 * sigma2));
}

inline double normal_pdf(double y, double mu, double sigma2) {
    return std::exp(-(y - mu) * (y - mu) / (2.0 * sigma2)) / std::sqrt(2.0 * M_PI * sigma2);
}

// Integral over (mu, sigma2) of w(mu, sigma2) * NIG(mu, sigma2). Substitutes
// sigma2 = exp(u) so both tails are handled by a finite u-range.
inline double nig_double_integral(const std::function<double(double, double)>& w, double g,
                                  double nu, double a, double b, double tol = 1e-10) {
    auto outer = [&](double u) {
        const double sigma2 = std::exp(u);
        const double spread = std::sqrt(sigma2 * (1.0 + 1.0 / nu));
        const double lo = g - 12.0 * spread - 1.0;
        const double hi = g + 12.0 * spread + 1.0;
        auto inner = [&](double mu) { return w(mu, sigma2) * nig_joint_pdf(mu, sigma2, g, nu, a, b); };
        return sigma2 * integrate(inner, lo, hi, tol);  // jacobian of the substitution
    };
    return integrate(outer, -16.0, 12.0, tol);
}

// Total mass of the NIG joint density; 1 for a proper prior.
inline double nig_normalization(double g, double nu, double a, double b) {
    return nig_double_integral([](double, double) { return 1.0; }, g, nu, a, b);
}

// Marginal density of an observation y under the prior, marginalizing the
// Gaussian likelihood over (mu, sigma2) by quadrature.
inline double nig_marginal_pdf(double y, double g, double nu, double a, double b) {
    return nig_double_integral(
        [y](double mu, double sigma2) { return normal_pdf(y, mu, sigma2); }, g, nu, a, b);
}

}  // namespace oracle
