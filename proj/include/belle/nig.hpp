#pragma once

#include <cmath>
#include <vector>

#include "belle/errors.hpp"
#include "belle/ops.hpp"
#include "belle/special.hpp"

namespace belle {

// Floor added by the constraint activations so nu and beta stay strictly
// positive and alpha stays strictly above 1.
constexpr double kConstrainEps = 1e-6;

// Per-frame hyperparameters of the Normal-Inverse-Gamma prior, one entry per
// mel dimension: location gamma, virtual observation count nu (> 0),
// inverse-gamma shape alpha (> 1) and scale beta (> 0).
struct NIGParams {
    std::vector<double> gamma;
    std::vector<double> nu;
    std::vector<double> alpha;
    std::vector<double> beta;

    int64_t dims() const { return static_cast<int64_t>(gamma.size()); }

    void validate() const {
        const size_t d = gamma.size();
        if (nu.size() != d || alpha.size() != d || beta.size() != d) {
            throw ShapeError("NIGParams: field lengths disagree");
        }
        for (size_t i = 0; i < d; ++i) {
            if (!std::isfinite(gamma[i]) || !std::isfinite(nu[i]) || !std::isfinite(alpha[i]) ||
                !std::isfinite(beta[i])) {
                throw NumericError("NIGParams: non-finite entry at dim " + std::to_string(i));
            }
            if (!(nu[i] > 0.0 && alpha[i] > 1.0 && beta[i] > 0.0)) {
                throw NumericError("NIGParams: constraint violation at dim " + std::to_string(i) +
                                   " (nu=" + std::to_string(nu[i]) + ", alpha=" +
                                   std::to_string(alpha[i]) + ", beta=" + std::to_string(beta[i]) + ")");
            }
        }
    }
};

// Diagonal Student-t: per-dimension location, squared scale and degrees of
// freedom. dof > 2 follows from alpha > 1, keeping the variance finite.
struct StudentTParams {
    std::vector<double> loc;
    std::vector<double> scale_sq;
    std::vector<double> dof;

    int64_t dims() const { return static_cast<int64_t>(loc.size()); }

    void validate() const {
        for (size_t i = 0; i < loc.size(); ++i) {
            if (!(scale_sq[i] > 0.0) || !(dof[i] > 2.0)) {
                throw NumericError("StudentTParams: invalid scale/dof at dim " + std::to_string(i));
            }
        }
    }
};

// Maps a raw head output [gamma | nu | alpha | beta] (length 4D) onto the
// constrained parameter ranges: identity for gamma, softplus + eps for nu
// and beta, 1 + eps + softplus for alpha.
inline NIGParams constrain_raw(const std::vector<double>& raw) {
    if (raw.size() % 4 != 0 || raw.empty()) {
        throw ShapeError("constrain_raw: raw length must be a positive multiple of 4");
    }
    const size_t d = raw.size() / 4;
    for (double v : raw) {
        if (!std::isfinite(v)) throw NumericError("constrain_raw: non-finite raw input");
    }
    NIGParams p;
    p.gamma.assign(raw.begin(), raw.begin() + d);
    p.nu.resize(d);
    p.alpha.resize(d);
    p.beta.resize(d);
    for (size_t i = 0; i < d; ++i) {
        p.nu[i] = detail::softplus_scalar(raw[d + i]) + kConstrainEps;
        p.alpha[i] = 1.0 + kConstrainEps + detail::softplus_scalar(raw[2 * d + i]);
        p.beta[i] = detail::softplus_scalar(raw[3 * d + i]) + kConstrainEps;
    }
    return p;
}

// Marginal predictive distribution of an observation under the prior:
// St(gamma, beta (1 + nu) / (nu alpha), 2 alpha), element-wise, with the
// middle argument read as squared scale.
inline StudentTParams predictive(const NIGParams& p) {
    p.validate();
    const size_t d = p.gamma.size();
    StudentTParams st;
    st.loc = p.gamma;
    st.scale_sq.resize(d);
    st.dof.resize(d);
    for (size_t i = 0; i < d; ++i) {
        st.scale_sq[i] = p.beta[i] * (1.0 + p.nu[i]) / (p.nu[i] * p.alpha[i]);
        st.dof[i] = 2.0 * p.alpha[i];
    }
    return st;
}

// Sum over dimensions of the diagonal Student-t log density.
inline double student_t_log_pdf(const std::vector<double>& y, const StudentTParams& st) {
    if (y.size() != st.loc.size()) throw ShapeError("student_t_log_pdf: dimension mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double d = st.dof[i];
        const double s2 = st.scale_sq[i];
        const double r = y[i] - st.loc[i];
        acc += log_gamma(0.5 * (d + 1.0)) - log_gamma(0.5 * d) - 0.5 * std::log(d * M_PI * s2) -
               0.5 * (d + 1.0) * std::log1p(r * r / (d * s2));
    }
    return acc;
}

// Log of the joint NIG density p(mu, sigma2 | gamma, nu, alpha, beta) for a
// single dimension.
inline double nig_log_density(double mu, double sigma2, const NIGParams& p) {
    if (p.dims() != 1) throw ShapeError("nig_log_density: expects scalar-dimension params");
    p.validate();
    if (!(sigma2 > 0.0)) {
        throw ValueError("nig_log_density: sigma2 must be positive, got " + std::to_string(sigma2));
    }
    const double g = p.gamma[0], nu = p.nu[0], a = p.alpha[0], b = p.beta[0];
    return a * std::log(b) + 0.5 * std::log(nu) - log_gamma(a) - 0.5 * std::log(2.0 * M_PI * sigma2) -
           (a + 1.0) * std::log(sigma2) - (2.0 * b + nu * (g - mu) * (g - mu)) / (2.0 * sigma2);
}

}  // namespace belle
