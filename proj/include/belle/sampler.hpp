#pragma once

#include <cmath>
#include <vector>

#include "belle/nig.hpp"
#include "belle/ops.hpp"
#include "belle/rng.hpp"

namespace belle {
namespace sampler {

// Marsaglia-Tsang squeeze method for Gamma(alpha, 1), alpha >= 1.
inline double sample_gamma_unit(double alpha, RngStream& rng) {
    if (!(alpha >= 1.0)) throw ValueError("sample_gamma_unit: requires alpha >= 1");
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = rng.normal();
        const double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        const double v = t * t * t;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

// sigma2_i ~ InvGamma(alpha_i, beta_i), realised as beta_i / Gamma(alpha_i, 1).
inline std::vector<double> sample_inverse_gamma(const std::vector<double>& alpha,
                                                const std::vector<double>& beta, RngStream& rng) {
    if (alpha.size() != beta.size()) throw ShapeError("sample_inverse_gamma: length mismatch");
    std::vector<double> sigma2(alpha.size());
    for (size_t i = 0; i < alpha.size(); ++i) {
        if (!(alpha[i] > 1.0) || !(beta[i] > 0.0)) {
            throw NumericError("sample_inverse_gamma: need alpha > 1 and beta > 0 at dim " +
                               std::to_string(i));
        }
        sigma2[i] = beta[i] / sample_gamma_unit(alpha[i], rng);
    }
    return sigma2;
}

// Three-stage draw: sigma2 ~ InvGamma(alpha, beta_scale * beta),
// mu ~ N(gamma, sigma2 / nu), z ~ N(mu, sigma2). With beta_scale = 1 the
// marginal of z is the Student-t predictive; beta_scale is the inference-time
// diversity knob (variance scales linearly with it).
inline std::vector<double> sample_hierarchical(const NIGParams& p, RngStream& rng,
                                               double beta_scale = 1.0) {
    p.validate();
    if (!(beta_scale > 0.0)) throw ValueError("sample_hierarchical: beta_scale must be positive");
    const size_t d = p.gamma.size();
    std::vector<double> z(d);
    for (size_t i = 0; i < d; ++i) {
        const double sigma2 = beta_scale * p.beta[i] / sample_gamma_unit(p.alpha[i], rng);
        const double mu = p.gamma[i] + std::sqrt(sigma2 / p.nu[i]) * rng.normal();
        z[i] = mu + std::sqrt(sigma2) * rng.normal();
    }
    return z;
}

// Raw material for one hierarchical draw, kept separate so a training step
// can re-express z as a deterministic function of (gamma, nu) given frozen
// noise: z = gamma + sigma * eps1 / sqrt(nu) + sigma * eps2.
struct HierarchicalNoise {
    std::vector<double> sigma;  // sqrt of the inverse-gamma draw
    std::vector<double> eps1;
    std::vector<double> eps2;
};

inline HierarchicalNoise draw_hierarchical_noise(const std::vector<double>& alpha,
                                                 const std::vector<double>& beta, RngStream& rng) {
    HierarchicalNoise n;
    n.sigma = sample_inverse_gamma(alpha, beta, rng);
    for (auto& s : n.sigma) s = std::sqrt(s);
    n.eps1.resize(n.sigma.size());
    n.eps2.resize(n.sigma.size());
    for (size_t i = 0; i < n.sigma.size(); ++i) {
        n.eps1[i] = rng.normal();
        n.eps2[i] = rng.normal();
    }
    return n;
}

// Tape op for the training path. sigma/eps1/eps2 are treated as constants
// (the inverse-gamma draw carries no pathwise gradient), so gradients reach
// gamma directly and nu through sigma / sqrt(nu); alpha and beta train only
// through the evidential loss.
inline Tensor hierarchical_sample_rows(GradTape* tape, Tensor gamma, Tensor nu,
                                       std::shared_ptr<const std::vector<double>> sigma,
                                       std::shared_ptr<const std::vector<double>> eps1,
                                       std::shared_ptr<const std::vector<double>> eps2) {
    check_same_shape("hierarchical_sample", gamma, nu);
    const int64_t n = gamma.numel();
    if (static_cast<int64_t>(sigma->size()) != n || static_cast<int64_t>(eps1->size()) != n ||
        static_cast<int64_t>(eps2->size()) != n) {
        throw ShapeError("hierarchical_sample: noise length mismatch");
    }
    Tensor z = Tensor::zeros(gamma.shape());
    for (int64_t i = 0; i < n; ++i) {
        const size_t s = static_cast<size_t>(i);
        z.at(i) = gamma.at(i) + (*sigma)[s] * ((*eps1)[s] / std::sqrt(nu.at(i)) + (*eps2)[s]);
    }
    if (tape_active(tape, gamma.requires_grad() || nu.requires_grad())) {
        z.set_requires_grad(true);
        tape->record("hierarchical_sample", [gamma, nu, z, sigma, eps1]() mutable {
            z.ensure_grad();
            const int64_t n = z.numel();
            if (gamma.requires_grad()) {
                gamma.ensure_grad();
                for (int64_t i = 0; i < n; ++i) gamma.grad()[i] += z.grad()[i];
            }
            if (nu.requires_grad()) {
                nu.ensure_grad();
                for (int64_t i = 0; i < n; ++i) {
                    const double nv = nu.at(i);
                    nu.grad()[i] += z.grad()[i] * (*sigma)[static_cast<size_t>(i)] *
                                    (*eps1)[static_cast<size_t>(i)] * (-0.5) / (nv * std::sqrt(nv));
                }
            }
        });
    }
    return z;
}

// ---- Gaussian baseline head ----

struct GaussianHead {
    std::vector<double> mu;
    std::vector<double> log_sigma2;

    void validate() const {
        if (mu.size() != log_sigma2.size()) throw ShapeError("GaussianHead: length mismatch");
        for (size_t i = 0; i < mu.size(); ++i) {
            if (!std::isfinite(mu[i]) || !std::isfinite(log_sigma2[i])) {
                throw NumericError("GaussianHead: non-finite entry at dim " + std::to_string(i));
            }
        }
    }
};

constexpr double kLogVarFloor = -30.0;

// z = mu + sigma .* eps via the reparameterization trick; log variance is
// floored at -30 so a collapsed head degrades to z = mu.
inline std::vector<double> sample_gaussian_baseline(const GaussianHead& h, RngStream& rng) {
    h.validate();
    std::vector<double> z(h.mu.size());
    for (size_t i = 0; i < z.size(); ++i) {
        const double lv = std::max(h.log_sigma2[i], kLogVarFloor);
        z[i] = h.mu[i] + std::exp(0.5 * lv) * rng.normal();
    }
    return z;
}

// KL( N(mu, sigma2) || N(y, I) ), summed over dimensions:
// 0.5 (sigma2 + (mu - y)^2 - 1 - log sigma2) per dimension.
inline double kl_gaussian_to_prior(const GaussianHead& h, const std::vector<double>& y) {
    h.validate();
    if (y.size() != h.mu.size()) throw ShapeError("kl_gaussian_to_prior: dimension mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        const double s2 = std::exp(h.log_sigma2[i]);
        const double r = h.mu[i] - y[i];
        acc += 0.5 * (s2 + r * r - 1.0 - h.log_sigma2[i]);
    }
    return acc;
}

}  // namespace sampler
}  // namespace belle
