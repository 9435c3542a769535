#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "belle/nig.hpp"
#include "belle/ops.hpp"
#include "belle/special.hpp"

namespace belle {
namespace edl {

constexpr double kDefaultLambda = 0.5;

struct EdlLossBreakdown {
    double nll = 0.0;
    double reg = 0.0;
    double total = 0.0;
    double lambda = kDefaultLambda;
};

namespace detail {

// One dimension of the marginal negative log likelihood, written with
// Omega = 2 beta (1 + nu).
inline double nll_dim(double y, double g, double nu, double a, double b) {
    const double omega = 2.0 * b * (1.0 + nu);
    const double r = y - g;
    return 0.5 * std::log(M_PI / nu) - a * std::log(omega) +
           (a + 0.5) * std::log(nu * r * r + omega) + log_gamma(a) - log_gamma(a + 0.5);
}

struct DimGrad {
    double d_gamma, d_nu, d_alpha, d_beta;
};

inline DimGrad nll_grad_dim(double y, double g, double nu, double a, double b) {
    const double omega = 2.0 * b * (1.0 + nu);
    const double r = y - g;
    const double s = nu * r * r + omega;
    DimGrad out;
    out.d_gamma = -(a + 0.5) * 2.0 * nu * r / s;
    out.d_nu = -0.5 / nu - a * 2.0 * b / omega + (a + 0.5) * (r * r + 2.0 * b) / s;
    out.d_alpha = -std::log(omega) + std::log(s) + digamma(a) - digamma(a + 0.5);
    out.d_beta = -a / b + (a + 0.5) * 2.0 * (1.0 + nu) / s;
    return out;
}

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// Sum over dimensions of the marginal NLL of y under the prior.
inline double nll(const std::vector<double>& y, const NIGParams& p) {
    if (y.size() != p.gamma.size()) throw ShapeError("edl nll: dimension mismatch");
    p.validate();
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        acc += detail::nll_dim(y[i], p.gamma[i], p.nu[i], p.alpha[i], p.beta[i]);
    }
    return acc;
}

// Evidence penalty |y - gamma| (2 nu + alpha), summed over dimensions. Zero
// exactly when the prediction lands on the target; grows linearly with the
// residual so misplaced evidence cannot hide in the NLL's log growth.
inline double evidence_regularizer(const std::vector<double>& y, const NIGParams& p) {
    if (y.size() != p.gamma.size()) throw ShapeError("evidence_regularizer: dimension mismatch");
    p.validate();
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        acc += std::fabs(y[i] - p.gamma[i]) * (2.0 * p.nu[i] + p.alpha[i]);
    }
    return acc;
}

inline EdlLossBreakdown edl_loss(const std::vector<double>& y, const NIGParams& p,
                                 double lambda = kDefaultLambda) {
    if (lambda < 0.0) throw ValueError("edl_loss: lambda must be nonnegative");
    EdlLossBreakdown out;
    out.lambda = lambda;
    out.nll = nll(y, p);
    out.reg = evidence_regularizer(y, p);
    out.total = out.nll + lambda * out.reg;
    return out;
}

struct EdlGrad {
    std::vector<double> d_gamma, d_nu, d_alpha, d_beta;
};

// Analytic gradient of the total loss with respect to the four parameter
// vectors. At the |.| kink (y == gamma) the regularizer contributes 0 to the
// gamma gradient.
inline EdlGrad edl_grad(const std::vector<double>& y, const NIGParams& p,
                        double lambda = kDefaultLambda) {
    if (y.size() != p.gamma.size()) throw ShapeError("edl_grad: dimension mismatch");
    p.validate();
    const size_t d = y.size();
    EdlGrad g;
    g.d_gamma.resize(d);
    g.d_nu.resize(d);
    g.d_alpha.resize(d);
    g.d_beta.resize(d);
    for (size_t i = 0; i < d; ++i) {
        const auto nllg = detail::nll_grad_dim(y[i], p.gamma[i], p.nu[i], p.alpha[i], p.beta[i]);
        const double r = y[i] - p.gamma[i];
        const double sr = detail::sign0(r);
        g.d_gamma[i] = nllg.d_gamma + lambda * (-sr) * (2.0 * p.nu[i] + p.alpha[i]);
        g.d_nu[i] = nllg.d_nu + lambda * 2.0 * std::fabs(r);
        g.d_alpha[i] = nllg.d_alpha + lambda * std::fabs(r);
        g.d_beta[i] = nllg.d_beta;
    }
    return g;
}

// Tape op: mean over the rows (frames) of the per-frame EDL total, with the
// backward pass routed through edl_grad. gamma/nu/alpha/beta are {T, D}
// tensors of already-constrained values; y holds the targets.
inline Tensor edl_loss_rows(GradTape* tape, Tensor gamma, Tensor nu, Tensor alpha, Tensor beta,
                            Tensor y, double lambda) {
    check_same_shape("edl_loss_rows", gamma, y);
    check_same_shape("edl_loss_rows", gamma, nu);
    check_same_shape("edl_loss_rows", gamma, alpha);
    check_same_shape("edl_loss_rows", gamma, beta);
    const int64_t T = gamma.dim(0), D = gamma.dim(1);
    double acc = 0.0;
    for (int64_t t = 0; t < T; ++t) {
        for (int64_t i = 0; i < D; ++i) {
            acc += detail::nll_dim(y.at(t, i), gamma.at(t, i), nu.at(t, i), alpha.at(t, i),
                                   beta.at(t, i)) +
                   lambda * std::fabs(y.at(t, i) - gamma.at(t, i)) *
                       (2.0 * nu.at(t, i) + alpha.at(t, i));
        }
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(T));
    const bool any = gamma.requires_grad() || nu.requires_grad() || alpha.requires_grad() ||
                     beta.requires_grad();
    if (tape_active(tape, any)) {
        out.set_requires_grad(true);
        tape->record("edl_loss_rows", [gamma, nu, alpha, beta, y, out, lambda, T, D]() mutable {
            out.ensure_grad();
            const double g0 = out.grad()[0] / static_cast<double>(T);
            gamma.ensure_grad();
            nu.ensure_grad();
            alpha.ensure_grad();
            beta.ensure_grad();
            for (int64_t t = 0; t < T; ++t) {
                for (int64_t i = 0; i < D; ++i) {
                    const double gv = gamma.at(t, i), nv = nu.at(t, i), av = alpha.at(t, i),
                                 bv = beta.at(t, i), yv = y.at(t, i);
                    const auto nllg = detail::nll_grad_dim(yv, gv, nv, av, bv);
                    const double r = yv - gv;
                    const double sr = detail::sign0(r);
                    if (gamma.requires_grad())
                        gamma.grad()[t * D + i] += g0 * (nllg.d_gamma + lambda * (-sr) * (2.0 * nv + av));
                    if (nu.requires_grad())
                        nu.grad()[t * D + i] += g0 * (nllg.d_nu + lambda * 2.0 * std::fabs(r));
                    if (alpha.requires_grad())
                        alpha.grad()[t * D + i] += g0 * (nllg.d_alpha + lambda * std::fabs(r));
                    if (beta.requires_grad()) beta.grad()[t * D + i] += g0 * nllg.d_beta;
                }
            }
        });
    }
    return out;
}

}  // namespace edl
}  // namespace belle
