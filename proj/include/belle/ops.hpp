#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "belle/rng.hpp"
#include "belle/special.hpp"
#include "belle/tape.hpp"
#include "belle/tensor.hpp"

namespace belle {
namespace detail {

inline double dot(const double* x, const double* y, int64_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += x[i] * y[i];
        s1 += x[i + 1] * y[i + 1];
        s2 += x[i + 2] * y[i + 2];
        s3 += x[i + 3] * y[i + 3];
    }
    for (; i < n; ++i) s0 += x[i] * y[i];
    return (s0 + s1) + (s2 + s3);
}

// C (M x N) = opA(A) * opB(B), optionally accumulating into C.
// Operands are packed so the inner product runs over contiguous memory.
inline void gemm(bool trans_a, bool trans_b, int64_t M, int64_t N, int64_t K, const double* a,
                 const double* b, double* c, bool accumulate) {
    thread_local std::vector<double> pack_a, pack_b;
    const double* ap = a;
    if (trans_a) {  // stored K x M, want rows of A^T
        pack_a.resize(static_cast<size_t>(M * K));
        for (int64_t m = 0; m < M; ++m)
            for (int64_t k = 0; k < K; ++k) pack_a[static_cast<size_t>(m * K + k)] = a[k * M + m];
        ap = pack_a.data();
    }
    const double* bp = b;
    if (!trans_b) {  // stored K x N, want rows of B^T
        pack_b.resize(static_cast<size_t>(N * K));
        for (int64_t k = 0; k < K; ++k)
            for (int64_t n = 0; n < N; ++n) pack_b[static_cast<size_t>(n * K + k)] = b[k * N + n];
        bp = pack_b.data();
    }
    for (int64_t m = 0; m < M; ++m) {
        const double* arow = ap + m * K;
        double* crow = c + m * N;
        for (int64_t n = 0; n < N; ++n) {
            const double v = dot(arow, bp + n * K, K);
            crow[n] = accumulate ? crow[n] + v : v;
        }
    }
}

constexpr double kExpClamp = 709.0;
constexpr double kLogFloor = 1e-300;

inline double stable_exp(double x) { return std::exp(std::min(x, kExpClamp)); }

inline double sigmoid_scalar(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : stable_exp(x) / (1.0 + stable_exp(x));
}

inline double softplus_scalar(double x) {
    // log(1 + e^x) without overflow on either side
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(stable_exp(x));
}

}  // namespace detail

namespace ops {

// ---- elementwise binary ----

inline Tensor add(GradTape* tape, Tensor a, Tensor b) {
    check_same_shape("add", a, b);
    Tensor y = Tensor::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y.at(i) = a.at(i) + b.at(i);
    if (tape_active(tape, a.requires_grad() || b.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("add", [a, b, y]() mutable {
            y.ensure_grad();
            const double* g = y.grad();
            const int64_t n = y.numel();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (int64_t i = 0; i < n; ++i) a.grad()[i] += g[i];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (int64_t i = 0; i < n; ++i) b.grad()[i] += g[i];
            }
        });
    }
    return y;
}

inline Tensor sub(GradTape* tape, Tensor a, Tensor b) {
    check_same_shape("sub", a, b);
    Tensor y = Tensor::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y.at(i) = a.at(i) - b.at(i);
    if (tape_active(tape, a.requires_grad() || b.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("sub", [a, b, y]() mutable {
            y.ensure_grad();
            const double* g = y.grad();
            const int64_t n = y.numel();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (int64_t i = 0; i < n; ++i) a.grad()[i] += g[i];
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (int64_t i = 0; i < n; ++i) b.grad()[i] -= g[i];
            }
        });
    }
    return y;
}

inline Tensor mul(GradTape* tape, Tensor a, Tensor b) {
    check_same_shape("mul", a, b);
    Tensor y = Tensor::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y.at(i) = a.at(i) * b.at(i);
    if (tape_active(tape, a.requires_grad() || b.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("mul", [a, b, y]() mutable {
            y.ensure_grad();
            const double* g = y.grad();
            const int64_t n = y.numel();
            if (a.requires_grad()) {
                a.ensure_grad();
                for (int64_t i = 0; i < n; ++i) a.grad()[i] += g[i] * b.at(i);
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                for (int64_t i = 0; i < n; ++i) b.grad()[i] += g[i] * a.at(i);
            }
        });
    }
    return y;
}

inline Tensor scale(GradTape* tape, Tensor a, double c) {
    Tensor y = Tensor::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y.at(i) = a.at(i) * c;
    if (tape_active(tape, a.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("scale", [a, y, c]() mutable {
            y.ensure_grad();
            a.ensure_grad();
            const int64_t n = y.numel();
            for (int64_t i = 0; i < n; ++i) a.grad()[i] += y.grad()[i] * c;
        });
    }
    return y;
}

inline Tensor add_scalar(GradTape* tape, Tensor a, double c) {
    Tensor y = Tensor::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y.at(i) = a.at(i) + c;
    if (tape_active(tape, a.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("add_scalar", [a, y]() mutable {
            y.ensure_grad();
            a.ensure_grad();
            const int64_t n = y.numel();
            for (int64_t i = 0; i < n; ++i) a.grad()[i] += y.grad()[i];
        });
    }
    return y;
}

// ---- elementwise unary ----

namespace detail_unary {

using ScalarFn = double (*)(double);
using ScalarGradFn = double (*)(double x, double y);

inline Tensor apply(GradTape* tape, const char* name, Tensor x, ScalarFn fwd,
                    ScalarGradFn dydx) {
    Tensor y = Tensor::zeros(x.shape());
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) y.at(i) = fwd(x.at(i));
    if (tape_active(tape, x.requires_grad())) {
        y.set_requires_grad(true);
        tape->record(name, [x, y, dydx]() mutable {
            y.ensure_grad();
            x.ensure_grad();
            const int64_t n = y.numel();
            for (int64_t i = 0; i < n; ++i) x.grad()[i] += y.grad()[i] * dydx(x.at(i), y.at(i));
        });
    }
    return y;
}

}  // namespace detail_unary

inline Tensor relu(GradTape* tape, Tensor x) {
    return detail_unary::apply(
        tape, "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor sigmoid(GradTape* tape, Tensor x) {
    return detail_unary::apply(
        tape, "sigmoid", x, [](double v) { return detail::sigmoid_scalar(v); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(GradTape* tape, Tensor x) {
    return detail_unary::apply(
        tape, "tanh", x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

inline Tensor softplus(GradTape* tape, Tensor x) {
    return detail_unary::apply(
        tape, "softplus", x, [](double v) { return detail::softplus_scalar(v); },
        [](double v, double) { return detail::sigmoid_scalar(v); });
}

inline Tensor log(GradTape* tape, Tensor x) {
    return detail_unary::apply(
        tape, "log", x, [](double v) { return std::log(std::max(v, detail::kLogFloor)); },
        [](double v, double) { return v > detail::kLogFloor ? 1.0 / v : 0.0; });
}

inline Tensor exp(GradTape* tape, Tensor x) {
    return detail_unary::apply(
        tape, "exp", x, [](double v) { return detail::stable_exp(v); },
        [](double, double y) { return y; });
}

// |x| with subgradient 0 at the kink.
inline Tensor abs(GradTape* tape, Tensor x) {
    return detail_unary::apply(
        tape, "abs", x, [](double v) { return std::fabs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

inline Tensor square(GradTape* tape, Tensor x) {
    return detail_unary::apply(
        tape, "square", x, [](double v) { return v * v; },
        [](double v, double) { return 2.0 * v; });
}

inline Tensor log_gamma(GradTape* tape, Tensor x) {
    return detail_unary::apply(
        tape, "log_gamma", x, [](double v) { return belle::log_gamma(v); },
        [](double v, double) { return belle::digamma(v); });
}

inline Tensor clamp(GradTape* tape, Tensor x, double lo, double hi) {
    Tensor y = Tensor::zeros(x.shape());
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) y.at(i) = std::min(std::max(x.at(i), lo), hi);
    if (tape_active(tape, x.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("clamp", [x, y, lo, hi]() mutable {
            y.ensure_grad();
            x.ensure_grad();
            const int64_t n = y.numel();
            for (int64_t i = 0; i < n; ++i) {
                const double v = x.at(i);
                if (v > lo && v < hi) x.grad()[i] += y.grad()[i];
            }
        });
    }
    return y;
}

// ---- matrix products ----

inline Tensor matmul(GradTape* tape, Tensor a, Tensor b, bool trans_a = false,
                     bool trans_b = false) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul: expects rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const int64_t M = trans_a ? a.dim(1) : a.dim(0);
    const int64_t Ka = trans_a ? a.dim(0) : a.dim(1);
    const int64_t Kb = trans_b ? b.dim(1) : b.dim(0);
    const int64_t N = trans_b ? b.dim(0) : b.dim(1);
    if (Ka != Kb) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         (trans_a ? "^T" : "") + " * " + shape_str(b.shape()) +
                         (trans_b ? "^T" : ""));
    }
    Tensor y = Tensor::zeros({M, N});
    detail::gemm(trans_a, trans_b, M, N, Ka, a.data(), b.data(), y.data(), false);
    if (tape_active(tape, a.requires_grad() || b.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("matmul", [a, b, y, trans_a, trans_b, M, N, Ka]() mutable {
            y.ensure_grad();
            const double* g = y.grad();
            if (a.requires_grad()) {
                a.ensure_grad();
                if (!trans_a) {
                    // dA += dC * opB(B)^T
                    detail::gemm(false, !trans_b, M, Ka, N, g, b.data(), a.grad(), true);
                } else {
                    // A stored K x M: dA += opB(B) * dC^T
                    detail::gemm(trans_b, true, Ka, M, N, b.data(), g, a.grad(), true);
                }
            }
            if (b.requires_grad()) {
                b.ensure_grad();
                if (!trans_b) {
                    // dB += opA(A)^T * dC
                    detail::gemm(!trans_a, false, Ka, N, M, a.data(), g, b.grad(), true);
                } else {
                    // B stored N x K: dB += dC^T * opA(A)
                    detail::gemm(true, trans_a, N, Ka, M, g, a.data(), b.grad(), true);
                }
            }
        });
    }
    return y;
}

// y = x * W + bias, with x {T, in}, W {in, out}, bias {out}.
inline Tensor linear(GradTape* tape, Tensor x, Tensor w, Tensor bias) {
    if (x.rank() != 2 || w.rank() != 2 || bias.rank() != 1) {
        throw ShapeError("linear: bad ranks " + shape_str(x.shape()) + ", " + shape_str(w.shape()) +
                         ", " + shape_str(bias.shape()));
    }
    if (x.dim(1) != w.dim(0) || w.dim(1) != bias.dim(0)) {
        throw ShapeError("linear: shape mismatch " + shape_str(x.shape()) + " * " +
                         shape_str(w.shape()) + " + " + shape_str(bias.shape()));
    }
    const int64_t T = x.dim(0), out = w.dim(1);
    Tensor y = matmul(tape, x, w);
    for (int64_t t = 0; t < T; ++t)
        for (int64_t o = 0; o < out; ++o) y.at(t, o) += bias.at(o);
    if (tape_active(tape, bias.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("linear_bias", [bias, y, T, out]() mutable {
            y.ensure_grad();
            bias.ensure_grad();
            for (int64_t t = 0; t < T; ++t)
                for (int64_t o = 0; o < out; ++o) bias.grad()[o] += y.grad()[t * out + o];
        });
    }
    return y;
}

// ---- softmax family ----

inline Tensor softmax(GradTape* tape, Tensor x) {
    if (x.rank() != 2 && x.rank() != 1) throw ShapeError("softmax: expects rank 1 or 2");
    const int64_t R = x.rank() == 2 ? x.dim(0) : 1;
    const int64_t C = x.rank() == 2 ? x.dim(1) : x.dim(0);
    Tensor y = Tensor::zeros(x.shape());
    for (int64_t r = 0; r < R; ++r) {
        const double* xr = x.data() + r * C;
        double* yr = y.data() + r * C;
        double mx = xr[0];
        for (int64_t c = 1; c < C; ++c) mx = std::max(mx, xr[c]);
        double s = 0.0;
        for (int64_t c = 0; c < C; ++c) {
            yr[c] = std::exp(xr[c] - mx);
            s += yr[c];
        }
        for (int64_t c = 0; c < C; ++c) yr[c] /= s;
    }
    if (tape_active(tape, x.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("softmax", [x, y, R, C]() mutable {
            y.ensure_grad();
            x.ensure_grad();
            for (int64_t r = 0; r < R; ++r) {
                const double* yr = y.data() + r * C;
                const double* gr = y.grad() + r * C;
                double s = 0.0;
                for (int64_t c = 0; c < C; ++c) s += gr[c] * yr[c];
                double* xr = x.grad() + r * C;
                for (int64_t c = 0; c < C; ++c) xr[c] += yr[c] * (gr[c] - s);
            }
        });
    }
    return y;
}

// Attention-score softmax over rows with a visibility mask; hidden entries
// get probability 0 and receive no gradient.
inline Tensor masked_softmax(GradTape* tape, Tensor scores,
                             std::shared_ptr<const std::vector<uint8_t>> visible) {
    if (scores.rank() != 2) throw ShapeError("masked_softmax: expects rank-2 scores");
    const int64_t R = scores.dim(0), C = scores.dim(1);
    if (static_cast<int64_t>(visible->size()) != R * C) {
        throw ShapeError("masked_softmax: mask size " + std::to_string(visible->size()) +
                         " does not match scores " + shape_str(scores.shape()));
    }
    Tensor y = Tensor::zeros(scores.shape());
    const uint8_t* vis = visible->data();
    for (int64_t r = 0; r < R; ++r) {
        const double* xr = scores.data() + r * C;
        double* yr = y.data() + r * C;
        const uint8_t* vr = vis + r * C;
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t c = 0; c < C; ++c)
            if (vr[c]) mx = std::max(mx, xr[c]);
        if (!std::isfinite(mx)) {
            throw NumericError("masked_softmax: row " + std::to_string(r) + " is fully masked");
        }
        double s = 0.0;
        for (int64_t c = 0; c < C; ++c) {
            if (vr[c]) {
                yr[c] = std::exp(xr[c] - mx);
                s += yr[c];
            }
        }
        for (int64_t c = 0; c < C; ++c) yr[c] /= s;
    }
    if (tape_active(tape, scores.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("masked_softmax", [scores, y, visible, R, C]() mutable {
            y.ensure_grad();
            scores.ensure_grad();
            const uint8_t* vis = visible->data();
            for (int64_t r = 0; r < R; ++r) {
                const double* yr = y.data() + r * C;
                const double* gr = y.grad() + r * C;
                const uint8_t* vr = vis + r * C;
                double s = 0.0;
                for (int64_t c = 0; c < C; ++c)
                    if (vr[c]) s += gr[c] * yr[c];
                double* xr = scores.grad() + r * C;
                for (int64_t c = 0; c < C; ++c)
                    if (vr[c]) xr[c] += yr[c] * (gr[c] - s);
            }
        });
    }
    return y;
}

inline Tensor masked_softmax(GradTape* tape, Tensor scores,
                             const std::vector<uint8_t>& visible) {
    return masked_softmax(tape, scores, std::make_shared<const std::vector<uint8_t>>(visible));
}

// ---- normalization ----

inline Tensor layer_norm(GradTape* tape, Tensor x, Tensor gain, Tensor bias,
                         double eps = 1e-5) {
    if (x.rank() != 2) throw ShapeError("layer_norm: expects rank-2 input");
    const int64_t T = x.dim(0), H = x.dim(1);
    if (gain.numel() != H || bias.numel() != H) {
        throw ShapeError("layer_norm: gain/bias must have length " + std::to_string(H));
    }
    Tensor y = Tensor::zeros(x.shape());
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(T * H));
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(T));
    for (int64_t t = 0; t < T; ++t) {
        const double* xr = x.data() + t * H;
        double mu = 0.0;
        for (int64_t j = 0; j < H; ++j) mu += xr[j];
        mu /= static_cast<double>(H);
        double var = 0.0;
        for (int64_t j = 0; j < H; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(H);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[static_cast<size_t>(t)] = is;
        double* yr = y.data() + t * H;
        for (int64_t j = 0; j < H; ++j) {
            const double xh = (xr[j] - mu) * is;
            (*xhat)[static_cast<size_t>(t * H + j)] = xh;
            yr[j] = xh * gain.at(j) + bias.at(j);
        }
    }
    if (tape_active(tape, x.requires_grad() || gain.requires_grad() || bias.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("layer_norm", [x, gain, bias, y, xhat, inv_std, T, H]() mutable {
            y.ensure_grad();
            for (int64_t t = 0; t < T; ++t) {
                const double* gr = y.grad() + t * H;
                const double* xh = xhat->data() + t * H;
                if (gain.requires_grad()) {
                    gain.ensure_grad();
                    for (int64_t j = 0; j < H; ++j) gain.grad()[j] += gr[j] * xh[j];
                }
                if (bias.requires_grad()) {
                    bias.ensure_grad();
                    for (int64_t j = 0; j < H; ++j) bias.grad()[j] += gr[j];
                }
                if (x.requires_grad()) {
                    x.ensure_grad();
                    const double is = (*inv_std)[static_cast<size_t>(t)];
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (int64_t j = 0; j < H; ++j) {
                        const double dxh = gr[j] * gain.at(j);
                        sum_g += dxh;
                        sum_gx += dxh * xh[j];
                    }
                    const double inv_h = 1.0 / static_cast<double>(H);
                    double* xg = x.grad() + t * H;
                    for (int64_t j = 0; j < H; ++j) {
                        const double dxh = gr[j] * gain.at(j);
                        xg[j] += is * (dxh - inv_h * sum_g - xh[j] * inv_h * sum_gx);
                    }
                }
            }
        });
    }
    return y;
}

// ---- convolution ----

// Same-padded 1-D convolution over time. x {T, Cin}, w {Cout, Cin, K} with K
// odd, bias {Cout} -> {T, Cout}.
inline Tensor conv1d(GradTape* tape, Tensor x, Tensor w, Tensor bias) {
    if (x.rank() != 2 || w.rank() != 3 || bias.rank() != 1) throw ShapeError("conv1d: bad ranks");
    const int64_t T = x.dim(0), cin = x.dim(1);
    const int64_t cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != cin || bias.dim(0) != cout || k % 2 == 0) {
        throw ShapeError("conv1d: weights " + shape_str(w.shape()) + " incompatible with input " +
                         shape_str(x.shape()) + " (kernel must be odd)");
    }
    const int64_t pad = (k - 1) / 2;
    Tensor y = Tensor::zeros({T, cout});
    for (int64_t t = 0; t < T; ++t) {
        double* yr = y.data() + t * cout;
        for (int64_t co = 0; co < cout; ++co) yr[co] = bias.at(co);
        for (int64_t kk = 0; kk < k; ++kk) {
            const int64_t s = t + kk - pad;
            if (s < 0 || s >= T) continue;
            const double* xs = x.data() + s * cin;
            for (int64_t co = 0; co < cout; ++co) {
                const double* wrow = w.data() + (co * cin + 0) * k + kk;
                double acc = 0.0;
                for (int64_t ci = 0; ci < cin; ++ci) acc += xs[ci] * wrow[ci * k];
                yr[co] += acc;
            }
        }
    }
    if (tape_active(tape, x.requires_grad() || w.requires_grad() || bias.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("conv1d", [x, w, bias, y, T, cin, cout, k, pad]() mutable {
            y.ensure_grad();
            const double* g = y.grad();
            if (bias.requires_grad()) {
                bias.ensure_grad();
                for (int64_t t = 0; t < T; ++t)
                    for (int64_t co = 0; co < cout; ++co) bias.grad()[co] += g[t * cout + co];
            }
            for (int64_t t = 0; t < T; ++t) {
                const double* gr = g + t * cout;
                for (int64_t kk = 0; kk < k; ++kk) {
                    const int64_t s = t + kk - pad;
                    if (s < 0 || s >= T) continue;
                    if (w.requires_grad()) {
                        w.ensure_grad();
                        const double* xs = x.data() + s * cin;
                        for (int64_t co = 0; co < cout; ++co) {
                            double* wg = w.grad() + (co * cin + 0) * k + kk;
                            for (int64_t ci = 0; ci < cin; ++ci) wg[ci * k] += gr[co] * xs[ci];
                        }
                    }
                    if (x.requires_grad()) {
                        x.ensure_grad();
                        double* xg = x.grad() + s * cin;
                        for (int64_t co = 0; co < cout; ++co) {
                            const double* wrow = w.data() + (co * cin + 0) * k + kk;
                            for (int64_t ci = 0; ci < cin; ++ci) xg[ci] += gr[co] * wrow[ci * k];
                        }
                    }
                }
            }
        });
    }
    return y;
}

// ---- reductions ----

inline Tensor sum(GradTape* tape, Tensor x) {
    double s = 0.0;
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) s += x.at(i);
    Tensor y = Tensor::scalar(s);
    if (tape_active(tape, x.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("sum", [x, y]() mutable {
            y.ensure_grad();
            x.ensure_grad();
            const double g = y.grad()[0];
            const int64_t n = x.numel();
            for (int64_t i = 0; i < n; ++i) x.grad()[i] += g;
        });
    }
    return y;
}

inline Tensor mean(GradTape* tape, Tensor x) {
    const int64_t n = x.numel();
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += x.at(i);
    Tensor y = Tensor::scalar(s / static_cast<double>(n));
    if (tape_active(tape, x.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("mean", [x, y, n]() mutable {
            y.ensure_grad();
            x.ensure_grad();
            const double g = y.grad()[0] / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) x.grad()[i] += g;
        });
    }
    return y;
}

// ---- dropout ----

// Inverted dropout with a caller-supplied keep mask (1 = keep). Kept units
// are scaled by 1/keep_prob so expectations match the identity.
inline Tensor dropout_with_mask(GradTape* tape, Tensor x, double drop_prob,
                                std::shared_ptr<const std::vector<uint8_t>> keep) {
    if (!(drop_prob >= 0.0 && drop_prob < 1.0)) {
        throw ValueError("dropout: drop probability must be in [0, 1), got " +
                         std::to_string(drop_prob));
    }
    if (static_cast<int64_t>(keep->size()) != x.numel()) {
        throw ShapeError("dropout: mask size does not match input");
    }
    const double inv_keep = 1.0 / (1.0 - drop_prob);
    Tensor y = Tensor::zeros(x.shape());
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) y.at(i) = (*keep)[static_cast<size_t>(i)] ? x.at(i) * inv_keep : 0.0;
    if (tape_active(tape, x.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("dropout", [x, y, keep, inv_keep]() mutable {
            y.ensure_grad();
            x.ensure_grad();
            const int64_t n = x.numel();
            for (int64_t i = 0; i < n; ++i)
                if ((*keep)[static_cast<size_t>(i)]) x.grad()[i] += y.grad()[i] * inv_keep;
        });
    }
    return y;
}

inline Tensor dropout(GradTape* tape, Tensor x, double drop_prob, RngStream& rng) {
    if (!(drop_prob >= 0.0 && drop_prob < 1.0)) {
        throw ValueError("dropout: drop probability must be in [0, 1), got " +
                         std::to_string(drop_prob));
    }
    auto keep = std::make_shared<const std::vector<uint8_t>>(
        rng.bernoulli_mask(static_cast<size_t>(x.numel()), 1.0 - drop_prob));
    return dropout_with_mask(tape, x, drop_prob, std::move(keep));
}

// ---- lookup / layout ----

inline Tensor embedding(GradTape* tape, Tensor table, const std::vector<int>& ids) {
    if (table.rank() != 2) throw ShapeError("embedding: table must be rank 2");
    const int64_t V = table.dim(0), H = table.dim(1);
    for (int id : ids) {
        if (id < 0 || id >= V) {
            throw ValueError("embedding: token id " + std::to_string(id) + " outside table of " +
                             std::to_string(V) + " rows");
        }
    }
    const int64_t L = static_cast<int64_t>(ids.size());
    Tensor y = Tensor::zeros({L, H});
    for (int64_t i = 0; i < L; ++i) {
        const double* src = table.data() + static_cast<int64_t>(ids[static_cast<size_t>(i)]) * H;
        std::copy(src, src + H, y.data() + i * H);
    }
    if (tape_active(tape, table.requires_grad())) {
        y.set_requires_grad(true);
        auto ids_copy = std::make_shared<std::vector<int>>(ids);
        tape->record("embedding", [table, y, ids_copy, H]() mutable {
            y.ensure_grad();
            table.ensure_grad();
            const int64_t L = static_cast<int64_t>(ids_copy->size());
            for (int64_t i = 0; i < L; ++i) {
                double* dst = table.grad() + static_cast<int64_t>((*ids_copy)[static_cast<size_t>(i)]) * H;
                const double* g = y.grad() + i * H;
                for (int64_t j = 0; j < H; ++j) dst[j] += g[j];
            }
        });
    }
    return y;
}

inline Tensor row_slice(GradTape* tape, Tensor x, int64_t r0, int64_t r1) {
    if (x.rank() != 2) throw ShapeError("row_slice: expects rank-2 input");
    const int64_t T = x.dim(0), C = x.dim(1);
    if (r0 < 0 || r1 > T || r0 >= r1) {
        throw ShapeError("row_slice: bad range [" + std::to_string(r0) + ", " + std::to_string(r1) +
                         ") for " + shape_str(x.shape()));
    }
    Tensor y = Tensor::zeros({r1 - r0, C});
    std::copy(x.data() + r0 * C, x.data() + r1 * C, y.data());
    if (tape_active(tape, x.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("row_slice", [x, y, r0, C]() mutable {
            y.ensure_grad();
            x.ensure_grad();
            const int64_t n = y.numel();
            double* xg = x.grad() + r0 * C;
            for (int64_t i = 0; i < n; ++i) xg[i] += y.grad()[i];
        });
    }
    return y;
}

inline Tensor col_slice(GradTape* tape, Tensor x, int64_t c0, int64_t c1) {
    if (x.rank() != 2) throw ShapeError("col_slice: expects rank-2 input");
    const int64_t T = x.dim(0), C = x.dim(1);
    if (c0 < 0 || c1 > C || c0 >= c1) {
        throw ShapeError("col_slice: bad range [" + std::to_string(c0) + ", " + std::to_string(c1) +
                         ") for " + shape_str(x.shape()));
    }
    const int64_t W = c1 - c0;
    Tensor y = Tensor::zeros({T, W});
    for (int64_t t = 0; t < T; ++t)
        std::copy(x.data() + t * C + c0, x.data() + t * C + c1, y.data() + t * W);
    if (tape_active(tape, x.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("col_slice", [x, y, c0, C, W, T]() mutable {
            y.ensure_grad();
            x.ensure_grad();
            for (int64_t t = 0; t < T; ++t) {
                double* xg = x.grad() + t * C + c0;
                const double* g = y.grad() + t * W;
                for (int64_t j = 0; j < W; ++j) xg[j] += g[j];
            }
        });
    }
    return y;
}

inline Tensor concat_rows(GradTape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const int64_t C = parts[0].rank() == 2 ? parts[0].dim(1) : -1;
    int64_t T = 0;
    bool needs_grad = false;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(1) != C) throw ShapeError("concat_rows: column mismatch");
        T += p.dim(0);
        needs_grad = needs_grad || p.requires_grad();
    }
    Tensor y = Tensor::zeros({T, C});
    int64_t row = 0;
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.numel(), y.data() + row * C);
        row += p.dim(0);
    }
    if (tape_active(tape, needs_grad)) {
        y.set_requires_grad(true);
        auto parts_copy = std::make_shared<std::vector<Tensor>>(parts);
        tape->record("concat_rows", [parts_copy, y, C]() mutable {
            y.ensure_grad();
            int64_t row = 0;
            for (auto& p : *parts_copy) {
                if (p.requires_grad()) {
                    p.ensure_grad();
                    const double* g = y.grad() + row * C;
                    for (int64_t i = 0; i < p.numel(); ++i) p.grad()[i] += g[i];
                }
                row += p.dim(0);
            }
        });
    }
    return y;
}

inline Tensor concat_cols(GradTape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int64_t T = parts[0].dim(0);
    int64_t C = 0;
    bool needs_grad = false;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(0) != T) throw ShapeError("concat_cols: row mismatch");
        C += p.dim(1);
        needs_grad = needs_grad || p.requires_grad();
    }
    Tensor y = Tensor::zeros({T, C});
    int64_t col = 0;
    for (const auto& p : parts) {
        const int64_t W = p.dim(1);
        for (int64_t t = 0; t < T; ++t)
            std::copy(p.data() + t * W, p.data() + (t + 1) * W, y.data() + t * C + col);
        col += W;
    }
    if (tape_active(tape, needs_grad)) {
        y.set_requires_grad(true);
        auto parts_copy = std::make_shared<std::vector<Tensor>>(parts);
        tape->record("concat_cols", [parts_copy, y, T, C]() mutable {
            y.ensure_grad();
            int64_t col = 0;
            for (auto& p : *parts_copy) {
                const int64_t W = p.dim(1);
                if (p.requires_grad()) {
                    p.ensure_grad();
                    for (int64_t t = 0; t < T; ++t) {
                        const double* g = y.grad() + t * C + col;
                        double* pg = p.grad() + t * W;
                        for (int64_t j = 0; j < W; ++j) pg[j] += g[j];
                    }
                }
                col += W;
            }
        });
    }
    return y;
}

// ---- fused losses ----

// Mean over elements of w_i * bce(sigmoid(l_i), t_i), computed in logit
// space for stability.
inline Tensor weighted_bce_logits(GradTape* tape, Tensor logits,
                                  std::shared_ptr<const std::vector<double>> targets,
                                  std::shared_ptr<const std::vector<double>> weights) {
    const int64_t n = logits.numel();
    if (static_cast<int64_t>(targets->size()) != n || static_cast<int64_t>(weights->size()) != n) {
        throw ShapeError("weighted_bce_logits: target/weight length mismatch");
    }
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double l = logits.at(i);
        const double t = (*targets)[static_cast<size_t>(i)];
        const double term = std::max(l, 0.0) - l * t + std::log1p(std::exp(-std::fabs(l)));
        acc += (*weights)[static_cast<size_t>(i)] * term;
    }
    Tensor y = Tensor::scalar(acc / static_cast<double>(n));
    if (tape_active(tape, logits.requires_grad())) {
        y.set_requires_grad(true);
        tape->record("weighted_bce_logits", [logits, y, targets, weights, n]() mutable {
            y.ensure_grad();
            logits.ensure_grad();
            const double g = y.grad()[0] / static_cast<double>(n);
            for (int64_t i = 0; i < n; ++i) {
                const double p = detail::sigmoid_scalar(logits.at(i));
                logits.grad()[i] += g * (*weights)[static_cast<size_t>(i)] *
                                    (p - (*targets)[static_cast<size_t>(i)]);
            }
        });
    }
    return y;
}

}  // namespace ops
}  // namespace belle
