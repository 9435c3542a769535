#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "belle/errors.hpp"
#include "belle/tensor.hpp"

namespace belle {

struct FdCoord {
    int64_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    bool finite = true;
    bool kink = false;  // the two step sizes disagree; |.| crossing or similar
    bool pass = false;
};

struct FdReport {
    std::vector<FdCoord> coords;
    double max_rel_error = 0.0;  // over smooth, finite coordinates
    int64_t num_kinks = 0;
    int64_t num_failed = 0;
    bool pass = false;  // every smooth coordinate within tolerance, none non-finite

    const FdCoord* worst() const {
        const FdCoord* w = nullptr;
        for (const auto& c : coords)
            if (!c.kink && (!w || c.rel_error > w->rel_error)) w = &c;
        return w;
    }
};

// Central-difference check of an analytic gradient, coordinate by
// coordinate. The relative error is |analytic - numeric| / (|numeric| +
// 1e-8). A coordinate whose forward and backward one-sided differences
// disagree far beyond curvature scale sits on a kink (an |.| crossing); it
// is flagged and excluded from pass/fail instead of producing a bogus
// verdict. A non-finite evaluation fails with the coordinate index recorded.
inline FdReport finite_difference_check(const std::function<double(const Tensor&)>& f,
                                        const Tensor& point,
                                        const std::vector<double>& analytic_grad, double h,
                                        double tol,
                                        const std::vector<int64_t>* coords = nullptr) {
    if (!(h > 0.0)) throw ValueError("finite_difference_check: h must be positive");
    if (static_cast<int64_t>(analytic_grad.size()) != point.numel()) {
        throw ShapeError("finite_difference_check: gradient length does not match point");
    }
    std::vector<int64_t> all;
    if (!coords) {
        all.resize(static_cast<size_t>(point.numel()));
        for (int64_t i = 0; i < point.numel(); ++i) all[static_cast<size_t>(i)] = i;
        coords = &all;
    }
    FdReport report;
    report.pass = true;
    Tensor probe = Tensor::from_data(point.shape(), point.vec());
    const double f0 = f(probe);
    for (int64_t i : *coords) {
        FdCoord c;
        c.index = i;
        c.analytic = analytic_grad[static_cast<size_t>(i)];
        const double saved = probe.at(i);
        probe.at(i) = saved + h;
        const double fp = f(probe);
        probe.at(i) = saved - h;
        const double fm = f(probe);
        probe.at(i) = saved;
        const double central = (fp - fm) / (2.0 * h);
        c.numeric = central;
        if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(f0)) {
            c.finite = false;
            c.pass = false;
            report.num_failed++;
            report.pass = false;
            report.coords.push_back(c);
            continue;
        }
        const double fwd = (fp - f0) / h;
        const double bwd = (f0 - fm) / h;
        if (std::fabs(fwd - bwd) > std::max(0.1 * std::fabs(central), 100.0 * h * (1.0 + std::fabs(central)))) {
            c.kink = true;
            report.num_kinks++;
            report.coords.push_back(c);
            continue;
        }
        c.rel_error = std::fabs(c.analytic - central) / (std::fabs(central) + 1e-8);
        c.pass = c.rel_error < tol;
        report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
        if (!c.pass) {
            report.num_failed++;
            report.pass = false;
        }
        report.coords.push_back(c);
    }
    return report;
}

}  // namespace belle
