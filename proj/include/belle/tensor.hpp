#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "belle/errors.hpp"

namespace belle {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

// Dense row-major double tensor with value semantics over a shared payload.
// Forward ops allocate fresh tensors and never mutate their inputs, so
// read-only sharing across threads is safe. The gradient buffer is allocated
// lazily by the tape during backward.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = std::move(shape);
        t.impl_->data.assign(static_cast<size_t>(shape_numel(t.impl_->shape)), 0.0);
        t.impl_->requires_grad = requires_grad;
        return t;
    }

    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& v : t.impl_->data) v = value;
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
            throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
        Tensor t;
        t.impl_ = std::make_shared<Impl>();
        t.impl_->shape = std::move(shape);
        t.impl_->data = std::move(data);
        t.impl_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int64_t dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& vec() { return impl_->data; }
    const std::vector<double>& vec() const { return impl_->data; }

    double item() const {
        if (numel() != 1) throw ShapeError("tensor: item() on non-scalar " + shape_str(shape()));
        return impl_->data[0];
    }

    double& at(int64_t i) { return impl_->data[static_cast<size_t>(i)]; }
    double at(int64_t i) const { return impl_->data[static_cast<size_t>(i)]; }
    // 2-D accessors
    double& at(int64_t r, int64_t c) { return impl_->data[static_cast<size_t>(r * dim(1) + c)]; }
    double at(int64_t r, int64_t c) const { return impl_->data[static_cast<size_t>(r * dim(1) + c)]; }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        impl_->requires_grad = rg;
        return *this;
    }

    void ensure_grad() {
        if (impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), 0.0);
    }
    bool has_grad() const { return !impl_->grad.empty(); }
    double* grad() { return impl_->grad.data(); }
    const double* grad() const { return impl_->grad.data(); }
    std::vector<double>& grad_vec() { return impl_->grad; }
    void zero_grad() {
        if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }

    // identity of the underlying payload; used by tests
    const void* id() const { return impl_.get(); }

  private:
    struct Impl {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

}  // namespace belle
