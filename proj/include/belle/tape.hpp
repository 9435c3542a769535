#pragma once

#include <functional>
#include <string>
#include <vector>

#include "belle/errors.hpp"
#include "belle/tensor.hpp"

namespace belle {

// Reverse-mode tape. Ops append one record per application; backward seeds
// the scalar output with 1 and replays the records once, in reverse.
// Gradients accumulate additively, so a value feeding several consumers
// collects all their adjoints. Single-threaded by design.
class GradTape {
  public:
    using BackwardFn = std::function<void()>;

    void record(const char* op, BackwardFn fn) {
        records_.push_back({op, std::move(fn)});
    }

    void backward(Tensor output) {
        if (!output.defined() || output.numel() != 1) {
            throw ShapeError("backward: output must be a scalar tensor");
        }
        output.ensure_grad();
        output.grad()[0] = 1.0;
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->fn();
    }

    size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    void clear() { records_.clear(); }

  private:
    struct Record {
        const char* op;
        BackwardFn fn;
    };
    std::vector<Record> records_;
};

// True when an op applied under `tape` to inputs with the given grad flags
// needs a backward record.
inline bool tape_active(const GradTape* tape, bool any_input_requires_grad) {
    return tape != nullptr && any_input_requires_grad;
}

}  // namespace belle
