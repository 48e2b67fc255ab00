#pragma once

// Reverse-mode differentiation over an explicit tape. A Tape records every
// value produced during one forward pass together with a closure that pushes
// the node's incoming gradient to its inputs. Parameter leaves borrow their
// values from a ParamStore, so many tapes may read one store concurrently.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "masn/param_store.hpp"
#include "masn/tensor.hpp"

namespace masn {

class Tape;

// Handle to one node of a tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var param(const ParamStore& store, std::size_t index);
    Var param(const ParamStore& store, std::string_view path);

    // Records an op result. `inputs` decide whether the node needs a
    // gradient; `backward` is skipped entirely when none of them do.
    // Throws NumericError if the value holds NaN/Inf.
    Var push(Tensor value, std::span<const Var> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
    // Adds `g` into the gradient slot of node `id` (allocating it on first use).
    void accumulate(std::size_t id, const Tensor& g);
    // Gradient slot for in-place accumulation; allocated zeroed on first use.
    Tensor& grad_slot(std::size_t id);

    // Runs the reverse sweep from a 1x1 root and adds parameter gradients
    // into `out`, which must be index-aligned with the store(s) used.
    void backward(Var root, GradBuffer& out);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor owned;
        const Tensor* borrowed = nullptr;
        Tensor grad;
        BackwardFn backward;
        bool requires_grad = false;
        std::ptrdiff_t param_index = -1;
    };
    std::vector<Node> nodes_;
};

}  // namespace masn
