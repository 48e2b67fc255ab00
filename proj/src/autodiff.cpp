#include "masn/autodiff.hpp"

#include <string>

#include "masn/errors.hpp"

namespace masn {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
    if (!value.all_finite()) throw NumericError("non-finite constant recorded on tape");
    Node n;
    n.owned = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::param(const ParamStore& store, std::size_t index) {
    Node n;
    n.borrowed = &store.value(index);
    n.requires_grad = true;
    n.param_index = static_cast<std::ptrdiff_t>(index);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::param(const ParamStore& store, std::string_view path) {
    return param(store, store.index(path));
}

Var Tape::push(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    if (!value.all_finite()) throw NumericError("operation produced a non-finite value");
    Node n;
    n.owned = std::move(value);
    for (const Var& v : inputs) {
        if (v.tape != this) throw Error("tape op mixes variables from different tapes");
        n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.borrowed ? *n.borrowed : n.owned;
}

Tensor& Tape::grad_slot(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && n.grad.shape().empty()) n.grad = Tensor::zeros_like(value(id));
    return n.grad;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
    if (!nodes_[id].requires_grad) return;
    grad_slot(id).add_(g);
}

void Tape::backward(Var root, GradBuffer& out) {
    if (root.tape != this) throw Error("backward root belongs to another tape");
    const Tensor& rv = value(root.id);
    if (rv.size() != 1) {
        throw ShapeError("backward root must be a scalar, got " + shape_str(rv.shape()));
    }
    if (!nodes_[root.id].requires_grad) return;
    grad_slot(root.id).fill(1.0);
    for (std::size_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.shape().empty()) continue;
        if (n.param_index >= 0) {
            const auto p = static_cast<std::size_t>(n.param_index);
            if (p >= out.size()) throw Error("gradient buffer is smaller than the parameter store");
            out[p].add_(n.grad);
        } else if (n.backward) {
            n.backward(*this, i);
        }
    }
}

}  // namespace masn
