#include "masn/object_graph.hpp"

#include <cmath>

#include "masn/errors.hpp"

namespace masn {

using nn::join;

void GraphWeights::add(ParamStore& store, const std::string& prefix, std::size_t d, nn::Initializer& init) {
    store.add(join(prefix, "w1"), init.fan_in_uniform(d, d));
    store.add(join(prefix, "w2"), init.fan_in_uniform(d, d));
    store.add(join(prefix, "w3"), init.fan_in_uniform(d, d, 6.0));
    store.add(join(prefix, "w4"), init.fan_in_uniform(d, d, 6.0));
    nn::LayerNorm::add(store, join(prefix, "norm"), d);
}

GraphWeights GraphWeights::bind(Tape& tape, const ParamStore& store, const std::string& prefix) {
    return {tape.param(store, join(prefix, "w1")), tape.param(store, join(prefix, "w2")),
            tape.param(store, join(prefix, "w3")), tape.param(store, join(prefix, "w4")),
            nn::LayerNorm::bind(tape, store, join(prefix, "norm"))};
}

Var build_adjacency(Var x, Var w1, Var w2) {
    Var scores = ops::matmul_nt(ops::matmul(x, w1), ops::matmul(x, w2));
    return ops::softmax(scores, 1);
}

Var gcn_forward(Var x, Var adjacency, Var w3, Var w4, const nn::LayerNorm& norm) {
    const Tensor& a = adjacency.value();
    if (a.rank() != 2 || a.rows() != a.cols() || a.rows() != x.rows()) {
        throw ShapeError("gcn_forward: adjacency must be K x K for K = " + std::to_string(x.rows()));
    }
    for (std::size_t i = 0; i < a.rows(); ++i) {
        Real sum = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (a(i, j) < 0.0) throw Error("gcn_forward: adjacency has a negative entry");
            sum += a(i, j);
        }
        if (std::abs(sum - 1.0) > 1e-9) throw Error("gcn_forward: adjacency is not row-stochastic");
    }
    Var first = ops::relu(ops::matmul(ops::matmul(adjacency, x), w3));
    Var second = ops::relu(ops::matmul(ops::matmul(adjacency, first), w4));
    return norm(ops::add(x, second));
}

GraphOutput run_object_graph(const GraphWeights& w, Var x) {
    Var a = build_adjacency(x, w.w1, w.w2);
    return {a, gcn_forward(x, a, w.w3, w.w4, w.norm)};
}

}  // namespace masn
