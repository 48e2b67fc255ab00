#pragma once

// Learned soft adjacency over all K objects of one stream and the residual
// two-layer graph convolution on top of it.

#include <string>

#include "masn/autodiff.hpp"
#include "masn/nn.hpp"

namespace masn {

struct GraphWeights {
    Var w1, w2;  // d x d projections for the similarity scores
    Var w3, w4;  // d x d graph-convolution kernels
    nn::LayerNorm norm;

    static void add(ParamStore& store, const std::string& prefix, std::size_t d, nn::Initializer& init);
    static GraphWeights bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

// A = softmax_rows((X W1)(X W2)^T); each row is node i's distribution over
// all K nodes. No scaling inside the softmax.
Var build_adjacency(Var x, Var w1, Var w2);

// F = LayerNorm(X + ReLU(A ReLU(A X W3) W4)). Throws Error if A is not
// row-stochastic (entries >= 0, rows summing to 1 within 1e-9).
Var gcn_forward(Var x, Var adjacency, Var w3, Var w4, const nn::LayerNorm& norm);

struct GraphOutput {
    Var adjacency;
    Var features;
};

GraphOutput run_object_graph(const GraphWeights& w, Var x);

}  // namespace masn
