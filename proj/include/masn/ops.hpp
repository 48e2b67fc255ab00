#pragma once

// Differentiable primitives. All operate on rank-2 tensors; a "row" argument
// is a 1xC tensor broadcast over every row of the other operand.

#include <cstddef>
#include <span>
#include <vector>

#include "masn/autodiff.hpp"

namespace masn::ops {

inline constexpr Real kLayerNormEps = 1e-5;

Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, Real c);
Var add_row(Var a, Var row);  // a[i,:] + row
Var mul_row(Var a, Var row);  // a[i,:] * row
Var scale_by(Var a, Var s);   // a * s, s is 1x1

Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var square(Var a);

// axis 1 normalizes each row, axis 0 each column. Max-subtracted.
Var softmax(Var a, int axis);
// One distribution over every entry of `a`.
Var softmax_all(Var a);

// Row-wise layer normalization with 1xC gain and bias; epsilon 1e-5 inside
// the square root. Requires C >= 2.
Var layer_norm(Var x, Var gain, Var bias);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var gather_rows(Var a, std::span<const std::size_t> indices);
Var element(Var a, std::size_t r, std::size_t c);  // 1x1

Var sum_rows(Var a);  // 1xC, sums over the row axis
Var sum_all(Var a);   // 1x1

// -log softmax(logits)[target] for a 1xC logits row; returns 1x1.
Var cross_entropy(Var logits, std::size_t target);

// Forward-only helpers shared with tests and the export path.
Tensor softmax_values(const Tensor& x, int axis);
Tensor layer_norm_values(const Tensor& x, const Tensor& gain, const Tensor& bias);

}  // namespace masn::ops
