#pragma once

// Dense matrix-product kernels. `reference` is the plain serial triple loop
// kept as the testing oracle; `parallel` splits output rows across OpenMP
// threads. Both accumulate each output element over k in ascending order, so
// their results are bit-identical.

#include <cstddef>

#include "masn/tensor.hpp"

namespace masn::kernels {

namespace reference {
// C = A(MxK) * B(KxN)
void matmul(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n);
// C = A(MxK) * B(NxK)^T
void matmul_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n);
// C = A(KxM)^T * B(KxN)
void matmul_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n);
}  // namespace reference

namespace parallel {
void matmul(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n);
void matmul_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n);
}  // namespace parallel

// Products below this many multiply-adds run serially even in the parallel
// kernels; thread start-up dominates at the model's test sizes.
inline constexpr std::size_t kParallelWorkThreshold = 1u << 16;

// Tensor-level wrappers over the parallel kernels (shape-checked).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);

int max_threads();

}  // namespace masn::kernels
