#include "masn/kernels.hpp"

#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "masn/errors.hpp"

namespace masn::kernels {

namespace reference {

void matmul(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Real acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

void matmul_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Real acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc;
        }
    }
}

void matmul_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Real acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
            c[i * n + j] = acc;
        }
    }
}

}  // namespace reference

namespace {

bool go_parallel(std::size_t m, std::size_t k, std::size_t n) {
#ifdef _OPENMP
    return m > 1 && m * k * n >= kParallelWorkThreshold && !omp_in_parallel();
#else
    (void)m, (void)k, (void)n;
    return false;
#endif
}

}  // namespace

namespace parallel {

// Row-blocked i-k-j ordering: each c[i][j] still accumulates p = 0..k-1 in
// order, matching the reference loop exactly.
void matmul(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k, std::size_t n) {
    const bool par = go_parallel(m, k, n);
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        Real* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const Real aip = a[i * k + p];
            const Real* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_nt(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n) {
    const bool par = go_parallel(m, k, n);
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const Real* ai = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const Real* bj = b + j * k;
            Real acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            c[i * n + j] = acc;
        }
    }
}

void matmul_tn(const Real* a, const Real* b, Real* c, std::size_t m, std::size_t k,
               std::size_t n) {
    const bool par = go_parallel(m, k, n);
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (par)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        Real* ci = c + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const Real api = a[p * m + i];
            const Real* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

}  // namespace parallel

namespace {

void check(bool ok, const char* what, const Tensor& a, const Tensor& b) {
    if (!ok) {
        throw ShapeError(std::string(what) + ": incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.rank() == 2 && b.rank() == 2 && a.cols() == b.rows(), "matmul", a, b);
    Tensor c({a.rows(), b.cols()});
    parallel::matmul(a.data().data(), b.data().data(), c.data().data(), a.rows(), a.cols(), b.cols());
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check(a.rank() == 2 && b.rank() == 2 && a.cols() == b.cols(), "matmul_nt", a, b);
    Tensor c({a.rows(), b.rows()});
    parallel::matmul_nt(a.data().data(), b.data().data(), c.data().data(), a.rows(), a.cols(),
                        b.rows());
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    check(a.rank() == 2 && b.rank() == 2 && a.rows() == b.rows(), "matmul_tn", a, b);
    Tensor c({a.cols(), b.cols()});
    parallel::matmul_tn(a.data().data(), b.data().data(), c.data().data(), a.cols(), a.rows(),
                        b.cols());
    return c;
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace masn::kernels
