#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "masn/grad_check.hpp"
#include "masn/ops.hpp"
#include "masn/param_store.hpp"
#include "masn/tensor.hpp"

namespace testing {

inline masn::Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    masn::Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

inline std::vector<std::size_t> random_permutation(std::mt19937_64& rng, std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

// Row i of the result is row perm[i] of t.
inline masn::Tensor permute_rows(const masn::Tensor& t, const std::vector<std::size_t>& perm) {
    masn::Tensor out(t.shape());
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t c = 0; c < t.cols(); ++c) out(i, c) = t(perm[i], c);
    return out;
}

// out(i, j) = t(perm[i], perm[j])
inline masn::Tensor permute_both(const masn::Tensor& t, const std::vector<std::size_t>& perm) {
    masn::Tensor out(t.shape());
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t j = 0; j < perm.size(); ++j) out(i, j) = t(perm[i], perm[j]);
    return out;
}

using Builder = std::function<masn::Var(masn::Tape&, const masn::ParamStore&)>;

// Gradient check of loss = sum(build(...) * R) for a fixed random R, so every
// output entry contributes with its own weight.
inline masn::GradCheckReport check_gradients(masn::ParamStore& store, const Builder& build, std::uint64_t seed = 7,
                                             double eps = 1e-5) {
    masn::Tensor weights;
    {
        masn::Tape tape;
        const masn::Tensor out = build(tape, store).value();
        std::mt19937_64 rng(seed);
        weights = random_tensor(rng, out.rows(), out.cols());
    }
    const masn::LossFn loss = [&](const masn::ParamStore& p, masn::GradBuffer* grads) {
        masn::Tape tape;
        masn::Var out = build(tape, p);
        masn::Var l = masn::ops::sum_all(masn::ops::mul(out, tape.constant(weights)));
        if (grads) tape.backward(l, *grads);
        return static_cast<double>(l.value()[0]);
    };
    return masn::grad_check(loss, store, masn::GradCheckOptions{eps, 64});
}

}  // namespace testing
