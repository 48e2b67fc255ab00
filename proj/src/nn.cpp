#include "masn/nn.hpp"

#include <cmath>

namespace masn::nn {

Tensor Initializer::fan_in_uniform(std::size_t rows, std::size_t cols, double k) {
    const double bound = std::sqrt(k / static_cast<double>(rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng_);
    return t;
}

Tensor Initializer::normal(std::size_t rows, std::size_t cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng_);
    return t;
}

Tensor Initializer::orthogonal(std::size_t rows, std::size_t cols) {
    // Modified Gram-Schmidt over the longer side of a Gaussian matrix.
    const bool tall = rows >= cols;
    const std::size_t n = tall ? rows : cols;  // vector length
    const std::size_t m = tall ? cols : rows;  // vector count
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<std::vector<double>> basis;
    while (basis.size() < m) {
        std::vector<double> v(n);
        for (double& x : v) x = dist(rng_);
        for (const auto& b : basis) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += v[i] * b[i];
            for (std::size_t i = 0; i < n; ++i) v[i] -= dot * b[i];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (double& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    Tensor t({rows, cols});
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) t(r, c) = tall ? basis[c][r] : basis[r][c];
    return t;
}

std::string join(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "/" + name;
}

Var Linear::operator()(Var x) const {
    Var y = ops::matmul(x, w);
    return b.tape ? ops::add_row(y, b) : y;
}

void Linear::add(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                 Initializer& init, bool bias, double k) {
    store.add(join(prefix, "w"), init.fan_in_uniform(in, out, k));
    if (bias) store.add(join(prefix, "b"), Tensor({1, out}));
}

Linear Linear::bind(Tape& tape, const ParamStore& store, const std::string& prefix) {
    Linear l;
    l.w = tape.param(store, join(prefix, "w"));
    const std::string bias = join(prefix, "b");
    if (store.contains(bias)) l.b = tape.param(store, bias);
    return l;
}

void Ffn::add(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
              std::size_t out, Initializer& init) {
    Linear::add(store, join(prefix, "hidden"), in, hidden, init, true, 6.0);
    Linear::add(store, join(prefix, "out"), hidden, out, init, true, 3.0);
}

Ffn Ffn::bind(Tape& tape, const ParamStore& store, const std::string& prefix) {
    return {Linear::bind(tape, store, join(prefix, "hidden")), Linear::bind(tape, store, join(prefix, "out"))};
}

void LayerNorm::add(ParamStore& store, const std::string& prefix, std::size_t dim) {
    store.add(join(prefix, "gain"), Tensor({1, dim}, 1.0));
    store.add(join(prefix, "bias"), Tensor({1, dim}));
}

LayerNorm LayerNorm::bind(Tape& tape, const ParamStore& store, const std::string& prefix) {
    return {tape.param(store, join(prefix, "gain")), tape.param(store, join(prefix, "bias"))};
}

}  // namespace masn::nn
