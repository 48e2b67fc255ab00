#pragma once

// Small parameterized building blocks bound from a ParamStore onto a tape.
// Each block has a static `add` that registers (and initializes) its
// parameters under a path prefix and a static `bind` that fetches them.

#include <cstdint>
#include <random>
#include <string>

#include "masn/autodiff.hpp"
#include "masn/ops.hpp"
#include "masn/param_store.hpp"

namespace masn::nn {

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    // U(-b, b) with b = sqrt(k / fan_in); k = 6 in front of a ReLU, 3 otherwise.
    Tensor fan_in_uniform(std::size_t rows, std::size_t cols, double k = 3.0);
    // Orthonormal columns (rows >= cols) or rows (rows < cols).
    Tensor orthogonal(std::size_t rows, std::size_t cols);
    Tensor normal(std::size_t rows, std::size_t cols, double stddev);

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

std::string join(const std::string& prefix, const std::string& name);

struct Linear {
    Var w;
    Var b;  // unbound when the layer has no bias

    Var operator()(Var x) const;

    static void add(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                    Initializer& init, bool bias = true, double k = 3.0);
    static Linear bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

// One hidden ReLU layer followed by a linear output.
struct Ffn {
    Linear hidden;
    Linear out;

    Var operator()(Var x) const { return out(ops::relu(hidden(x))); }

    static void add(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden,
                    std::size_t out, Initializer& init);
    static Ffn bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

struct LayerNorm {
    Var gain;
    Var bias;

    Var operator()(Var x) const { return ops::layer_norm(x, gain, bias); }

    static void add(ParamStore& store, const std::string& prefix, std::size_t dim);
    static LayerNorm bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

}  // namespace masn::nn
