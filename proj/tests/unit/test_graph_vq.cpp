#include <random>

#include "doctest.h"
#include "masn/errors.hpp"
#include "masn/object_graph.hpp"
#include "masn/vq_interaction.hpp"
#include "support/equivalence.hpp"

using namespace masn;
using testing::random_tensor;

TEST_CASE("adjacency of a single node and of identical nodes") {
    std::mt19937_64 rng(1);
    Tape tape;
    Var w1 = tape.constant(random_tensor(rng, 3, 3)), w2 = tape.constant(random_tensor(rng, 3, 3));
    CHECK(build_adjacency(tape.constant(random_tensor(rng, 1, 3)), w1, w2).value() == Tensor::matrix(1, 1, {1.0}));

    Tensor x = random_tensor(rng, 2, 3);
    for (std::size_t c = 0; c < 3; ++c) x(1, c) = x(0, c);
    const Tensor a = build_adjacency(tape.constant(x), w1, w2).value();
    CHECK(max_abs_diff(a, Tensor::matrix(2, 2, {0.5, 0.5, 0.5, 0.5})) < 1e-15);
}

TEST_CASE("adjacency and graph convolution match the dense oracles") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        CHECK(testing::adjacency_error(seed) < 1e-12);
        CHECK(testing::gcn_error(seed) < 1e-12);
    }
}

TEST_CASE("graph convolution with zero kernels reduces to layer norm") {
    std::mt19937_64 rng(2);
    const Tensor x = random_tensor(rng, 3, 4);
    Tape tape;
    Var a = build_adjacency(tape.constant(x), tape.constant(random_tensor(rng, 4, 4)),
                            tape.constant(random_tensor(rng, 4, 4)));
    const nn::LayerNorm ln{tape.constant(random_tensor(rng, 1, 4)), tape.constant(random_tensor(rng, 1, 4))};
    Var zero = tape.constant(Tensor({4, 4}));
    const Tensor f = gcn_forward(tape.constant(x), a, zero, zero, ln).value();
    CHECK(f == ops::layer_norm_values(x, ln.gain.value(), ln.bias.value()));
}

TEST_CASE("single-node graph convolution collapses to two ReLU layers") {
    std::mt19937_64 rng(3);
    const Tensor x = random_tensor(rng, 1, 4), w3 = random_tensor(rng, 4, 4), w4 = random_tensor(rng, 4, 4);
    Tape tape;
    const nn::LayerNorm ln{tape.constant(Tensor({1, 4}, 1.0)), tape.constant(Tensor({1, 4}))};
    const Tensor f =
        gcn_forward(tape.constant(x), tape.constant(Tensor::matrix(1, 1, {1.0})), tape.constant(w3), tape.constant(w4),
                    ln)
            .value();
    const oracle::Mat inner = oracle::relu(oracle::matmul(oracle::relu(oracle::matmul(oracle::from(x),
                                                                                      oracle::from(w3))),
                                                          oracle::from(w4)));
    const oracle::Mat expect =
        oracle::layer_norm(oracle::add(oracle::from(x), inner), oracle::Vec(4, 1.0L), oracle::Vec(4, 0.0L));
    CHECK(oracle::max_abs_diff(f, expect) < 1e-12);
}

TEST_CASE("graph convolution rejects a non-row-stochastic adjacency") {
    std::mt19937_64 rng(4);
    Tape tape;
    Var x = tape.constant(random_tensor(rng, 2, 3));
    Var w = tape.constant(random_tensor(rng, 3, 3));
    const nn::LayerNorm ln{tape.constant(Tensor({1, 3}, 1.0)), tape.constant(Tensor({1, 3}))};
    CHECK_THROWS_AS(gcn_forward(x, tape.constant(Tensor::matrix(2, 2, {0.6, 0.6, 0.5, 0.5})), w, w, ln), Error);
    CHECK_THROWS_AS(gcn_forward(x, tape.constant(Tensor::matrix(2, 2, {1.5, -0.5, 0.5, 0.5})), w, w, ln), Error);
    CHECK_THROWS_AS(gcn_forward(x, tape.constant(Tensor::matrix(1, 1, {1.0})), w, w, ln), ShapeError);
}

TEST_CASE("object graph gradients pass finite-difference checking") {
    ParamStore s;
    nn::Initializer init(5);
    GraphWeights::add(s, "g", 4, init);
    testing::randomize(s, 6);
    std::mt19937_64 rng(7);
    const std::size_t x = s.add("x", random_tensor(rng, 4, 4));
    const GradCheckReport r = testing::check_gradients(s, [&](Tape& t, const ParamStore& p) {
        return run_object_graph(GraphWeights::bind(t, p, "g"), t.param(p, x)).features;
    });
    CHECK(r.max_rel_error() < 1e-4);
}

TEST_CASE("bilinear attention: trivial maps") {
    ParamStore s;
    nn::Initializer init(8);
    GlimpseWeights::add(s, "v", 3, init);
    std::mt19937_64 rng(9);
    Tape tape;
    auto w = GlimpseWeights::bind(tape, s, "v");
    CHECK(bilinear_attention_map(tape.constant(random_tensor(rng, 1, 3)), tape.constant(random_tensor(rng, 1, 3)), w)
              .value() == Tensor::matrix(1, 1, {1.0}));

    w.attn_w = tape.constant(Tensor({1, 3}));
    const Tensor uniform =
        bilinear_attention_map(tape.constant(random_tensor(rng, 2, 3)), tape.constant(random_tensor(rng, 3, 3)), w)
            .value();
    for (std::size_t i = 0; i < uniform.size(); ++i) CHECK(std::abs(uniform[i] - 1.0 / 6.0) < 1e-15);

    CHECK_THROWS_AS(
        bilinear_attention_map(tape.constant(random_tensor(rng, 2, 4)), tape.constant(random_tensor(rng, 3, 3)), w),
        ShapeError);
}

TEST_CASE("glimpse pooling: one-hot attention and zero objects") {
    ParamStore s;
    nn::Initializer init(10);
    GlimpseWeights::add(s, "v", 4, init);
    std::mt19937_64 rng(11);
    const Tensor h = random_tensor(rng, 2, 4), v = random_tensor(rng, 3, 4);
    Tape tape;
    const auto w = GlimpseWeights::bind(tape, s, "v");
    Tensor onehot({2, 3});
    onehot(1, 2) = 1.0;
    const Tensor j = ban_glimpse(tape.constant(h), tape.constant(v), tape.constant(onehot), w).value();
    oracle::Vec hp = oracle::vec_matmul(oracle::from(h)[1], testing::param(s, "v/pool_h"));
    const oracle::Vec vp = oracle::vec_matmul(oracle::from(v)[2], testing::param(s, "v/pool_v"));
    for (std::size_t c = 0; c < hp.size(); ++c) hp[c] *= vp[c];
    CHECK(oracle::max_abs_diff(j, oracle::vec_matmul(hp, testing::param(s, "v/out"))) < 1e-12);

    const Tensor zero = ban_glimpse(tape.constant(h), tape.constant(Tensor({3, 4})),
                                    tape.constant(Tensor({2, 3}, 1.0 / 6.0)), w)
                            .value();
    CHECK(zero == Tensor({1, 4}));
    CHECK_THROWS_AS(ban_glimpse(tape.constant(h), tape.constant(v), tape.constant(Tensor({3, 2})), w), ShapeError);
}

TEST_CASE("bilinear map and glimpse match pairwise oracles") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        CAPTURE(seed);
        CHECK(testing::glimpse_error(seed) < 1e-12);
    }
}

TEST_CASE("stacked glimpses: zero, one and four") {
    ParamStore s;
    nn::Initializer init(12);
    add_glimpses(s, "vq", 1, 4, init);
    std::mt19937_64 rng(13);
    const Tensor fq = random_tensor(rng, 3, 4), v = random_tensor(rng, 5, 4);
    Tape tape;
    const CrossModalState none = vq_interact(tape.constant(fq), tape.constant(v), {});
    CHECK(none.h.value() == fq);
    CHECK(none.maps.empty());

    const CrossModalState one = vq_interact(tape.constant(fq), tape.constant(v), bind_glimpses(tape, s, "vq", 1));
    const Tensor& j = one.glimpses[0].value();
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 4; ++c) CHECK(one.h.value()(r, c) == fq(r, c) + j[c]);

    for (std::uint64_t seed = 0; seed < 10; ++seed) CHECK(testing::vq_replay_error(seed, 4) < 1e-10);
}

TEST_CASE("glimpse gradients pass finite-difference checking") {
    ParamStore s;
    nn::Initializer init(14);
    add_glimpses(s, "vq", 2, 4, init);
    std::mt19937_64 rng(15);
    const std::size_t fq = s.add("fq", random_tensor(rng, 3, 4));
    const std::size_t v = s.add("v", random_tensor(rng, 4, 4));
    const GradCheckReport r = testing::check_gradients(s, [&](Tape& t, const ParamStore& p) {
        return vq_interact(t.param(p, fq), t.param(p, v), bind_glimpses(t, p, "vq", 2)).h;
    });
    CHECK(r.max_rel_error() < 1e-4);
}
