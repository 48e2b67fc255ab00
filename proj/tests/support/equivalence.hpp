#pragma once

// Seeded random instances of each model block compared against the
// brute-force oracles. Each function returns the largest absolute
// difference observed for one seed.

#include <algorithm>
#include <random>

#include "masn/fusion.hpp"
#include "masn/object_graph.hpp"
#include "masn/vq_interaction.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

namespace testing {

// Replaces every parameter (including gains and biases) with N(0, stddev^2).
inline void randomize(masn::ParamStore& store, std::uint64_t seed, double stddev = 0.5) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < store.size(); ++i) {
        masn::Tensor& t = store.value(i);
        t = random_tensor(rng, t.rows(), t.cols(), stddev);
    }
}

inline oracle::Mat param(const masn::ParamStore& s, const std::string& path) { return oracle::from(s.value(path)); }
inline oracle::Vec param_row(const masn::ParamStore& s, const std::string& path) {
    return oracle::row_of(s.value(path));
}

inline long double adjacency_error(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::size_t k = 3 + seed % 3, d = 4;
    const masn::Tensor x = random_tensor(rng, k, d), w1 = random_tensor(rng, d, d), w2 = random_tensor(rng, d, d);
    masn::Tape tape;
    const masn::Tensor a = masn::build_adjacency(tape.constant(x), tape.constant(w1), tape.constant(w2)).value();
    return oracle::max_abs_diff(a, oracle::adjacency(oracle::from(x), oracle::from(w1), oracle::from(w2)));
}

inline long double gcn_error(std::uint64_t seed) {
    std::mt19937_64 rng(seed + 100);
    const std::size_t k = 3 + seed % 3, d = 4;
    masn::ParamStore s;
    masn::nn::Initializer init(seed);
    masn::GraphWeights::add(s, "g", d, init);
    randomize(s, seed + 1);
    const masn::Tensor x = random_tensor(rng, k, d);
    masn::Tape tape;
    const masn::GraphOutput out = masn::run_object_graph(masn::GraphWeights::bind(tape, s, "g"), tape.constant(x));
    const oracle::Mat a = oracle::adjacency(oracle::from(x), param(s, "g/w1"), param(s, "g/w2"));
    const oracle::Mat f =
        oracle::gcn(oracle::from(x), a, param(s, "g/w3"), param(s, "g/w4"), param_row(s, "g/norm/gain"),
                    param_row(s, "g/norm/bias"));
    return std::max(oracle::max_abs_diff(out.adjacency.value(), a), oracle::max_abs_diff(out.features.value(), f));
}

inline oracle::Glimpse glimpse_params(const masn::ParamStore& s, const std::string& p) {
    return {param(s, p + "/attn_h"), param(s, p + "/attn_v"), param_row(s, p + "/attn_w"),
            param(s, p + "/pool_h"), param(s, p + "/pool_v"), param(s, p + "/out")};
}

// One bilinear map and one glimpse, checked against the pairwise loop and
// the literal double sum.
inline long double glimpse_error(std::uint64_t seed) {
    std::mt19937_64 rng(seed + 200);
    const std::size_t l = 2 + seed % 2, k = 3 + seed % 3, d = 4;
    masn::ParamStore s;
    masn::nn::Initializer init(seed);
    masn::GlimpseWeights::add(s, "v", d, init);
    randomize(s, seed + 2);
    const masn::Tensor h = random_tensor(rng, l, d), v = random_tensor(rng, k, d);
    masn::Tape tape;
    const auto w = masn::GlimpseWeights::bind(tape, s, "v");
    masn::Var map = masn::bilinear_attention_map(tape.constant(h), tape.constant(v), w);
    masn::Var joint = masn::ban_glimpse(tape.constant(h), tape.constant(v), map, w);
    const oracle::Glimpse g = glimpse_params(s, "v");
    const oracle::Mat om = oracle::bilinear_map(oracle::from(h), oracle::from(v), g.uh, g.uv, g.w);
    const oracle::Vec oj = oracle::ban_glimpse(oracle::from(h), oracle::from(v), om, g.ph, g.pv, g.wo);
    return std::max(oracle::max_abs_diff(map.value(), om), oracle::max_abs_diff(joint.value(), oj));
}

inline long double vq_replay_error(std::uint64_t seed, std::size_t glimpses = 4) {
    std::mt19937_64 rng(seed + 300);
    const std::size_t l = 3, k = 4, d = 4;
    masn::ParamStore s;
    masn::nn::Initializer init(seed);
    masn::add_glimpses(s, "vq", glimpses, d, init);
    randomize(s, seed + 3, 0.4);
    const masn::Tensor fq = random_tensor(rng, l, d), v = random_tensor(rng, k, d);
    masn::Tape tape;
    const masn::CrossModalState st =
        masn::vq_interact(tape.constant(fq), tape.constant(v), masn::bind_glimpses(tape, s, "vq", glimpses));
    std::vector<oracle::Glimpse> gs;
    for (std::size_t i = 0; i < glimpses; ++i) gs.push_back(glimpse_params(s, "vq/glimpse" + std::to_string(i)));
    const oracle::VqReplay r = oracle::vq_replay(oracle::from(fq), oracle::from(v), gs);
    long double err = oracle::max_abs_diff(st.h.value(), r.h);
    for (std::size_t i = 0; i < glimpses; ++i) {
        err = std::max(err, oracle::max_abs_diff(st.maps[i].value(), r.maps[i]));
        err = std::max(err, oracle::max_abs_diff(st.glimpses[i].value(), r.joints[i]));
    }
    return err;
}

struct FusionInstance {
    masn::ParamStore store;
    masn::Tensor h_a, h_m, q;
    std::size_t l = 2, d = 4;

    explicit FusionInstance(std::uint64_t seed, std::size_t rows = 2, std::size_t width = 4) : l(rows), d(width) {
        masn::nn::Initializer init(seed);
        masn::FusionWeights::add(store, "fusion", d, init);
        randomize(store, seed + 4);
        std::mt19937_64 rng(seed + 400);
        h_a = random_tensor(rng, l, d);
        h_m = random_tensor(rng, l, d);
        q = random_tensor(rng, 1, d);
    }
};

inline oracle::Ffn fusion_ffn(const masn::ParamStore& s) {
    return {param(s, "fusion/ffn/hidden/w"), param_row(s, "fusion/ffn/hidden/b"), param(s, "fusion/ffn/out/w"),
            param_row(s, "fusion/ffn/out/b")};
}

// Centered attention (three branches, LayerNorm(P + U)) against loops.
inline long double attention_error(std::uint64_t seed) {
    FusionInstance in(seed);
    masn::Tape tape;
    const auto w = masn::FusionWeights::bind(tape, in.store, "fusion");
    masn::Var ha = tape.constant(in.h_a), hm = tape.constant(in.h_m);
    masn::Var u = masn::stack_streams(ha, hm);
    const auto ca = masn::centered_attention(u, ha, hm, w, static_cast<masn::Real>(in.d));
    const oracle::Mat ou = oracle::from(u.value());
    const oracle::Mat keys[3] = {oracle::from(in.h_a), oracle::from(in.h_m), ou};
    static const char* names[3] = {"appearance", "motion", "all"};
    long double err = 0.0L;
    for (std::size_t b = 0; b < 3; ++b) {
        const std::string p = std::string("fusion/attn_") + names[b];
        const oracle::AttentionOut att = oracle::attention(ou, keys[b], param(in.store, p + "/query"),
                                                           param(in.store, p + "/key"),
                                                           param(in.store, p + "/value"), in.d);
        const std::string n = std::string("fusion/norm_") + names[b];
        const oracle::Mat z = oracle::layer_norm(oracle::add(att.output, ou), param_row(in.store, n + "/gain"),
                                                 param_row(in.store, n + "/bias"));
        err = std::max(err, oracle::max_abs_diff(ca.attended[b].scores.value(), att.scores));
        err = std::max(err, oracle::max_abs_diff(ca.attended[b].output.value(), att.output));
        err = std::max(err, oracle::max_abs_diff(ca.z[b].value(), z));
    }
    return err;
}

// Question-guided fusion and attention pooling against loops.
inline long double fusion_error(std::uint64_t seed) {
    FusionInstance in(seed);
    std::mt19937_64 rng(seed + 500);
    const std::size_t rows = 2 * in.l;
    std::vector<masn::Tensor> z;
    for (int b = 0; b < 3; ++b) z.push_back(random_tensor(rng, rows, in.d));
    masn::Tape tape;
    const auto w = masn::FusionWeights::bind(tape, in.store, "fusion");
    std::vector<masn::Var> zv;
    for (const auto& t : z) zv.push_back(tape.constant(t));
    const auto fused = masn::question_guided_fuse(zv, tape.constant(in.q), w, static_cast<masn::Real>(in.d));
    const auto agg = masn::aggregate(fused.o, w.score);

    std::vector<oracle::Mat> oz;
    for (const auto& t : z) oz.push_back(oracle::from(t));
    const oracle::FusionOut of =
        oracle::fusion(oz, oracle::row_of(in.q), in.d, fusion_ffn(in.store), param_row(in.store, "fusion/out_norm/gain"),
                       param_row(in.store, "fusion/out_norm/bias"));
    const oracle::AggregateOut oa = oracle::aggregate(of.o, oracle::row_of(in.store.value("fusion/score")));
    long double err = oracle::max_abs_diff(fused.alpha.value(), of.alpha);
    err = std::max(err, oracle::max_abs_diff(fused.s.value(), of.s));
    err = std::max(err, oracle::max_abs_diff(fused.o.value(), of.o));
    err = std::max(err, oracle::max_abs_diff(agg.beta.value(), oa.beta));
    err = std::max(err, oracle::max_abs_diff(agg.f.value(), oa.f));
    return err;
}

}  // namespace testing
