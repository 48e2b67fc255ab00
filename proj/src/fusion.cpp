#include "masn/fusion.hpp"

#include <cmath>

#include "masn/errors.hpp"

namespace masn {

using nn::join;

namespace {

const char* branch_name(std::size_t b) {
    static constexpr const char* names[kBranchCount] = {"appearance", "motion", "all"};
    return names[b];
}

}  // namespace

void AttentionWeights::add(ParamStore& store, const std::string& prefix, std::size_t d, nn::Initializer& init) {
    store.add(join(prefix, "query"), init.fan_in_uniform(d, d));
    store.add(join(prefix, "key"), init.fan_in_uniform(d, d));
    store.add(join(prefix, "value"), init.fan_in_uniform(d, d));
}

AttentionWeights AttentionWeights::bind(Tape& tape, const ParamStore& store, const std::string& prefix) {
    return {tape.param(store, join(prefix, "query")), tape.param(store, join(prefix, "key")),
            tape.param(store, join(prefix, "value"))};
}

void FusionWeights::add(ParamStore& store, const std::string& prefix, std::size_t d, nn::Initializer& init) {
    for (std::size_t b = 0; b < kBranchCount; ++b) {
        AttentionWeights::add(store, join(prefix, std::string("attn_") + branch_name(b)), d, init);
        nn::LayerNorm::add(store, join(prefix, std::string("norm_") + branch_name(b)), d);
    }
    nn::Ffn::add(store, join(prefix, "ffn"), d, 4 * d, d, init);
    nn::LayerNorm::add(store, join(prefix, "out_norm"), d);
    store.add(join(prefix, "score"), init.fan_in_uniform(d, 1));
}

FusionWeights FusionWeights::bind(Tape& tape, const ParamStore& store, const std::string& prefix,
                                  const std::array<bool, kBranchCount>& active) {
    FusionWeights w;
    for (std::size_t b = 0; b < kBranchCount; ++b) {
        if (!active[b]) continue;
        w.attention[b] = AttentionWeights::bind(tape, store, join(prefix, std::string("attn_") + branch_name(b)));
        w.attention_norm[b] = nn::LayerNorm::bind(tape, store, join(prefix, std::string("norm_") + branch_name(b)));
    }
    w.ffn = nn::Ffn::bind(tape, store, join(prefix, "ffn"));
    w.out_norm = nn::LayerNorm::bind(tape, store, join(prefix, "out_norm"));
    w.score = tape.param(store, join(prefix, "score"));
    return w;
}

Var stack_streams(Var h_a, Var h_m) {
    if (h_a.value().shape() != h_m.value().shape()) {
        throw ShapeError("stack_streams: appearance and motion matrices differ in shape");
    }
    const Var parts[] = {h_a, h_m};
    return ops::concat_rows(parts);
}

AttentionResult scaled_dot_attention(Var queries, Var keys_values, const AttentionWeights& w, Real d_k) {
    Var q = ops::matmul(queries, w.query);
    Var k = ops::matmul(keys_values, w.key);
    Var v = ops::matmul(keys_values, w.value);
    Var scores = ops::softmax(ops::scale(ops::matmul_nt(q, k), 1.0 / std::sqrt(d_k)), 1);
    return {scores, ops::matmul(scores, v)};
}

CenteredAttention centered_attention(Var u, Var h_a, Var h_m, const FusionWeights& w, Real d_k,
                                     const std::array<bool, kBranchCount>& active) {
    CenteredAttention out;
    out.active = active;
    const Var keys[kBranchCount] = {h_a, h_m, u};
    for (std::size_t b = 0; b < kBranchCount; ++b) {
        if (!active[b]) continue;
        out.attended[b] = scaled_dot_attention(u, keys[b], w.attention[b], d_k);
        out.z[b] = w.attention_norm[b](ops::add(out.attended[b].output, u));
    }
    return out;
}

QuestionGuidedFusion question_guided_fuse(const std::vector<Var>& z, Var q, const FusionWeights& w,
                                          Real d_z) {
    if (z.empty()) throw ShapeError("question_guided_fuse: no branches to fuse");
    std::vector<Var> scores;
    for (Var zk : z) scores.push_back(ops::matmul_nt(q, ops::sum_rows(zk)));
    QuestionGuidedFusion out;
    out.alpha = ops::softmax(ops::scale(ops::concat_cols(scores), 1.0 / std::sqrt(d_z)), 1);
    Var s = ops::scale_by(z[0], ops::element(out.alpha, 0, 0));
    for (std::size_t k = 1; k < z.size(); ++k) {
        s = ops::add(s, ops::scale_by(z[k], ops::element(out.alpha, 0, k)));
    }
    out.s = s;
    out.o = w.out_norm(ops::add(s, w.ffn(s)));
    return out;
}

Aggregation aggregate(Var o, Var score) {
    Aggregation out;
    out.beta = ops::softmax(ops::matmul(o, score), 0);
    out.f = ops::matmul(ops::transpose(out.beta), o);
    return out;
}

}  // namespace masn
