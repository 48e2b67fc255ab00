#include "masn/vq_interaction.hpp"

#include "masn/errors.hpp"

namespace masn {

using nn::join;

void GlimpseWeights::add(ParamStore& store, const std::string& prefix, std::size_t d, nn::Initializer& init) {
    store.add(join(prefix, "attn_h"), init.fan_in_uniform(d, d));
    store.add(join(prefix, "attn_v"), init.fan_in_uniform(d, d));
    const Tensor attn_w = init.fan_in_uniform(d, 1);
    store.add(join(prefix, "attn_w"), Tensor({1, d}, std::vector<Real>(attn_w.data().begin(), attn_w.data().end())));
    store.add(join(prefix, "pool_h"), init.fan_in_uniform(d, d));
    store.add(join(prefix, "pool_v"), init.fan_in_uniform(d, d));
    store.add(join(prefix, "out"), init.fan_in_uniform(d, d));
}

GlimpseWeights GlimpseWeights::bind(Tape& tape, const ParamStore& store, const std::string& prefix) {
    return {tape.param(store, join(prefix, "attn_h")), tape.param(store, join(prefix, "attn_v")),
            tape.param(store, join(prefix, "attn_w")), tape.param(store, join(prefix, "pool_h")),
            tape.param(store, join(prefix, "pool_v")), tape.param(store, join(prefix, "out"))};
}

Var bilinear_attention_map(Var h, Var v, const GlimpseWeights& w) {
    if (h.cols() != w.attn_h.rows() || v.cols() != w.attn_v.rows()) {
        throw ShapeError("bilinear_attention_map: feature width does not match glimpse weights");
    }
    Var hq = ops::mul_row(ops::matmul(h, w.attn_h), w.attn_w);
    Var vk = ops::matmul(v, w.attn_v);
    return ops::softmax_all(ops::matmul_nt(hq, vk));
}

Var ban_glimpse(Var h, Var v, Var attention, const GlimpseWeights& w) {
    const Tensor& a = attention.value();
    if (a.rows() != h.rows() || a.cols() != v.rows()) {
        throw ShapeError("ban_glimpse: attention map must be L x K");
    }
    // sum_ij A_ij (a_i * b_j) = column sums of a * (A b)
    Var hp = ops::matmul(h, w.pool_h);
    Var vp = ops::matmul(v, w.pool_v);
    Var joint = ops::sum_rows(ops::mul(hp, ops::matmul(attention, vp)));
    return ops::matmul(joint, w.out);
}

CrossModalState vq_interact(Var word_features, Var v, const std::vector<GlimpseWeights>& glimpses) {
    CrossModalState st;
    st.h = word_features;
    for (const GlimpseWeights& w : glimpses) {
        Var map = bilinear_attention_map(st.h, v, w);
        Var joint = ban_glimpse(st.h, v, map, w);
        st.h = ops::add_row(st.h, joint);
        st.maps.push_back(map);
        st.glimpses.push_back(joint);
    }
    return st;
}

std::vector<GlimpseWeights> bind_glimpses(Tape& tape, const ParamStore& store, const std::string& prefix,
                                          std::size_t count) {
    std::vector<GlimpseWeights> out;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(GlimpseWeights::bind(tape, store, join(prefix, "glimpse" + std::to_string(i))));
    }
    return out;
}

void add_glimpses(ParamStore& store, const std::string& prefix, std::size_t count, std::size_t d,
                  nn::Initializer& init) {
    for (std::size_t i = 0; i < count; ++i) {
        GlimpseWeights::add(store, join(prefix, "glimpse" + std::to_string(i)), d, init);
    }
}

}  // namespace masn
