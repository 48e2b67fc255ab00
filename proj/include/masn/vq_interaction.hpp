#pragma once

// Question-grounded visual features via stacked bilinear attention glimpses.
// Each glimpse forms a joint distribution over all (word, object) pairs,
// pools a d-vector from it, and adds that vector to every question row.

#include <string>
#include <vector>

#include "masn/autodiff.hpp"
#include "masn/nn.hpp"

namespace masn {

struct GlimpseWeights {
    // Attention: score(i, j) = w . ((H_i U_h) * (V_j U_v))
    Var attn_h;  // d x d
    Var attn_v;  // d x d
    Var attn_w;  // 1 x d
    // Pooling: W_o applied to sum_ij A_ij (H_i P_h) * (V_j P_v)
    Var pool_h;  // d x d
    Var pool_v;  // d x d
    Var out;     // d x d

    static void add(ParamStore& store, const std::string& prefix, std::size_t d, nn::Initializer& init);
    static GlimpseWeights bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

// L x K map, softmax over all L*K pairs.
Var bilinear_attention_map(Var h, Var v, const GlimpseWeights& w);

// 1 x d joint vector pooled under `attention`.
Var ban_glimpse(Var h, Var v, Var attention, const GlimpseWeights& w);

struct CrossModalState {
    Var h;                        // L x d
    std::vector<Var> maps;        // one L x K map per glimpse
    std::vector<Var> glimpses;    // one 1 x d joint vector per glimpse
};

// H_0 = F_q; H_i = H_{i-1} + 1 * glimpse_i^T for i = 1..g.
CrossModalState vq_interact(Var word_features, Var v, const std::vector<GlimpseWeights>& glimpses);

std::vector<GlimpseWeights> bind_glimpses(Tape& tape, const ParamStore& store, const std::string& prefix,
                                          std::size_t count);
void add_glimpses(ParamStore& store, const std::string& prefix, std::size_t count, std::size_t d,
                  nn::Initializer& init);

}  // namespace masn
