#pragma once

// Motion-appearance fusion: three centered scaled dot-product attentions over
// the stacked stream matrix U, question-guided weighting of the three
// results, and attention pooling over the 2L positions into the final vector.

#include <array>
#include <string>
#include <vector>

#include "masn/autodiff.hpp"
#include "masn/nn.hpp"

namespace masn {

enum class Branch : std::size_t { Appearance = 0, Motion = 1, All = 2 };
inline constexpr std::size_t kBranchCount = 3;

struct AttentionWeights {
    Var query, key, value;  // d x d each, no output projection

    static void add(ParamStore& store, const std::string& prefix, std::size_t d, nn::Initializer& init);
    static AttentionWeights bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

struct FusionWeights {
    std::array<AttentionWeights, kBranchCount> attention;
    std::array<nn::LayerNorm, kBranchCount> attention_norm;
    nn::Ffn ffn;            // d -> 4d -> d
    nn::LayerNorm out_norm;
    Var score;              // d x 1, bias-free (softmax is shift invariant)

    static void add(ParamStore& store, const std::string& prefix, std::size_t d, nn::Initializer& init);
    // Binds only the branches flagged in `active`; the rest stay unbound.
    static FusionWeights bind(Tape& tape, const ParamStore& store, const std::string& prefix,
                              const std::array<bool, kBranchCount>& active = {true, true, true});
};

// U = [H_a ; H_m], appearance rows first.
Var stack_streams(Var h_a, Var h_m);

struct AttentionResult {
    Var scores;  // row-softmaxed query/key weights (queries x keys)
    Var output;  // attended values
};

// softmax(Q Wq (KV Wk)^T / sqrt(d_k)) (KV Wv), softmax over keys.
AttentionResult scaled_dot_attention(Var queries, Var keys_values, const AttentionWeights& w, Real d_k);

struct CenteredAttention {
    std::array<bool, kBranchCount> active{};
    std::array<AttentionResult, kBranchCount> attended;  // P^a, P^m, P^all
    std::array<Var, kBranchCount> z;                     // LayerNorm(P + U)
};

// Computes the flagged branches: keys/values are H_a, H_m and U respectively.
CenteredAttention centered_attention(Var u, Var h_a, Var h_m, const FusionWeights& w, Real d_k,
                                     const std::array<bool, kBranchCount>& active = {true, true, true});

struct QuestionGuidedFusion {
    Var alpha;  // 1 x n over the n supplied branches
    Var s;      // alpha-weighted sum of the Z matrices
    Var o;      // LayerNorm(S + FFN(S))
};

// alpha = softmax_k(q . z_k / sqrt(d_z)) where z_k sums Z_k over its rows.
QuestionGuidedFusion question_guided_fuse(const std::vector<Var>& z, Var q, const FusionWeights& w,
                                          Real d_z);

struct Aggregation {
    Var beta;  // rows x 1, softmax over rows of O * score
    Var f;     // 1 x d, sum_i beta_i O_i
};

Aggregation aggregate(Var o, Var score);

}  // namespace masn
