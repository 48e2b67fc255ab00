#pragma once

// Location encoding, global-local fusion and the bidirectional LSTM question
// encoder. Both visual streams use the same structure under different
// parameter prefixes ("appearance/..." and "motion/...").

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "masn/autodiff.hpp"
#include "masn/nn.hpp"

namespace masn {

// Sinusoidal encoding of a frame index: slot 2i holds sin(index / 10000^(2i/d)),
// slot 2i+1 the matching cosine. Returns 1 x d; d must be even.
Tensor positional_encoding(std::size_t index, std::size_t d);
// One positional-encoding row per entry of `indices`.
Tensor positional_rows(std::span<const std::uint32_t> indices, std::size_t d);

struct StreamEncoderWeights {
    nn::Ffn box;     // 4 -> d
    nn::Ffn local;   // d_in + 2d -> d
    nn::Linear global_proj;  // d_in -> d
    nn::Ffn fuse;    // 2d -> d

    static void add(ParamStore& store, const std::string& prefix, std::size_t d_in, std::size_t d,
                    nn::Initializer& init);
    static StreamEncoderWeights bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

// v_local = FFN([o ; FFN(b) ; PE(frame)]), one row per object.
Var encode_location(const StreamEncoderWeights& w, Var objects, Var boxes,
                    std::span<const std::uint32_t> frame_index, std::size_t d);

// v[k] = FFN([v_local[k] ; G[frame(k)] + PE(frame(k))]) where G is the
// linear projection of the T x d_in global features to width d.
Var fuse_global(const StreamEncoderWeights& w, Var v_local, Var v_global,
                std::span<const std::uint32_t> frame_index);

struct LstmWeights {
    Var wx;  // E x 4h, gate blocks ordered input, forget, cell, output
    Var wh;  // h x 4h
    Var b;   // 1 x 4h

    static void add(ParamStore& store, const std::string& prefix, std::size_t input, std::size_t hidden,
                    nn::Initializer& init);
    static LstmWeights bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

struct LstmState {
    Var h;
    Var c;
};

// One LSTM step on a 1 x E input row.
LstmState lstm_cell(const LstmWeights& w, Var x, LstmState prev);

// Hidden states of a unidirectional pass over the rows of `inputs`; entry t
// is the state after consuming row t. `reverse` walks rows L-1..0 but still
// stores the state for row t at index t.
std::vector<Var> lstm_sequence(const LstmWeights& w, Var inputs, bool reverse);

struct QuestionWeights {
    Var embedding;  // vocab x E
    LstmWeights forward;
    LstmWeights backward;
    nn::Linear word_proj;     // d -> d, applied to [h_fwd_t ; h_bwd_t]
    nn::Linear context_proj;  // d -> d, applied to [h_fwd_last ; h_bwd_first]

    static void add(ParamStore& store, const std::string& prefix, std::size_t vocab, std::size_t embed,
                    std::size_t d, nn::Initializer& init);
    static QuestionWeights bind(Tape& tape, const ParamStore& store, const std::string& prefix);
};

struct QuestionEncoding {
    Var word_features;  // F_q, L x d
    Var context;        // q, 1 x d
    std::vector<Var> forward_states;
    std::vector<Var> backward_states;
};

// Throws ShapeError on an empty question or an out-of-vocabulary token.
QuestionEncoding encode_question(const QuestionWeights& w, std::span<const std::uint32_t> tokens);

}  // namespace masn
