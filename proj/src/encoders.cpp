#include "masn/encoders.hpp"

#include <cmath>

#include "masn/errors.hpp"

namespace masn {

using nn::join;

Tensor positional_encoding(std::size_t index, std::size_t d) {
    if (d == 0 || d % 2 != 0) throw ShapeError("positional_encoding: d must be even and positive");
    Tensor pe({1, d});
    const Real pos = static_cast<Real>(index);
    for (std::size_t i = 0; i < d / 2; ++i) {
        const Real freq = std::pow(10000.0, -static_cast<Real>(2 * i) / static_cast<Real>(d));
        pe[2 * i] = std::sin(pos * freq);
        pe[2 * i + 1] = std::cos(pos * freq);
    }
    return pe;
}

Tensor positional_rows(std::span<const std::uint32_t> indices, std::size_t d) {
    Tensor out({indices.size(), d});
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Tensor pe = positional_encoding(indices[k], d);
        for (std::size_t j = 0; j < d; ++j) out(k, j) = pe[j];
    }
    return out;
}

void StreamEncoderWeights::add(ParamStore& store, const std::string& prefix, std::size_t d_in,
                               std::size_t d, nn::Initializer& init) {
    nn::Ffn::add(store, join(prefix, "box_ffn"), 4, d, d, init);
    nn::Ffn::add(store, join(prefix, "local_ffn"), d_in + 2 * d, d, d, init);
    nn::Linear::add(store, join(prefix, "global_proj"), d_in, d, init);
    nn::Ffn::add(store, join(prefix, "fuse_ffn"), 2 * d, d, d, init);
}

StreamEncoderWeights StreamEncoderWeights::bind(Tape& tape, const ParamStore& store,
                                                const std::string& prefix) {
    return {nn::Ffn::bind(tape, store, join(prefix, "box_ffn")),
            nn::Ffn::bind(tape, store, join(prefix, "local_ffn")),
            nn::Linear::bind(tape, store, join(prefix, "global_proj")),
            nn::Ffn::bind(tape, store, join(prefix, "fuse_ffn"))};
}

Var encode_location(const StreamEncoderWeights& w, Var objects, Var boxes,
                    std::span<const std::uint32_t> frame_index, std::size_t d) {
    const std::size_t k = objects.rows();
    if (boxes.rows() != k || boxes.cols() != 4 || frame_index.size() != k) {
        throw ShapeError("encode_location: objects, boxes and frame indices disagree on K");
    }
    Tape& tape = *objects.tape;
    Var spatial = w.box(boxes);
    Var temporal = tape.constant(positional_rows(frame_index, d));
    const Var parts[] = {objects, spatial, temporal};
    return w.local(ops::concat_cols(parts));
}

Var fuse_global(const StreamEncoderWeights& w, Var v_local, Var v_global,
                std::span<const std::uint32_t> frame_index) {
    const std::size_t k = v_local.rows(), frames = v_global.rows();
    if (frame_index.size() != k) throw ShapeError("fuse_global: frame index count differs from K");
    for (auto f : frame_index) {
        if (f >= frames) throw ShapeError("fuse_global: frame index " + std::to_string(f) + " out of range");
    }
    Tape& tape = *v_local.tape;
    Var projected = w.global_proj(v_global);
    std::vector<std::uint32_t> all_frames(frames);
    for (std::size_t t = 0; t < frames; ++t) all_frames[t] = static_cast<std::uint32_t>(t);
    Var with_time = ops::add(projected, tape.constant(positional_rows(all_frames, projected.cols())));
    std::vector<std::size_t> rows(frame_index.begin(), frame_index.end());
    const Var parts[] = {v_local, ops::gather_rows(with_time, rows)};
    return w.fuse(ops::concat_cols(parts));
}

void LstmWeights::add(ParamStore& store, const std::string& prefix, std::size_t input, std::size_t hidden,
                      nn::Initializer& init) {
    store.add(join(prefix, "wx"), init.fan_in_uniform(input, 4 * hidden));
    Tensor wh({hidden, 4 * hidden});
    for (std::size_t gate = 0; gate < 4; ++gate) {
        const Tensor block = init.orthogonal(hidden, hidden);
        for (std::size_t r = 0; r < hidden; ++r)
            for (std::size_t c = 0; c < hidden; ++c) wh(r, gate * hidden + c) = block(r, c);
    }
    store.add(join(prefix, "wh"), std::move(wh));
    Tensor b({1, 4 * hidden});
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;  // forget gate
    store.add(join(prefix, "b"), std::move(b));
}

LstmWeights LstmWeights::bind(Tape& tape, const ParamStore& store, const std::string& prefix) {
    return {tape.param(store, join(prefix, "wx")), tape.param(store, join(prefix, "wh")),
            tape.param(store, join(prefix, "b"))};
}

LstmState lstm_cell(const LstmWeights& w, Var x, LstmState prev) {
    const std::size_t h = prev.h.cols();
    Var z = ops::add_row(ops::add(ops::matmul(x, w.wx), ops::matmul(prev.h, w.wh)), w.b);
    Var input_gate = ops::sigmoid(ops::slice_cols(z, 0, h));
    Var forget_gate = ops::sigmoid(ops::slice_cols(z, h, h));
    Var candidate = ops::tanh(ops::slice_cols(z, 2 * h, h));
    Var output_gate = ops::sigmoid(ops::slice_cols(z, 3 * h, h));
    Var c = ops::add(ops::mul(forget_gate, prev.c), ops::mul(input_gate, candidate));
    return {ops::mul(output_gate, ops::tanh(c)), c};
}

std::vector<Var> lstm_sequence(const LstmWeights& w, Var inputs, bool reverse) {
    Tape& tape = *inputs.tape;
    const std::size_t steps = inputs.rows();
    const std::size_t h = w.wh.rows();
    LstmState state{tape.constant(Tensor({1, h})), tape.constant(Tensor({1, h}))};
    std::vector<Var> out(steps);
    for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t t = reverse ? steps - 1 - s : s;
        state = lstm_cell(w, ops::slice_rows(inputs, t, 1), state);
        out[t] = state.h;
    }
    return out;
}

void QuestionWeights::add(ParamStore& store, const std::string& prefix, std::size_t vocab,
                          std::size_t embed, std::size_t d, nn::Initializer& init) {
    if (d % 2 != 0) throw ConfigError("question encoder: d must be even");
    store.add(join(prefix, "embedding"), init.normal(vocab, embed, 1.0));
    LstmWeights::add(store, join(prefix, "lstm_fwd"), embed, d / 2, init);
    LstmWeights::add(store, join(prefix, "lstm_bwd"), embed, d / 2, init);
    nn::Linear::add(store, join(prefix, "word_proj"), d, d, init);
    nn::Linear::add(store, join(prefix, "context_proj"), d, d, init);
}

QuestionWeights QuestionWeights::bind(Tape& tape, const ParamStore& store, const std::string& prefix) {
    return {tape.param(store, join(prefix, "embedding")), LstmWeights::bind(tape, store, join(prefix, "lstm_fwd")),
            LstmWeights::bind(tape, store, join(prefix, "lstm_bwd")),
            nn::Linear::bind(tape, store, join(prefix, "word_proj")),
            nn::Linear::bind(tape, store, join(prefix, "context_proj"))};
}

QuestionEncoding encode_question(const QuestionWeights& w, std::span<const std::uint32_t> tokens) {
    if (tokens.empty()) throw ShapeError("encode_question: empty question");
    const std::size_t vocab = w.embedding.rows();
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (auto t : tokens) {
        if (t >= vocab) throw ShapeError("encode_question: token " + std::to_string(t) + " outside vocabulary");
        ids.push_back(t);
    }
    Var words = ops::gather_rows(w.embedding, ids);
    QuestionEncoding enc;
    enc.forward_states = lstm_sequence(w.forward, words, false);
    enc.backward_states = lstm_sequence(w.backward, words, true);
    const std::size_t steps = tokens.size();
    std::vector<Var> per_step(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        const Var pair[] = {enc.forward_states[t], enc.backward_states[t]};
        per_step[t] = ops::concat_cols(pair);
    }
    enc.word_features = w.word_proj(ops::concat_rows(per_step));
    const Var last[] = {enc.forward_states[steps - 1], enc.backward_states[0]};
    enc.context = w.context_proj(ops::concat_cols(last));
    return enc;
}

}  // namespace masn
