#include <cmath>
#include <random>

#include "doctest.h"
#include "masn/encoders.hpp"
#include "masn/errors.hpp"
#include "support/oracles.hpp"
#include "support/test_support.hpp"

using namespace masn;
using testing::random_tensor;

namespace {

struct Fixture {
    std::size_t d_in = 5, d = 6, k = 4, frames = 2;
    ParamStore store;
    Tensor objects, boxes, global;
    std::vector<std::uint32_t> frame_index{0, 0, 1, 1};

    explicit Fixture(std::uint64_t seed) {
        nn::Initializer init(seed);
        StreamEncoderWeights::add(store, "enc", d_in, d, init);
        std::mt19937_64 rng(seed + 1);
        objects = random_tensor(rng, k, d_in);
        global = random_tensor(rng, frames, d_in);
        boxes = Tensor({k, 4});
        std::uniform_real_distribution<double> u(0.0, 0.45);
        for (std::size_t i = 0; i < k; ++i) {
            boxes(i, 0) = u(rng);
            boxes(i, 1) = u(rng);
            boxes(i, 2) = boxes(i, 0) + 0.5;
            boxes(i, 3) = boxes(i, 1) + 0.5;
        }
    }

    Var encode(Tape& tape, const ParamStore& p, const Tensor& obj, const Tensor& bx,
               const std::vector<std::uint32_t>& frames_of) const {
        const auto w = StreamEncoderWeights::bind(tape, p, "enc");
        Var local = encode_location(w, tape.constant(obj), tape.constant(bx), frames_of, d);
        return fuse_global(w, local, tape.constant(global), frames_of);
    }
};

}  // namespace

TEST_CASE("positional encoding uses interleaved sine and cosine of the frame index") {
    const Tensor pe = positional_encoding(3, 8);
    for (std::size_t i = 0; i < 4; ++i) {
        const long double freq = std::pow(10000.0L, -static_cast<long double>(2 * i) / 8.0L);
        CHECK(std::fabs(pe[2 * i] - std::sin(3.0L * freq)) < 1e-12);
        CHECK(std::fabs(pe[2 * i + 1] - std::cos(3.0L * freq)) < 1e-12);
    }
    const Tensor zero = positional_encoding(0, 4);
    CHECK(zero == Tensor::matrix(1, 4, {0.0, 1.0, 0.0, 1.0}));
    CHECK_THROWS_AS(positional_encoding(1, 5), ShapeError);

    const std::uint32_t idx[] = {2, 0, 2};
    const Tensor rows = positional_rows(idx, 4);
    CHECK(rows.rows() == 3);
    for (std::size_t c = 0; c < 4; ++c) CHECK(rows(0, c) == rows(2, c));
}

TEST_CASE("objects of one frame share the same temporal code") {
    Fixture f(3);
    // Identical object features and boxes in one frame give identical rows;
    // the same object in another frame does not.
    Tensor obj = f.objects, bx = f.boxes;
    for (std::size_t c = 0; c < f.d_in; ++c) obj(1, c) = obj(0, c), obj(2, c) = obj(0, c);
    for (std::size_t c = 0; c < 4; ++c) bx(1, c) = bx(0, c), bx(2, c) = bx(0, c);
    Tape tape;
    const Tensor v = f.encode(tape, f.store, obj, bx, f.frame_index).value();
    CHECK(v.rows() == 4);
    CHECK(v.cols() == f.d);
    for (std::size_t c = 0; c < f.d; ++c) CHECK(v(0, c) == v(1, c));
    CHECK(max_abs_diff(Tensor::row(v.row_span(0)), Tensor::row(v.row_span(2))) > 1e-6);
}

TEST_CASE("encode_location and fuse_global are row-permutation equivariant") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Fixture f(seed);
        std::mt19937_64 rng(seed);
        const auto perm = testing::random_permutation(rng, f.k);
        std::vector<std::uint32_t> frames_perm(f.k);
        for (std::size_t i = 0; i < f.k; ++i) frames_perm[i] = f.frame_index[perm[i]];
        Tape tape;
        const Tensor base = f.encode(tape, f.store, f.objects, f.boxes, f.frame_index).value();
        const Tensor moved =
            f.encode(tape, f.store, testing::permute_rows(f.objects, perm), testing::permute_rows(f.boxes, perm),
                     frames_perm)
                .value();
        CHECK(max_abs_diff(moved, testing::permute_rows(base, perm)) < 1e-12);
    }
}

TEST_CASE("encoder shape errors") {
    Fixture f(1);
    Tape tape;
    const auto w = StreamEncoderWeights::bind(tape, f.store, "enc");
    CHECK_THROWS_AS(encode_location(w, tape.constant(f.objects), tape.constant(Tensor({3, 4})), f.frame_index, f.d),
                    ShapeError);
    Var local = encode_location(w, tape.constant(f.objects), tape.constant(f.boxes), f.frame_index, f.d);
    const std::vector<std::uint32_t> bad{0, 0, 1, 2};
    CHECK_THROWS_AS(fuse_global(w, local, tape.constant(f.global), bad), ShapeError);
}

TEST_CASE("stream encoders: swapping inputs and parameters swaps outputs exactly") {
    Fixture f(4);
    ParamStore two;
    nn::Initializer init(99);
    StreamEncoderWeights::add(two, "appearance", f.d_in, f.d, init);
    StreamEncoderWeights::add(two, "motion", f.d_in, f.d, init);
    std::mt19937_64 rng(5);
    const Tensor oa = random_tensor(rng, f.k, f.d_in), om = random_tensor(rng, f.k, f.d_in);

    ParamStore swapped;
    for (std::size_t i = 0; i < two.size(); ++i) {
        std::string path = two.path(i);
        path = path.rfind("appearance", 0) == 0 ? "motion" + path.substr(10) : "appearance" + path.substr(6);
        swapped.add(path, two.value(i));
    }
    auto run = [&](const ParamStore& p, const char* prefix, const Tensor& obj) {
        Tape tape;
        const auto w = StreamEncoderWeights::bind(tape, p, prefix);
        Var local = encode_location(w, tape.constant(obj), tape.constant(f.boxes), f.frame_index, f.d);
        return fuse_global(w, local, tape.constant(f.global), f.frame_index).value();
    };
    CHECK(run(two, "appearance", oa) == run(swapped, "motion", oa));
    CHECK(run(two, "motion", om) == run(swapped, "appearance", om));
}

TEST_CASE("LSTM question encoder matches a step-by-step cell oracle") {
    const std::size_t vocab = 7, embed = 4, d = 6;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        ParamStore store;
        nn::Initializer init(seed);
        QuestionWeights::add(store, "q", vocab, embed, d, init);
        // Non-zero biases so every gate term is exercised.
        std::mt19937_64 rng(seed + 50);
        for (const char* path : {"q/lstm_fwd/b", "q/lstm_bwd/b", "q/word_proj/b", "q/context_proj/b"}) {
            Tensor& b = store.value(path);
            b = random_tensor(rng, 1, b.cols(), 0.5);
        }
        const std::vector<std::uint32_t> tokens{3, 0, 5};

        Tape tape;
        const QuestionEncoding enc = encode_question(QuestionWeights::bind(tape, store, "q"), tokens);

        const oracle::Mat emb = oracle::from(store.value("q/embedding"));
        auto run = [&](const char* prefix, bool reverse) {
            const std::string p(prefix);
            const oracle::Mat wx = oracle::from(store.value(p + "/wx"));
            const oracle::Mat wh = oracle::from(store.value(p + "/wh"));
            const oracle::Vec b = oracle::row_of(store.value(p + "/b"));
            oracle::LstmStep st{oracle::Vec(d / 2, 0.0L), oracle::Vec(d / 2, 0.0L)};
            std::vector<oracle::Vec> hs(tokens.size());
            for (std::size_t s = 0; s < tokens.size(); ++s) {
                const std::size_t t = reverse ? tokens.size() - 1 - s : s;
                st = oracle::lstm_cell(emb[tokens[t]], st, wx, wh, b);
                hs[t] = st.h;
            }
            return hs;
        };
        const auto fwd = run("q/lstm_fwd", false);
        const auto bwd = run("q/lstm_bwd", true);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            CHECK(oracle::max_abs_diff(enc.forward_states[t].value(), fwd[t]) < 1e-10);
            CHECK(oracle::max_abs_diff(enc.backward_states[t].value(), bwd[t]) < 1e-10);
        }
        const oracle::Mat wp = oracle::from(store.value("q/word_proj/w"));
        const oracle::Vec bp = oracle::row_of(store.value("q/word_proj/b"));
        oracle::Mat fq;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            oracle::Vec cat = fwd[t];
            cat.insert(cat.end(), bwd[t].begin(), bwd[t].end());
            oracle::Vec row = oracle::vec_matmul(cat, wp);
            for (std::size_t c = 0; c < d; ++c) row[c] += bp[c];
            fq.push_back(row);
        }
        CHECK(oracle::max_abs_diff(enc.word_features.value(), fq) < 1e-10);

        oracle::Vec last = fwd.back();
        last.insert(last.end(), bwd.front().begin(), bwd.front().end());
        oracle::Vec q = oracle::vec_matmul(last, oracle::from(store.value("q/context_proj/w")));
        const oracle::Vec bc = oracle::row_of(store.value("q/context_proj/b"));
        for (std::size_t c = 0; c < d; ++c) q[c] += bc[c];
        CHECK(oracle::max_abs_diff(enc.context.value(), q) < 1e-10);
    }
}

TEST_CASE("question encoder shapes, reversal symmetry and errors") {
    const std::size_t vocab = 6, embed = 3, d = 4;
    ParamStore store;
    nn::Initializer init(8);
    QuestionWeights::add(store, "q", vocab, embed, d, init);
    Tape tape;
    const auto w = QuestionWeights::bind(tape, store, "q");

    const std::vector<std::uint32_t> one{2};
    const QuestionEncoding single = encode_question(w, one);
    CHECK(single.word_features.value().shape() == Shape{1, d});
    CHECK(single.context.value().shape() == Shape{1, d});

    // The forward pass over the reversed tokens equals the original
    // sequence's backward pass when both directions share weights.
    QuestionWeights shared = w;
    shared.backward = shared.forward;
    const std::vector<std::uint32_t> tokens{1, 4, 0, 3};
    const std::vector<std::uint32_t> reversed(tokens.rbegin(), tokens.rend());
    const QuestionEncoding a = encode_question(shared, tokens);
    const QuestionEncoding b = encode_question(shared, reversed);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        CHECK(a.backward_states[t].value() == b.forward_states[tokens.size() - 1 - t].value());
    }

    CHECK_THROWS_AS(encode_question(w, std::vector<std::uint32_t>{}), ShapeError);
    CHECK_THROWS_AS(encode_question(w, std::vector<std::uint32_t>{6}), ShapeError);
    ParamStore odd;
    CHECK_THROWS_AS(QuestionWeights::add(odd, "q", vocab, embed, 5, init), ConfigError);
}

TEST_CASE("encoder gradients pass finite-difference checking") {
    Fixture f(6);
    const GradCheckReport visual = testing::check_gradients(
        f.store, [&](Tape& t, const ParamStore& p) { return f.encode(t, p, f.objects, f.boxes, f.frame_index); });
    CHECK(visual.max_rel_error() < 1e-4);

    ParamStore q;
    nn::Initializer init(2);
    QuestionWeights::add(q, "q", 6, 4, 6, init);
    const std::vector<std::uint32_t> tokens{1, 5, 2};
    const GradCheckReport text = testing::check_gradients(q, [&](Tape& t, const ParamStore& p) {
        const QuestionEncoding e = encode_question(QuestionWeights::bind(t, p, "q"), tokens);
        const Var parts[] = {e.word_features, e.context};
        return ops::concat_rows(parts);
    });
    CHECK(text.max_rel_error() < 1e-4);
}
