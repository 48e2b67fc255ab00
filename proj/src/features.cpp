#include "masn/features.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "masn/errors.hpp"

namespace masn {

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::Count: return "count";
        case TaskKind::OpenEnded: return "open_ended";
        case TaskKind::MultipleChoice: return "multiple_choice";
    }
    return "?";
}

std::string to_string(CueMode mode) {
    switch (mode) {
        case CueMode::Appearance: return "appearance";
        case CueMode::Motion: return "motion";
        case CueMode::Mixed: return "mixed";
    }
    return "?";
}

TaskKind parse_task_kind(const std::string& s) {
    if (s == "count") return TaskKind::Count;
    if (s == "open_ended") return TaskKind::OpenEnded;
    if (s == "multiple_choice") return TaskKind::MultipleChoice;
    throw ConfigError("unknown task kind: " + s);
}

CueMode parse_cue_mode(const std::string& s) {
    if (s == "appearance") return CueMode::Appearance;
    if (s == "motion") return CueMode::Motion;
    if (s == "mixed") return CueMode::Mixed;
    throw ConfigError("unknown cue mode: " + s);
}

void GeneratorConfig::validate() const {
    if (frames < 1 || objects_per_frame < 1 || feature_dim < 1) {
        throw ConfigError("generator: T, N and d_in must all be at least 1");
    }
    if (vocab < 4) throw ConfigError("generator: vocab must be at least 4");
    if (noise < 0.0 || distractor_rate < 0.0 || distractor_rate > 1.0) {
        throw ConfigError("generator: noise must be >= 0 and distractor_rate in [0, 1]");
    }
    if (task == TaskKind::Count) {
        if (count_min < 1 || count_min > count_max || count_max > object_count()) {
            throw ConfigError("generator: count range must satisfy 1 <= min <= max <= N*T");
        }
    }
    if (task == TaskKind::MultipleChoice) {
        if (num_choices < 2) throw ConfigError("generator: multiple choice needs at least 2 candidates");
        if (num_choices > pattern_count()) {
            throw ConfigError("generator: vocab too small for the requested candidate count");
        }
    }
}

nlohmann::json to_json(const GeneratorConfig& c) {
    return {{"T", c.frames},
            {"N", c.objects_per_frame},
            {"d_in", c.feature_dim},
            {"vocab", c.vocab},
            {"cue", to_string(c.cue)},
            {"task", to_string(c.task)},
            {"num_choices", c.num_choices},
            {"count_min", c.count_min},
            {"count_max", c.count_max},
            {"noise", c.noise},
            {"distractor_rate", c.distractor_rate},
            {"prototype_seed", c.prototype_seed}};
}

GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("generator config must be a JSON object");
    GeneratorConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "T") c.frames = value.get<std::size_t>();
            else if (key == "N") c.objects_per_frame = value.get<std::size_t>();
            else if (key == "d_in") c.feature_dim = value.get<std::size_t>();
            else if (key == "vocab") c.vocab = value.get<std::size_t>();
            else if (key == "cue") c.cue = parse_cue_mode(value.get<std::string>());
            else if (key == "task") c.task = parse_task_kind(value.get<std::string>());
            else if (key == "num_choices") c.num_choices = value.get<std::size_t>();
            else if (key == "count_min") c.count_min = value.get<std::size_t>();
            else if (key == "count_max") c.count_max = value.get<std::size_t>();
            else if (key == "noise") c.noise = value.get<double>();
            else if (key == "distractor_rate") c.distractor_rate = value.get<double>();
            else if (key == "prototype_seed") c.prototype_seed = value.get<std::uint64_t>();
            else throw ConfigError("unknown generator config key: " + key);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("generator config key '" + key + "': " + e.what());
        }
    }
    return c;
}

void ObjectFeatureSet::validate() const {
    const std::size_t k = object_count();
    auto fail = [](const std::string& msg) { throw ShapeInconsistencyError(msg); };
    if (frames < 1 || objects_per_frame < 1) fail("object set has no frames or objects");
    if (appearance.rank() != 2 || appearance.rows() != k) fail("appearance objects must have K = N*T rows");
    if (motion.shape() != appearance.shape()) fail("motion objects must match appearance shape");
    if (boxes.shape() != Shape{k, 4}) fail("boxes must be K x 4");
    if (frame_index.size() != k) fail("frame index list must have K entries");
    const std::size_t d_in = appearance.cols();
    if (global_appearance.shape() != Shape{frames, d_in} || global_motion.shape() != Shape{frames, d_in}) {
        fail("global features must be T x d_in");
    }
    for (std::size_t i = 0; i < k; ++i) {
        if (frame_index[i] != i / objects_per_frame) fail("frame index inconsistent with object position");
        const double x1 = boxes(i, 0), y1 = boxes(i, 1), x2 = boxes(i, 2), y2 = boxes(i, 3);
        if (!(0.0 <= x1 && x1 < x2 && x2 <= 1.0 && 0.0 <= y1 && y1 < y2 && y2 <= 1.0)) {
            fail("box " + std::to_string(i) + " is not a normalized x1<x2, y1<y2 box");
        }
    }
}

void Question::validate(std::size_t vocab) const {
    auto check_tokens = [vocab](const std::vector<std::uint32_t>& toks) {
        for (auto t : toks)
            if (t >= vocab) throw ShapeInconsistencyError("question token outside vocabulary");
    };
    if (tokens.empty()) throw ShapeInconsistencyError("question must have at least one token");
    check_tokens(tokens);
    switch (task) {
        case TaskKind::Count:
            if (answer < 0) throw ShapeInconsistencyError("count answer must be non-negative");
            if (!candidates.empty()) throw ShapeInconsistencyError("count question with candidates");
            break;
        case TaskKind::OpenEnded:
            if (answer < 0) throw ShapeInconsistencyError("answer class must be non-negative");
            if (!candidates.empty()) throw ShapeInconsistencyError("open-ended question with candidates");
            break;
        case TaskKind::MultipleChoice:
            if (candidates.size() < 2) throw ShapeInconsistencyError("multiple choice needs M >= 2");
            if (answer < 0 || static_cast<std::size_t>(answer) >= candidates.size()) {
                throw ShapeInconsistencyError("correct candidate index out of range");
            }
            for (const auto& c : candidates) {
                if (c.empty()) throw ShapeInconsistencyError("empty candidate answer");
                check_tokens(c);
            }
            break;
    }
}

namespace {

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), 0x6d61736eu};
    return std::mt19937_64(seq);
}

enum : std::uint64_t { kTagQuestion = 1, kTagAppearance = 2, kTagMotion = 3, kTagBoxes = 4, kTagProto = 5 };

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::uint32_t token_for_pattern(std::size_t p) {
    return kFirstPatternToken + static_cast<std::uint32_t>(p);
}

// Picks `count` distinct slots out of [0, k).
std::vector<std::uint32_t> choose_slots(std::mt19937_64& rng, std::size_t k, std::size_t count) {
    std::vector<std::uint32_t> all(k);
    std::iota(all.begin(), all.end(), 0u);
    for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + uniform_index(rng, k - i)]);
    all.resize(count);
    return all;
}

struct StreamBuilder {
    Tensor objects;
    std::vector<bool> used;
};

}  // namespace

Tensor prototype(const GeneratorConfig& config, Stream s, std::size_t p) {
    // Each (stream, pattern) prototype has its own substream so prototypes
    // do not depend on how many were requested before.
    auto rng = substream(config.prototype_seed,
                         kTagProto + 16 * (static_cast<std::uint64_t>(p) * 2 + static_cast<std::uint64_t>(s)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor v({1, config.feature_dim});
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = normal(rng);
    return v;
}

Stream cue_stream(const Question& q) {
    return (!q.tokens.empty() && q.tokens[0] == kAskMotionToken) ? Stream::Motion : Stream::Appearance;
}

Episode generate_episode(const GeneratorConfig& config, std::uint64_t seed,
                         const StreamSeedOverride& override_seeds) {
    config.validate();
    const std::size_t T = config.frames, N = config.objects_per_frame, K = T * N;
    const std::size_t d_in = config.feature_dim, P = config.pattern_count();

    auto q_rng = substream(seed, kTagQuestion);
    auto a_rng = substream(override_seeds.appearance.value_or(seed), kTagAppearance);
    auto m_rng = substream(override_seeds.motion.value_or(seed), kTagMotion);
    auto box_rng = substream(seed, kTagBoxes);

    Episode ep;
    ObjectFeatureSet& fs = ep.features;
    fs.frames = T;
    fs.objects_per_frame = N;
    fs.frame_index.resize(K);
    for (std::size_t i = 0; i < K; ++i) fs.frame_index[i] = static_cast<std::uint32_t>(i / N);

    fs.boxes = Tensor({K, 4});
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t axis = 0; axis < 2; ++axis) {
            const double lo = 0.9 * unit(box_rng);
            const double extent = 0.05 + (1.0 - lo - 0.05) * unit(box_rng);
            fs.boxes(i, axis) = lo;
            fs.boxes(i, axis + 2) = std::min(1.0, lo + extent);
        }
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    auto noisy = [&](std::mt19937_64& rng) {
        Tensor t({K, d_in});
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = config.noise * normal(rng);
        return t;
    };
    StreamBuilder streams[2] = {{noisy(a_rng), std::vector<bool>(K, false)},
                                {noisy(m_rng), std::vector<bool>(K, false)}};
    std::mt19937_64* stream_rng[2] = {&a_rng, &m_rng};

    auto plant = [&](Stream s, std::uint32_t slot, std::size_t pattern) {
        auto& b = streams[static_cast<int>(s)];
        const Tensor proto = prototype(config, s, pattern);
        for (std::size_t j = 0; j < d_in; ++j) b.objects(slot, j) += proto[j];
        b.used[slot] = true;
        ep.planted.push_back({s, slot, static_cast<std::uint32_t>(pattern)});
    };
    // Distractors drawn from the stream's own substream, never equal to `avoid`.
    auto scatter_distractors = [&](Stream s, std::optional<std::size_t> avoid) {
        auto& b = streams[static_cast<int>(s)];
        auto& rng = *stream_rng[static_cast<int>(s)];
        for (std::uint32_t slot = 0; slot < K; ++slot) {
            const bool hit = unit(rng) < config.distractor_rate;
            std::size_t pattern = 0;
            if (avoid) {
                pattern = uniform_index(rng, P - 1);
                if (pattern >= *avoid) ++pattern;
            } else {
                pattern = uniform_index(rng, P);
            }
            if (hit && !b.used[slot]) plant(s, slot, pattern);
        }
    };

    Stream cue = Stream::Appearance;
    if (config.cue == CueMode::Motion) cue = Stream::Motion;
    if (config.cue == CueMode::Mixed) cue = uniform_index(q_rng, 2) == 0 ? Stream::Appearance : Stream::Motion;
    const Stream other = cue == Stream::Appearance ? Stream::Motion : Stream::Appearance;
    const std::uint32_t marker = cue == Stream::Appearance ? kAskAppearanceToken : kAskMotionToken;

    Question& q = ep.question;
    q.task = config.task;
    switch (config.task) {
        case TaskKind::OpenEnded: {
            // "Which prototype is in the asked stream?"
            const std::size_t answer = uniform_index(q_rng, P);
            const auto slot = choose_slots(q_rng, K, 1)[0];
            plant(cue, slot, answer);
            const std::size_t decoy = uniform_index(*stream_rng[static_cast<int>(other)], P);
            plant(other, static_cast<std::uint32_t>(uniform_index(*stream_rng[static_cast<int>(other)], K)), decoy);
            q.tokens = {marker};
            q.answer = static_cast<std::int64_t>(answer);
            break;
        }
        case TaskKind::Count: {
            // "How many times does prototype p appear in the asked stream?"
            const std::size_t pattern = uniform_index(q_rng, P);
            const std::size_t count = config.count_min + uniform_index(q_rng, config.count_max - config.count_min + 1);
            for (auto slot : choose_slots(q_rng, K, count)) plant(cue, slot, pattern);
            scatter_distractors(cue, pattern);
            scatter_distractors(other, std::nullopt);
            q.tokens = {marker, token_for_pattern(pattern)};
            q.answer = static_cast<std::int64_t>(count);
            break;
        }
        case TaskKind::MultipleChoice: {
            // "Which candidate prototype is in the asked stream?"
            const std::size_t M = config.num_choices;
            std::vector<std::uint32_t> pool(P);
            std::iota(pool.begin(), pool.end(), 0u);
            for (std::size_t i = 0; i < M; ++i) std::swap(pool[i], pool[i + uniform_index(q_rng, P - i)]);
            const std::size_t correct = uniform_index(q_rng, M);
            plant(cue, choose_slots(q_rng, K, 1)[0], pool[correct]);
            auto& orng = *stream_rng[static_cast<int>(other)];
            std::size_t wrong = uniform_index(orng, M - 1);
            if (wrong >= correct) ++wrong;
            plant(other, static_cast<std::uint32_t>(uniform_index(orng, K)), pool[wrong]);
            q.tokens = {marker};
            for (std::size_t i = 0; i < M; ++i) q.candidates.push_back({token_for_pattern(pool[i])});
            q.answer = static_cast<std::int64_t>(correct);
            break;
        }
    }

    fs.appearance = std::move(streams[0].objects);
    fs.motion = std::move(streams[1].objects);
    auto globals = [&](const Tensor& objects, std::mt19937_64& rng) {
        Tensor g({T, d_in});
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t j = 0; j < d_in; ++j) {
                double acc = 0.0;
                for (std::size_t n = 0; n < N; ++n) acc += objects(t * N + n, j);
                g(t, j) = acc / static_cast<double>(N) + 0.5 * config.noise * normal(rng);
            }
        }
        return g;
    };
    fs.global_appearance = globals(fs.appearance, a_rng);
    fs.global_motion = globals(fs.motion, m_rng);
    return ep;
}

std::vector<Episode> generate_episodes(const GeneratorConfig& config, std::size_t count,
                                       std::uint64_t seed) {
    config.validate();
    std::vector<Episode> out(count);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
        out[static_cast<std::size_t>(i)] = generate_episode(config, seed + static_cast<std::uint64_t>(i) * 1000003u);
    }
    return out;
}

}  // namespace masn
