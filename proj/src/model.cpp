#include "masn/model.hpp"

#include "masn/errors.hpp"

namespace masn {

using nn::join;

namespace {

struct VariantInfo {
    FusionVariant variant;
    const char* name;
    std::array<bool, kBranchCount> branches;
};

constexpr VariantInfo kVariants[] = {
    {FusionVariant::Triple, "triple", {true, true, true}},
    {FusionVariant::SingleAppearance, "single-a", {true, false, false}},
    {FusionVariant::SingleMotion, "single-m", {false, true, false}},
    {FusionVariant::SingleAll, "single-all", {false, false, true}},
    {FusionVariant::DualAppearanceMotion, "dual-am", {true, true, false}},
    {FusionVariant::DualAppearanceAll, "dual-a-all", {true, false, true}},
    {FusionVariant::DualMotionAll, "dual-m-all", {false, true, true}},
    {FusionVariant::NoFusionConcat, "no-fusion-concat", {false, false, false}},
    {FusionVariant::AppearanceOnly, "appearance-only", {false, false, false}},
    {FusionVariant::MotionOnly, "motion-only", {false, false, false}},
};

const VariantInfo& info(FusionVariant v) {
    for (const auto& i : kVariants)
        if (i.variant == v) return i;
    throw ConfigError("unknown fusion variant");
}

bool uses_stream(FusionVariant v, Stream s) {
    if (v == FusionVariant::AppearanceOnly) return s == Stream::Appearance;
    if (v == FusionVariant::MotionOnly) return s == Stream::Motion;
    return true;
}

const char* stream_prefix(Stream s) { return s == Stream::Appearance ? kAppearancePrefix : kMotionPrefix; }

}  // namespace

std::string to_string(FusionVariant v) { return info(v).name; }

FusionVariant parse_fusion_variant(const std::string& s) {
    for (const auto& i : kVariants)
        if (s == i.name) return i.variant;
    throw ConfigError("unknown fusion variant: " + s);
}

const std::vector<FusionVariant>& ablation_variants() {
    static const std::vector<FusionVariant> v = {
        FusionVariant::Triple,           FusionVariant::SingleAppearance,     FusionVariant::SingleMotion,
        FusionVariant::SingleAll,        FusionVariant::DualAppearanceMotion, FusionVariant::DualAppearanceAll,
        FusionVariant::DualMotionAll,    FusionVariant::NoFusionConcat};
    return v;
}

std::array<bool, kBranchCount> active_branches(FusionVariant v) { return info(v).branches; }

void ModelConfig::validate() const {
    if (d < 2 || d % 2 != 0) throw ConfigError("model: d must be even and at least 2");
    if (embed_dim < 1 || feature_dim < 1) throw ConfigError("model: embed_dim and feature_dim must be positive");
    if (vocab < 1) throw ConfigError("model: vocab must be positive");
    if (task == TaskKind::OpenEnded && answer_classes < 2) throw ConfigError("model: need at least 2 answer classes");
    if (count_range.min > count_range.max) throw ConfigError("model: empty count range");
    if (key_scale < 0.0 || fusion_scale < 0.0) throw ConfigError("model: scaling constants must be >= 0");
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"d", c.d},
            {"embed_dim", c.embed_dim},
            {"glimpses", c.glimpses},
            {"feature_dim", c.feature_dim},
            {"vocab", c.vocab},
            {"task", to_string(c.task)},
            {"answer_classes", c.answer_classes},
            {"count_min", c.count_range.min},
            {"count_max", c.count_range.max},
            {"variant", to_string(c.variant)},
            {"key_scale", c.key_scale},
            {"fusion_scale", c.fusion_scale}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    ModelConfig c;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "d") c.d = value.get<std::size_t>();
            else if (key == "embed_dim") c.embed_dim = value.get<std::size_t>();
            else if (key == "glimpses") c.glimpses = value.get<std::size_t>();
            else if (key == "feature_dim") c.feature_dim = value.get<std::size_t>();
            else if (key == "vocab") c.vocab = value.get<std::size_t>();
            else if (key == "task") c.task = parse_task_kind(value.get<std::string>());
            else if (key == "answer_classes") c.answer_classes = value.get<std::size_t>();
            else if (key == "count_min") c.count_range.min = value.get<std::int64_t>();
            else if (key == "count_max") c.count_range.max = value.get<std::int64_t>();
            else if (key == "variant") c.variant = parse_fusion_variant(value.get<std::string>());
            else if (key == "key_scale") c.key_scale = value.get<double>();
            else if (key == "fusion_scale") c.fusion_scale = value.get<double>();
            else throw ConfigError("unknown model config key: " + key);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("model config key '" + key + "': " + e.what());
        }
    }
    return c;
}

void adapt_to_dataset(ModelConfig& config, const GeneratorConfig& data) {
    config.feature_dim = data.feature_dim;
    config.vocab = data.vocab;
    config.task = data.task;
    config.answer_classes = data.answer_classes();
    config.count_range = {static_cast<std::int64_t>(data.count_min), static_cast<std::int64_t>(data.count_max)};
}

ParamStore init_params(const ModelConfig& c, std::uint64_t seed) {
    c.validate();
    ParamStore store;
    nn::Initializer init(seed);
    QuestionWeights::add(store, "question", c.vocab, c.embed_dim, c.d, init);
    for (Stream s : {Stream::Appearance, Stream::Motion}) {
        const std::string prefix = stream_prefix(s);
        StreamEncoderWeights::add(store, join(prefix, "encoder"), c.feature_dim, c.d, init);
        GraphWeights::add(store, join(prefix, "graph"), c.d, init);
        add_glimpses(store, join(prefix, "vq"), c.glimpses, c.d, init);
    }
    FusionWeights::add(store, "fusion", c.d, init);
    const std::size_t outputs = c.task == TaskKind::OpenEnded ? c.answer_classes : 1;
    nn::Linear::add(store, "head", c.d, outputs, init);
    return store;
}

Model::Model(ModelConfig config) : config_(std::move(config)) { config_.validate(); }

void Model::check_episode(const Episode& episode) const {
    const ObjectFeatureSet& fs = episode.features;
    fs.validate();
    if (fs.appearance.cols() != config_.feature_dim) {
        throw ShapeError("episode feature width " + std::to_string(fs.appearance.cols()) +
                         " does not match model d_in " + std::to_string(config_.feature_dim));
    }
    const Question& q = episode.question;
    if (q.task != config_.task) {
        throw TaskMismatchError("episode task " + to_string(q.task) + " but model task " + to_string(config_.task));
    }
    q.validate(config_.vocab);
    if (q.task == TaskKind::OpenEnded && static_cast<std::size_t>(q.answer) >= config_.answer_classes) {
        throw ShapeError("answer class outside the model's answer set");
    }
}

StreamTrace Model::encode_stream(Tape& tape, const ParamStore& params, const ObjectFeatureSet& fs,
                                 Stream s) const {
    const std::string prefix = stream_prefix(s);
    const auto enc = StreamEncoderWeights::bind(tape, params, join(prefix, "encoder"));
    const auto graph = GraphWeights::bind(tape, params, join(prefix, "graph"));
    StreamTrace t;
    t.v_local = encode_location(enc, tape.constant(fs.objects(s)), tape.constant(fs.boxes), fs.frame_index, config_.d);
    t.v = fuse_global(enc, t.v_local, tape.constant(fs.global(s)), fs.frame_index);
    t.graph = run_object_graph(graph, t.v);
    return t;
}

QuestionTrace Model::answer_pass(Tape& tape, const ParamStore& params, const ForwardResult& visual,
                                 const std::vector<std::uint32_t>& tokens) const {
    QuestionTrace qt;
    qt.question = encode_question(QuestionWeights::bind(tape, params, "question"), tokens);
    for (Stream s : {Stream::Appearance, Stream::Motion}) {
        const auto& stream = visual.streams[static_cast<std::size_t>(s)];
        if (!stream) continue;
        const auto glimpses = bind_glimpses(tape, params, join(stream_prefix(s), "vq"), config_.glimpses);
        qt.vq[static_cast<std::size_t>(s)] = vq_interact(qt.question.word_features, stream->graph.features, glimpses);
    }

    const FusionVariant variant = config_.variant;
    const auto branches = active_branches(variant);
    const FusionWeights fw = FusionWeights::bind(tape, params, "fusion", branches);
    if (variant == FusionVariant::AppearanceOnly || variant == FusionVariant::MotionOnly) {
        const std::size_t s = variant == FusionVariant::AppearanceOnly ? 0 : 1;
        qt.u = qt.vq[s]->h;
        qt.aggregation = aggregate(qt.u, fw.score);
        return qt;
    }
    Var h_a = qt.vq[0]->h;
    Var h_m = qt.vq[1]->h;
    qt.u = stack_streams(h_a, h_m);
    if (variant == FusionVariant::NoFusionConcat) {
        qt.aggregation = aggregate(qt.u, fw.score);
        return qt;
    }
    qt.centered = centered_attention(qt.u, h_a, h_m, fw, config_.d_k(), branches);
    std::vector<Var> kept;
    std::vector<std::size_t> kept_index;
    for (std::size_t b = 0; b < kBranchCount; ++b) {
        if (!branches[b]) continue;
        kept.push_back(qt.centered->z[b]);
        kept_index.push_back(b);
    }
    qt.fusion = question_guided_fuse(kept, qt.question.context, fw, config_.d_z());
    for (std::size_t k = 0; k < kept_index.size(); ++k) qt.alpha[kept_index[k]] = qt.fusion->alpha.value()[k];
    qt.aggregation = aggregate(qt.fusion->o, fw.score);
    return qt;
}

ForwardResult Model::forward(Tape& tape, const ParamStore& params, const Episode& episode) const {
    check_episode(episode);
    ForwardResult r;
    for (Stream s : {Stream::Appearance, Stream::Motion}) {
        if (uses_stream(config_.variant, s)) {
            r.streams[static_cast<std::size_t>(s)] = encode_stream(tape, params, episode.features, s);
        }
    }
    const Question& q = episode.question;
    const nn::Linear head = nn::Linear::bind(tape, params, "head");
    switch (q.task) {
        case TaskKind::Count:
            r.passes.push_back(answer_pass(tape, params, r, q.tokens));
            r.output = count_head(r.passes[0].aggregation.f, q.answer, head, config_.count_range);
            break;
        case TaskKind::OpenEnded:
            r.passes.push_back(answer_pass(tape, params, r, q.tokens));
            r.output = open_ended_head(r.passes[0].aggregation.f, static_cast<std::size_t>(q.answer), head);
            break;
        case TaskKind::MultipleChoice: {
            std::vector<Var> fs;
            for (const auto& cand : q.candidates) {
                std::vector<std::uint32_t> tokens = q.tokens;
                tokens.insert(tokens.end(), cand.begin(), cand.end());
                r.passes.push_back(answer_pass(tape, params, r, tokens));
                fs.push_back(r.passes.back().aggregation.f);
            }
            r.output = multichoice_head(fs, static_cast<std::size_t>(q.answer), head);
            break;
        }
    }
    return r;
}

Real Model::loss(const ParamStore& params, const Episode& episode, GradBuffer* grads) const {
    Tape tape;
    ForwardResult r = forward(tape, params, episode);
    if (grads) tape.backward(r.output.loss, *grads);
    return r.output.loss.value()[0];
}

TaskOutput Model::predict(const ParamStore& params, const Episode& episode) const {
    Tape tape;
    return forward(tape, params, episode).output;
}

}  // namespace masn
