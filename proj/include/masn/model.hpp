#pragma once

// Full network: per-stream location encoding, global fusion, object graph
// and VQ interaction, followed by motion-appearance fusion and a task head.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "masn/encoders.hpp"
#include "masn/features.hpp"
#include "masn/fusion.hpp"
#include "masn/heads.hpp"
#include "masn/object_graph.hpp"
#include "masn/vq_interaction.hpp"

namespace masn {

enum class FusionVariant {
    Triple,
    SingleAppearance,
    SingleMotion,
    SingleAll,
    DualAppearanceMotion,
    DualAppearanceAll,
    DualMotionAll,
    NoFusionConcat,
    AppearanceOnly,
    MotionOnly,
};

std::string to_string(FusionVariant v);
FusionVariant parse_fusion_variant(const std::string& s);
// The eight fusion ablations swept by default.
const std::vector<FusionVariant>& ablation_variants();
// Branches (appearance, motion, all) kept by a variant; all false when the
// variant bypasses centered attention.
std::array<bool, kBranchCount> active_branches(FusionVariant v);

struct ModelConfig {
    std::size_t d = 32;
    std::size_t embed_dim = 300;
    std::size_t glimpses = 4;
    std::size_t feature_dim = 16;
    std::size_t vocab = 10;
    TaskKind task = TaskKind::OpenEnded;
    std::size_t answer_classes = 8;
    CountRange count_range{1, 10};
    FusionVariant variant = FusionVariant::Triple;
    // Attention and question-guided scaling constants; 0 means "use d".
    double key_scale = 0.0;
    double fusion_scale = 0.0;

    double d_k() const { return key_scale > 0.0 ? key_scale : static_cast<double>(d); }
    double d_z() const { return fusion_scale > 0.0 ? fusion_scale : static_cast<double>(d); }
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// Fills the dataset-derived fields (d_in, vocab, task, classes, count range).
void adapt_to_dataset(ModelConfig& config, const GeneratorConfig& data);

ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

inline constexpr const char* kAppearancePrefix = "appearance";
inline constexpr const char* kMotionPrefix = "motion";

struct StreamTrace {
    Var v_local;
    Var v;
    GraphOutput graph;
};

// One question-conditioned pass (one per candidate for multiple choice).
struct QuestionTrace {
    QuestionEncoding question;
    std::array<std::optional<CrossModalState>, 2> vq;
    Var u;
    std::optional<CenteredAttention> centered;
    std::optional<QuestionGuidedFusion> fusion;
    Aggregation aggregation;
    // alpha over (appearance, motion, all); dropped branches are 0.
    std::array<Real, kBranchCount> alpha{};
};

struct ForwardResult {
    std::array<std::optional<StreamTrace>, 2> streams;
    std::vector<QuestionTrace> passes;
    TaskOutput output;
};

class Model {
public:
    explicit Model(ModelConfig config);

    const ModelConfig& config() const { return config_; }

    // Records the full forward pass for one episode on `tape`.
    ForwardResult forward(Tape& tape, const ParamStore& params, const Episode& episode) const;

    // Loss for one episode; adds its gradient into `grads` when non-null.
    Real loss(const ParamStore& params, const Episode& episode, GradBuffer* grads) const;

    TaskOutput predict(const ParamStore& params, const Episode& episode) const;

    // Throws TaskMismatchError / ShapeError if the episode cannot be fed to
    // this model.
    void check_episode(const Episode& episode) const;

private:
    StreamTrace encode_stream(Tape& tape, const ParamStore& params, const ObjectFeatureSet& fs, Stream s) const;
    QuestionTrace answer_pass(Tape& tape, const ParamStore& params, const ForwardResult& visual,
                              const std::vector<std::uint32_t>& tokens) const;

    ModelConfig config_;
};

}  // namespace masn
