#pragma once

// Building blocks behind the `masn` command line: the tiny gradient-check
// profile, ablation sweeps, attention export and run manifests.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "masn/grad_check.hpp"
#include "masn/model.hpp"
#include "masn/training.hpp"

namespace masn::harness {

// Smallest full model used for finite-difference checking.
struct TinyProfile {
    std::size_t d = 8;
    std::size_t embed_dim = 8;
    std::size_t frames = 2;
    std::size_t objects_per_frame = 2;
    std::size_t question_len = 3;
    std::size_t glimpses = 2;
    std::size_t feature_dim = 6;
    std::size_t vocab = 6;
    TaskKind task = TaskKind::OpenEnded;
    FusionVariant variant = FusionVariant::Triple;
    std::uint64_t seed = 1;
};

GeneratorConfig tiny_generator(const TinyProfile& p);
ModelConfig tiny_model(const TinyProfile& p);
// A generated episode whose question is re-drawn to exactly question_len tokens.
Episode tiny_episode(const TinyProfile& p);

// Precision of the forward passes behind the central differences.
enum class NumericPrecision { Double, Extended };

// Every parameter path of the full model on the tiny episode. With
// `inject_bug` the analytic gradients are doubled, which must fail.
GradCheckReport gradcheck_model(const TinyProfile& p, const GradCheckOptions& options, bool inject_bug = false,
                                NumericPrecision precision = NumericPrecision::Extended);
// Count head alone on a fixed feature vector: a quadratic in (w, b).
GradCheckReport gradcheck_head_only(const TinyProfile& p, const GradCheckOptions& options, bool inject_bug = false);

std::string format_gradcheck(const GradCheckReport& report, double tolerance);
nlohmann::json to_json(const GradCheckReport& report, double tolerance);

// Accuracy for classification tasks, mean squared error for count.
double headline_metric(const EvalMetrics& m);
bool higher_is_better(TaskKind task);

struct AblationRow {
    FusionVariant variant = FusionVariant::Triple;
    EvalMetrics metrics;
    std::vector<EpochMetrics> history;
    bool diverged = false;
};

struct AblationReport {
    TaskKind task = TaskKind::OpenEnded;
    std::uint64_t seed = 0;
    std::vector<AblationRow> rows;
};

// Trains and evaluates each variant from the same seed on the same data.
AblationReport run_ablation(const TrainConfig& base, const Dataset& train_data, const Dataset& eval_data,
                            const std::vector<FusionVariant>& variants, bool parallel = true);

nlohmann::json to_json(const AblationReport& report);
// Aligned plain-text table, one row per variant, followed by the trend line.
std::string format_table(const AblationReport& report);

// Attention maps, adjacency, fusion scores, alpha and beta for one episode.
nlohmann::json dump_attention(const Model& model, const ParamStore& params, const Episode& episode,
                              bool log_scaled);

// Directory named by MASN_OUTPUT_ROOT, or "masn-out" when unset.
std::string output_root();
// Relative paths are placed under `root`; absolute paths are kept.
std::string resolve_output(const std::string& root, const std::string& path);

// FNV-1a over the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);
std::string utc_timestamp();

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::string started;
    std::string finished;
    std::vector<std::string> outputs;
    nlohmann::json metrics = nlohmann::json::object();
    std::string status = "ok";
    std::string error;
};

nlohmann::json to_json(const RunManifest& m);
// Appends one line to <root>/runs.jsonl.
void append_manifest(const std::string& root, const RunManifest& m);

}  // namespace masn::harness
