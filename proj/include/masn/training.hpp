#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "masn/features.hpp"
#include "masn/model.hpp"
#include "masn/param_store.hpp"

namespace masn {

struct TrainConfig {
    double learning_rate = 1e-4;
    // 0 selects the task default: 32, or 16 for multiple choice.
    std::size_t batch_size = 0;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    // Objects per frame the dataset must have.
    std::size_t objects_per_frame = 10;
    // Global-norm gradient clipping; 0 disables it.
    double clip_norm = 0.0;
    ModelConfig model;

    std::size_t effective_batch_size() const;
    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
// Keys absent from `j` keep the values already in `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct AdamOptions {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;

    static AdamState zeros_like(const ParamStore& params);
    bool operator==(const AdamState&) const = default;
};

// Bias-corrected Adam update. Advances `state.step` first. Throws
// NumericError (leaving params and state untouched) on a non-finite gradient.
void adam_step(ParamStore& params, const GradBuffer& grads, AdamState& state, const AdamOptions& options);

struct Checkpoint {
    TrainConfig config;
    ParamStore params;
    AdamState optimizer;
    std::size_t epoch = 0;
    std::string rng_state;
};

// Writes <dir>/params.bin and <dir>/manifest.json, each atomically.
void save_checkpoint(const std::string& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& dir);

struct EpochMetrics {
    std::size_t epoch = 0;
    double loss = 0.0;      // mean training loss over the epoch
    double accuracy = 0.0;  // fraction of exact predictions during the epoch
    double mse = 0.0;       // count task only, on rounded predictions

    bool operator==(const EpochMetrics&) const = default;
};

struct EvalMetrics {
    TaskKind task = TaskKind::OpenEnded;
    std::size_t n = 0;
    double accuracy = 0.0;
    double mse = 0.0;
    double loss = 0.0;
    // Mean question-guided weight per branch (appearance, motion, all).
    std::array<double, kBranchCount> mean_alpha{};
    std::array<double, kBranchCount> std_alpha{};
};

nlohmann::json to_json(const EvalMetrics& m);

struct TrainOptions {
    bool parallel = true;
    std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochMetrics> history;
    bool diverged = false;
    std::string divergence_reason;
};

// Sum of per-episode gradients over `batch`, added in ascending index order
// so the result is bit-identical for any thread count. Returns the summed
// loss; predictions are written to `predictions` when non-null.
double batch_gradients(const Model& model, const ParamStore& params, std::span<const Episode> episodes,
                       std::span<const std::size_t> batch, GradBuffer& grads, bool parallel,
                       std::vector<TaskOutput>* outputs = nullptr);

// Trains from scratch, or continues `resume` up to config.epochs. A
// non-finite loss or gradient stops training and returns the last good
// checkpoint with `diverged` set.
TrainResult train(const TrainConfig& config, const Dataset& dataset, const TrainOptions& options = {},
                  std::optional<Checkpoint> resume = std::nullopt);

EvalMetrics evaluate(const Model& model, const ParamStore& params, const Dataset& dataset, bool parallel = true);

}  // namespace masn
