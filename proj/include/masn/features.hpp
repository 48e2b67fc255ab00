#pragma once

// Synthetic stand-in for extracted video features. Each episode carries
// appearance and motion object sets over T frames with N objects per frame,
// per-frame global features, and a question whose answer is a function of
// prototype vectors planted into chosen object slots.
//
// Token layout: 0 asks about appearance, 1 asks about motion, and token
// 2 + p names prototype p. There are vocab - 2 prototypes per stream.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "masn/tensor.hpp"

namespace masn {

enum class TaskKind { Count, OpenEnded, MultipleChoice };
enum class CueMode { Appearance, Motion, Mixed };
enum class Stream : std::uint8_t { Appearance = 0, Motion = 1 };

std::string to_string(TaskKind kind);
std::string to_string(CueMode mode);
TaskKind parse_task_kind(const std::string& s);
CueMode parse_cue_mode(const std::string& s);

inline constexpr std::uint32_t kAskAppearanceToken = 0;
inline constexpr std::uint32_t kAskMotionToken = 1;
inline constexpr std::uint32_t kFirstPatternToken = 2;

struct GeneratorConfig {
    std::size_t frames = 4;             // T
    std::size_t objects_per_frame = 2;  // N
    std::size_t feature_dim = 16;       // d_in
    std::size_t vocab = 10;
    CueMode cue = CueMode::Appearance;
    TaskKind task = TaskKind::OpenEnded;
    std::size_t num_choices = 5;  // M, multiple choice only
    std::size_t count_min = 1;
    std::size_t count_max = 4;
    double noise = 0.5;
    // Probability that a non-answer slot carries a distractor prototype.
    double distractor_rate = 0.3;
    // Prototypes are shared by every episode generated from one config.
    std::uint64_t prototype_seed = 20211;

    std::size_t object_count() const { return frames * objects_per_frame; }
    std::size_t pattern_count() const { return vocab >= 2 ? vocab - 2 : 0; }
    // Output classes of the open-ended task.
    std::size_t answer_classes() const { return pattern_count(); }

    void validate() const;
};

nlohmann::json to_json(const GeneratorConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
GeneratorConfig generator_config_from_json(const nlohmann::json& j);

struct ObjectFeatureSet {
    std::size_t frames = 0;             // T
    std::size_t objects_per_frame = 0;  // N
    Tensor appearance;                  // K x d_in
    Tensor motion;                      // K x d_in
    Tensor boxes;                       // K x 4, normalized (x1, y1, x2, y2)
    std::vector<std::uint32_t> frame_index;  // K
    Tensor global_appearance;                // T x d_in
    Tensor global_motion;                    // T x d_in

    std::size_t object_count() const { return frames * objects_per_frame; }
    const Tensor& objects(Stream s) const { return s == Stream::Appearance ? appearance : motion; }
    const Tensor& global(Stream s) const {
        return s == Stream::Appearance ? global_appearance : global_motion;
    }

    // Throws ShapeInconsistencyError on any broken invariant.
    void validate() const;
    bool operator==(const ObjectFeatureSet&) const = default;
};

struct Question {
    std::vector<std::uint32_t> tokens;
    TaskKind task = TaskKind::OpenEnded;
    // Count value, answer class, or index of the correct candidate.
    std::int64_t answer = 0;
    std::vector<std::vector<std::uint32_t>> candidates;

    void validate(std::size_t vocab) const;
    bool operator==(const Question&) const = default;
};

// Generator-side record of one planted prototype.
struct Plant {
    Stream stream = Stream::Appearance;
    std::uint32_t slot = 0;
    std::uint32_t pattern = 0;
    bool operator==(const Plant&) const = default;
};

struct Episode {
    ObjectFeatureSet features;
    Question question;
    std::vector<Plant> planted;
    bool operator==(const Episode&) const = default;
};

// Independent random substreams of one episode. Overriding a stream seed
// redraws that stream's noise and distractors but leaves everything the
// answer depends on untouched when the stream is not the cue.
struct StreamSeedOverride {
    std::optional<std::uint64_t> appearance;
    std::optional<std::uint64_t> motion;
};

Episode generate_episode(const GeneratorConfig& config, std::uint64_t seed,
                         const StreamSeedOverride& override_seeds = {});

std::vector<Episode> generate_episodes(const GeneratorConfig& config, std::size_t count,
                                       std::uint64_t seed);

// Prototype p of stream s under `config` (1 x d_in).
Tensor prototype(const GeneratorConfig& config, Stream s, std::size_t p);

// Stream whose planted prototypes determine the answer of this question.
Stream cue_stream(const Question& q);

struct Dataset {
    GeneratorConfig config;
    std::vector<Episode> episodes;
};

inline constexpr std::uint32_t kEpisodeFormatVersion = 1;

// Little-endian binary container with a JSON header; written atomically.
void write_episodes(const std::string& path, const Dataset& dataset);
// Throws FormatError, VersionError, TruncatedError or ShapeInconsistencyError.
Dataset load_episodes(const std::string& path);
// The same encoding held in memory.
std::vector<char> encode_episodes(const Dataset& dataset);
Dataset decode_episodes(std::span<const char> bytes);

}  // namespace masn
