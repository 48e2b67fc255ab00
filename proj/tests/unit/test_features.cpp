#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "masn/errors.hpp"
#include "masn/features.hpp"

using namespace masn;

namespace {

GeneratorConfig small(TaskKind task, CueMode cue) {
    GeneratorConfig c;
    c.frames = 2;
    c.objects_per_frame = 2;
    c.feature_dim = 6;
    c.vocab = 8;
    c.task = task;
    c.cue = cue;
    c.num_choices = 3;
    c.count_min = 1;
    c.count_max = 3;
    return c;
}

constexpr std::size_t kHeaderOffset = 8 + 4 + 8;

std::uint64_t header_len(const std::vector<char>& bytes) {
    std::uint64_t n = 0;
    std::memcpy(&n, bytes.data() + 12, sizeof n);
    return n;
}

// Replaces the JSON header of an encoded file by `edit(header)`.
std::vector<char> rewrite_header(const std::vector<char>& bytes, void (*edit)(nlohmann::json&)) {
    const std::uint64_t len = header_len(bytes);
    nlohmann::json h = nlohmann::json::parse(bytes.begin() + kHeaderOffset, bytes.begin() + kHeaderOffset + len);
    edit(h);
    const std::string text = h.dump();
    std::vector<char> out(bytes.begin(), bytes.begin() + 12);
    const std::uint64_t new_len = text.size();
    out.insert(out.end(), reinterpret_cast<const char*>(&new_len), reinterpret_cast<const char*>(&new_len) + 8);
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), bytes.begin() + kHeaderOffset + len, bytes.end());
    return out;
}

std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "masn-unit";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_CASE("generation is a pure function of config and seed") {
    GeneratorConfig c = small(TaskKind::OpenEnded, CueMode::Appearance);
    c.frames = 2;
    c.objects_per_frame = 1;
    CHECK(generate_episode(c, 0) == generate_episode(c, 0));
    CHECK_FALSE(generate_episode(c, 0) == generate_episode(c, 1));
    const auto batch = generate_episodes(c, 5, 42);
    CHECK(batch == generate_episodes(c, 5, 42));
    CHECK(batch.size() == 5);
}

TEST_CASE("generated episodes satisfy the feature-set and question invariants") {
    for (TaskKind task : {TaskKind::Count, TaskKind::OpenEnded, TaskKind::MultipleChoice}) {
        for (CueMode cue : {CueMode::Appearance, CueMode::Motion, CueMode::Mixed}) {
            const GeneratorConfig c = small(task, cue);
            for (const Episode& ep : generate_episodes(c, 20, 3)) {
                const ObjectFeatureSet& fs = ep.features;
                CHECK_NOTHROW(fs.validate());
                CHECK_NOTHROW(ep.question.validate(c.vocab));
                CHECK(fs.object_count() == 4);
                for (std::size_t k = 0; k < 4; ++k) {
                    CHECK(fs.frame_index[k] == k / 2);
                    CHECK(0.0 <= fs.boxes(k, 0));
                    CHECK(fs.boxes(k, 0) < fs.boxes(k, 2));
                    CHECK(fs.boxes(k, 2) <= 1.0);
                    CHECK(0.0 <= fs.boxes(k, 1));
                    CHECK(fs.boxes(k, 1) < fs.boxes(k, 3));
                    CHECK(fs.boxes(k, 3) <= 1.0);
                }
                CHECK(ep.question.tokens.size() >= 1);
                if (task == TaskKind::MultipleChoice) CHECK(ep.question.candidates.size() == 3);
                if (cue == CueMode::Appearance) CHECK(cue_stream(ep.question) == Stream::Appearance);
                if (cue == CueMode::Motion) CHECK(cue_stream(ep.question) == Stream::Motion);
            }
        }
    }
}

TEST_CASE("cue isolation: resampling the other stream leaves the answer unchanged") {
    for (TaskKind task : {TaskKind::Count, TaskKind::OpenEnded, TaskKind::MultipleChoice}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Episode a = generate_episode(small(task, CueMode::Appearance), seed);
            const Episode a2 = generate_episode(small(task, CueMode::Appearance), seed, {std::nullopt, seed + 1000});
            CHECK_FALSE(a.features.motion == a2.features.motion);
            CHECK(a.features.appearance == a2.features.appearance);
            CHECK(a.question == a2.question);

            const Episode m = generate_episode(small(task, CueMode::Motion), seed);
            const Episode m2 = generate_episode(small(task, CueMode::Motion), seed, {seed + 1000, std::nullopt});
            CHECK_FALSE(m.features.appearance == m2.features.appearance);
            CHECK(m.features.motion == m2.features.motion);
            CHECK(m.question == m2.question);
        }
    }
}

TEST_CASE("count answers equal a recount of the planted cue-stream prototypes") {
    for (CueMode cue : {CueMode::Motion, CueMode::Appearance, CueMode::Mixed}) {
        const GeneratorConfig c = small(TaskKind::Count, cue);
        for (const Episode& ep : generate_episodes(c, 50, 9)) {
            const Stream s = cue_stream(ep.question);
            REQUIRE(ep.question.tokens.size() == 2);
            const std::uint32_t pattern = ep.question.tokens[1] - kFirstPatternToken;
            std::int64_t recount = 0;
            for (const Plant& p : ep.planted) recount += (p.stream == s && p.pattern == pattern) ? 1 : 0;
            CHECK(recount == ep.question.answer);
            CHECK(ep.question.answer >= 1);
            CHECK(ep.question.answer <= 3);
        }
    }
}

TEST_CASE("planted prototypes are present in the object features") {
    GeneratorConfig c = small(TaskKind::OpenEnded, CueMode::Appearance);
    c.noise = 0.0;
    c.distractor_rate = 0.0;
    const Episode ep = generate_episode(c, 5);
    for (const Plant& p : ep.planted) {
        const Tensor proto = prototype(c, p.stream, p.pattern);
        const Tensor& objects = ep.features.objects(p.stream);
        for (std::size_t j = 0; j < c.feature_dim; ++j) CHECK(objects(p.slot, j) == doctest::Approx(proto[j]));
    }
    const Plant& answer_plant = ep.planted.front();
    CHECK(answer_plant.stream == Stream::Appearance);
    CHECK(static_cast<std::int64_t>(answer_plant.pattern) == ep.question.answer);
}

TEST_CASE("generator config validation and JSON") {
    GeneratorConfig c = small(TaskKind::Count, CueMode::Mixed);
    const GeneratorConfig back = generator_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));

    CHECK_THROWS_AS(generator_config_from_json(nlohmann::json{{"bogus", 1}}), ConfigError);
    GeneratorConfig bad = c;
    bad.vocab = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.frames = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.count_max = 5;  // more than N*T = 4 slots
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = small(TaskKind::MultipleChoice, CueMode::Appearance);
    bad.num_choices = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(parse_task_kind("frameqa"), ConfigError);
    CHECK(parse_cue_mode(to_string(CueMode::Mixed)) == CueMode::Mixed);
}

TEST_CASE("episode files round-trip bit-exactly") {
    for (TaskKind task : {TaskKind::Count, TaskKind::OpenEnded, TaskKind::MultipleChoice}) {
        const GeneratorConfig c = small(task, CueMode::Mixed);
        const Dataset ds{c, generate_episodes(c, 10, 77)};
        const std::string path = temp_path("roundtrip.masn");
        write_episodes(path, ds);
        const Dataset back = load_episodes(path);
        CHECK(back.episodes == ds.episodes);
        CHECK(to_json(back.config) == to_json(c));
        CHECK(encode_episodes(back) == encode_episodes(ds));
    }
    const GeneratorConfig c = small(TaskKind::OpenEnded, CueMode::Appearance);
    const Dataset empty{c, {}};
    CHECK(decode_episodes(encode_episodes(empty)).episodes.empty());
}

TEST_CASE("episode file errors are distinct") {
    const GeneratorConfig c = small(TaskKind::OpenEnded, CueMode::Appearance);
    const std::vector<char> good = encode_episodes(Dataset{c, generate_episodes(c, 3, 1)});

    std::vector<char> magic = good;
    magic[0] = 'X';
    CHECK_THROWS_AS(decode_episodes(magic), FormatError);

    std::vector<char> version = good;
    version[8] = 9;
    CHECK_THROWS_AS(decode_episodes(version), VersionError);

    const std::vector<char> truncated(good.begin(), good.end() - 5);
    CHECK_THROWS_AS(decode_episodes(truncated), TruncatedError);
    const std::vector<char> header_cut(good.begin(), good.begin() + 30);
    CHECK_THROWS_AS(decode_episodes(header_cut), TruncatedError);

    const auto bad_k = rewrite_header(good, [](nlohmann::json& h) { h["K"] = 5; });
    CHECK_THROWS_AS(decode_episodes(bad_k), ShapeInconsistencyError);

    const auto bad_json = rewrite_header(good, [](nlohmann::json& h) { h["format"] = "other"; });
    CHECK_THROWS_AS(decode_episodes(bad_json), FormatError);

    std::vector<char> trailing = good;
    trailing.push_back('\0');
    CHECK_THROWS_AS(decode_episodes(trailing), FormatError);

    CHECK_THROWS_AS(load_episodes(temp_path("does-not-exist.masn")), IoError);

    const std::string path = temp_path("magic.masn");
    {
        std::ofstream f(path, std::ios::binary);
        f << "not an episode file at all";
    }
    CHECK_THROWS_AS(load_episodes(path), FormatError);
}

TEST_CASE("feature-set validation rejects broken invariants") {
    const GeneratorConfig c = small(TaskKind::OpenEnded, CueMode::Appearance);
    Episode ep = generate_episode(c, 2);
    ObjectFeatureSet fs = ep.features;
    fs.frame_index[3] = 0;
    CHECK_THROWS_AS(fs.validate(), ShapeInconsistencyError);
    fs = ep.features;
    fs.boxes(0, 2) = fs.boxes(0, 0);
    CHECK_THROWS_AS(fs.validate(), ShapeInconsistencyError);
    fs = ep.features;
    fs.motion = Tensor({3, 6});
    CHECK_THROWS_AS(fs.validate(), ShapeInconsistencyError);

    Question q = ep.question;
    q.tokens.clear();
    CHECK_THROWS_AS(q.validate(c.vocab), ShapeInconsistencyError);
    q = ep.question;
    q.tokens = {99};
    CHECK_THROWS_AS(q.validate(c.vocab), ShapeInconsistencyError);
}
