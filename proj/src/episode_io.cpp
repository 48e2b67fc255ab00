#include <string>

#include "json.hpp"
#include "masn/binary_io.hpp"
#include "masn/errors.hpp"
#include "masn/features.hpp"

namespace masn {

namespace {

constexpr std::string_view kMagic = "MASNEPIS";

void write_tokens(io::ByteWriter& w, const std::vector<std::uint32_t>& tokens) {
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(tokens.size()));
    for (auto t : tokens) w.scalar<std::uint32_t>(t);
}

std::vector<std::uint32_t> read_tokens(io::ByteReader& r) {
    const auto n = r.scalar<std::uint32_t>();
    if (n > r.remaining() / sizeof(std::uint32_t)) throw TruncatedError("token list runs past end of file");
    std::vector<std::uint32_t> out(n);
    for (auto& t : out) t = r.scalar<std::uint32_t>();
    return out;
}

Tensor read_matrix(io::ByteReader& r, std::size_t rows, std::size_t cols) {
    Tensor t({rows, cols});
    r.doubles(t.data());
    return t;
}

std::size_t header_size(const nlohmann::json& h, const char* key) {
    if (!h.contains(key) || !h[key].is_number_unsigned()) {
        throw FormatError(std::string("episode header missing unsigned field '") + key + "'");
    }
    return h[key].get<std::size_t>();
}

}  // namespace

std::vector<char> encode_episodes(const Dataset& dataset) {
    const GeneratorConfig& c = dataset.config;
    const std::size_t K = c.object_count();
    nlohmann::json header = {{"format", "masn-episodes"},
                             {"version", kEpisodeFormatVersion},
                             {"T", c.frames},
                             {"N", c.objects_per_frame},
                             {"K", K},
                             {"d_in", c.feature_dim},
                             {"vocab", c.vocab},
                             {"task", to_string(c.task)},
                             {"cue", to_string(c.cue)},
                             {"count", dataset.episodes.size()},
                             {"generator", to_json(c)}};
    const std::string header_text = header.dump();

    io::ByteWriter w;
    w.bytes(kMagic);
    w.scalar<std::uint32_t>(kEpisodeFormatVersion);
    w.scalar<std::uint64_t>(header_text.size());
    w.bytes(header_text);
    for (const Episode& ep : dataset.episodes) {
        const ObjectFeatureSet& fs = ep.features;
        if (fs.frames != c.frames || fs.objects_per_frame != c.objects_per_frame ||
            fs.appearance.cols() != c.feature_dim) {
            throw ShapeInconsistencyError("episode shape differs from dataset header");
        }
        fs.validate();
        w.scalar<std::uint32_t>(static_cast<std::uint32_t>(K));
        w.doubles(fs.appearance.data());
        w.doubles(fs.motion.data());
        w.doubles(fs.boxes.data());
        for (auto f : fs.frame_index) w.scalar<std::uint32_t>(f);
        w.doubles(fs.global_appearance.data());
        w.doubles(fs.global_motion.data());

        const Question& q = ep.question;
        w.scalar<std::uint8_t>(static_cast<std::uint8_t>(q.task));
        w.scalar<std::int64_t>(q.answer);
        write_tokens(w, q.tokens);
        w.scalar<std::uint32_t>(static_cast<std::uint32_t>(q.candidates.size()));
        for (const auto& cand : q.candidates) write_tokens(w, cand);

        w.scalar<std::uint32_t>(static_cast<std::uint32_t>(ep.planted.size()));
        for (const Plant& p : ep.planted) {
            w.scalar<std::uint8_t>(static_cast<std::uint8_t>(p.stream));
            w.scalar<std::uint32_t>(p.slot);
            w.scalar<std::uint32_t>(p.pattern);
        }
    }
    return w.buffer();
}

void write_episodes(const std::string& path, const Dataset& dataset) {
    io::write_file_atomic(path, encode_episodes(dataset));
}

Dataset load_episodes(const std::string& path) {
    const std::vector<char> raw = io::read_file(path);
    if (raw.size() < kMagic.size() || std::string_view(raw.data(), kMagic.size()) != kMagic) {
        throw FormatError("format error: " + path + " is not an episode file (bad magic)");
    }
    return decode_episodes(raw);
}

Dataset decode_episodes(std::span<const char> raw) {
    io::ByteReader r(raw);
    if (raw.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
        throw FormatError("format error: not an episode file (bad magic)");
    }
    const auto version = r.scalar<std::uint32_t>();
    if (version != kEpisodeFormatVersion) {
        throw VersionError("episode file version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kEpisodeFormatVersion) + ")");
    }
    const auto header_len = r.scalar<std::uint64_t>();
    if (header_len > r.remaining()) throw TruncatedError("episode header runs past end of file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.bytes(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("format error: unreadable episode header: ") + e.what());
    }
    if (!header.is_object() || header.value("format", "") != "masn-episodes") {
        throw FormatError("format error: header is not a masn-episodes header");
    }

    Dataset ds;
    try {
        ds.config = generator_config_from_json(header.at("generator"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("format error: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("format error: ") + e.what());
    }
    const std::size_t T = header_size(header, "T");
    const std::size_t N = header_size(header, "N");
    const std::size_t K = header_size(header, "K");
    const std::size_t d_in = header_size(header, "d_in");
    const std::size_t count = header_size(header, "count");
    if (K != N * T) {
        throw ShapeInconsistencyError("shape inconsistency: declared K = " + std::to_string(K) +
                                      " but N*T = " + std::to_string(N * T));
    }
    if (T != ds.config.frames || N != ds.config.objects_per_frame || d_in != ds.config.feature_dim) {
        throw ShapeInconsistencyError("shape inconsistency: header dims disagree with generator config");
    }

    ds.episodes.reserve(count);
    for (std::size_t e = 0; e < count; ++e) {
        Episode ep;
        ObjectFeatureSet& fs = ep.features;
        const auto k_record = r.scalar<std::uint32_t>();
        if (k_record != K) {
            throw ShapeInconsistencyError("shape inconsistency: episode " + std::to_string(e) + " has " +
                                          std::to_string(k_record) + " objects, header declares " +
                                          std::to_string(K));
        }
        fs.frames = T;
        fs.objects_per_frame = N;
        fs.appearance = read_matrix(r, K, d_in);
        fs.motion = read_matrix(r, K, d_in);
        fs.boxes = read_matrix(r, K, 4);
        fs.frame_index.resize(K);
        for (auto& f : fs.frame_index) f = r.scalar<std::uint32_t>();
        fs.global_appearance = read_matrix(r, T, d_in);
        fs.global_motion = read_matrix(r, T, d_in);
        fs.validate();

        Question& q = ep.question;
        const auto task = r.scalar<std::uint8_t>();
        if (task > static_cast<std::uint8_t>(TaskKind::MultipleChoice)) throw FormatError("format error: bad task kind");
        q.task = static_cast<TaskKind>(task);
        q.answer = r.scalar<std::int64_t>();
        q.tokens = read_tokens(r);
        const auto m = r.scalar<std::uint32_t>();
        if (m > r.remaining()) throw TruncatedError("candidate list runs past end of file");
        for (std::uint32_t i = 0; i < m; ++i) q.candidates.push_back(read_tokens(r));
        q.validate(ds.config.vocab);
        if (q.task != ds.config.task) throw ShapeInconsistencyError("episode task differs from header task");

        const auto plants = r.scalar<std::uint32_t>();
        if (plants > r.remaining()) throw TruncatedError("plant list runs past end of file");
        for (std::uint32_t i = 0; i < plants; ++i) {
            Plant p;
            const auto s = r.scalar<std::uint8_t>();
            if (s > 1) throw FormatError("format error: bad stream id");
            p.stream = static_cast<Stream>(s);
            p.slot = r.scalar<std::uint32_t>();
            p.pattern = r.scalar<std::uint32_t>();
            if (p.slot >= K) throw ShapeInconsistencyError("planted slot out of range");
            ep.planted.push_back(p);
        }
        ds.episodes.push_back(std::move(ep));
    }
    if (r.remaining() != 0) throw FormatError("format error: trailing bytes after last episode");
    return ds;
}

}  // namespace masn
