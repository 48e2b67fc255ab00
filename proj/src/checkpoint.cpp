#include <filesystem>
#include <fstream>
#include <sstream>

#include "masn/binary_io.hpp"
#include "masn/errors.hpp"
#include "masn/training.hpp"

namespace masn {

namespace {

constexpr char kMagic[] = "MASNCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

void write_tensor(io::ByteWriter& w, const Tensor& t) {
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t dim : t.shape()) w.scalar<std::uint64_t>(dim);
    w.doubles(t.data());
}

Tensor read_tensor(io::ByteReader& r, const Shape& expected, const std::string& what) {
    const auto rank = r.scalar<std::uint32_t>();
    Shape shape(rank);
    for (auto& dim : shape) dim = static_cast<std::size_t>(r.scalar<std::uint64_t>());
    if (shape != expected) {
        throw ShapeInconsistencyError("checkpoint " + what + " has shape " + shape_str(shape) + ", manifest says " +
                                      shape_str(expected));
    }
    Tensor t(shape, 0.0);
    r.doubles(t.data());
    return t;
}

}  // namespace

void save_checkpoint(const std::string& dir, const Checkpoint& ck) {
    std::filesystem::create_directories(dir);
    const ParamStore& p = ck.params;
    if (ck.optimizer.m.size() != p.size() || ck.optimizer.v.size() != p.size()) {
        throw ShapeError("save_checkpoint: optimizer state not aligned with parameters");
    }
    io::ByteWriter w;
    w.bytes(std::string_view(kMagic, 8));
    w.scalar<std::uint32_t>(kCheckpointVersion);
    w.scalar<std::uint64_t>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        write_tensor(w, p.value(i));
        write_tensor(w, ck.optimizer.m[i]);
        write_tensor(w, ck.optimizer.v[i]);
    }
    io::write_file_atomic(dir + "/params.bin", w.buffer());

    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < p.size(); ++i) params.push_back({{"path", p.path(i)}, {"shape", p.value(i).shape()}});
    const nlohmann::json manifest = {{"format", "masn-checkpoint"},
                                     {"version", kCheckpointVersion},
                                     {"config", to_json(ck.config)},
                                     {"epoch", ck.epoch},
                                     {"adam_step", ck.optimizer.step},
                                     {"rng_state", ck.rng_state},
                                     {"parameter_count", p.element_count()},
                                     {"params", params}};
    io::write_text_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
    nlohmann::json manifest;
    {
        const std::vector<char> text = io::read_file(dir + "/manifest.json");
        try {
            manifest = nlohmann::json::parse(text.begin(), text.end());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("unreadable checkpoint manifest: ") + e.what());
        }
    }
    if (!manifest.is_object() || manifest.value("format", "") != "masn-checkpoint") {
        throw FormatError("format error: " + dir + " does not hold a masn checkpoint");
    }
    Checkpoint ck;
    std::vector<std::pair<std::string, Shape>> entries;
    try {
        const auto version = manifest.at("version").get<std::uint32_t>();
        if (version != kCheckpointVersion) {
            throw VersionError("checkpoint version " + std::to_string(version) + " is not supported");
        }
        ck.config = train_config_from_json(manifest.at("config"));
        ck.epoch = manifest.at("epoch").get<std::size_t>();
        ck.optimizer.step = manifest.at("adam_step").get<std::uint64_t>();
        ck.rng_state = manifest.at("rng_state").get<std::string>();
        for (const auto& e : manifest.at("params")) {
            entries.emplace_back(e.at("path").get<std::string>(), e.at("shape").get<Shape>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }

    const std::vector<char> data = io::read_file(dir + "/params.bin");
    io::ByteReader r(data);
    if (r.bytes(8) != std::string_view(kMagic, 8)) throw FormatError("format error: bad checkpoint magic");
    const auto version = r.scalar<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw VersionError("checkpoint blob version " + std::to_string(version) + " is not supported");
    }
    const auto count = r.scalar<std::uint64_t>();
    if (count != entries.size()) {
        throw ShapeInconsistencyError("checkpoint blob holds " + std::to_string(count) + " tensors, manifest lists " +
                                      std::to_string(entries.size()));
    }
    for (const auto& [path, shape] : entries) {
        ck.params.add(path, read_tensor(r, shape, path));
        ck.optimizer.m.push_back(read_tensor(r, shape, path + " (first moment)"));
        ck.optimizer.v.push_back(read_tensor(r, shape, path + " (second moment)"));
    }
    if (r.remaining() != 0) throw FormatError("format error: trailing bytes in checkpoint blob");
    return ck;
}

}  // namespace masn
