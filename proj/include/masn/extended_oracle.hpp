#pragma once

// The full model's loss evaluated in long double. It is the numeric side of
// whole-model gradient checks: at eps = 1e-5, double rounding of an O(1) loss
// leaves about 1e-11 of noise in each central difference, which swamps
// gradient entries near 1e-7. The extended build of the library lives in a
// separate namespace, so only plain types cross this interface.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace masn_extended {

struct ParamData {
    std::string path;
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

class ModelLossOracle {
public:
    // `episode_file` is a one-episode dataset in the episode file encoding.
    ModelLossOracle(const nlohmann::json& model_config, std::span<const char> episode_file,
                    const std::vector<ParamData>& params);
    ~ModelLossOracle();
    ModelLossOracle(ModelLossOracle&&) noexcept;
    ModelLossOracle& operator=(ModelLossOracle&&) noexcept;

    // Loss with entry `entry` of parameter `param` shifted by `delta`.
    long double loss(std::size_t param, std::size_t entry, long double delta);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace masn_extended
