#include "masn/extended_oracle.hpp"

#include <type_traits>

#include "masn/errors.hpp"
#include "masn/model.hpp"

static_assert(std::is_same_v<masn::Real, long double>, "build this file with MASN_EXTENDED_PRECISION");

namespace masn_extended {

struct ModelLossOracle::Impl {
    masn::Model model;
    masn::ParamStore params;
    masn::Episode episode;
};

ModelLossOracle::ModelLossOracle(const nlohmann::json& model_config, std::span<const char> episode_file,
                                 const std::vector<ParamData>& params) {
    masn::Dataset ds = masn::decode_episodes(episode_file);
    if (ds.episodes.size() != 1) throw masn::ConfigError("loss oracle expects exactly one episode");
    masn::ParamStore store;
    for (const auto& p : params) {
        store.add(p.path, masn::Tensor(p.shape, std::vector<masn::Real>(p.values.begin(), p.values.end())));
    }
    impl_ = std::make_unique<Impl>(Impl{masn::Model(masn::model_config_from_json(model_config)), std::move(store),
                                        std::move(ds.episodes[0])});
}

ModelLossOracle::~ModelLossOracle() = default;
ModelLossOracle::ModelLossOracle(ModelLossOracle&&) noexcept = default;
ModelLossOracle& ModelLossOracle::operator=(ModelLossOracle&&) noexcept = default;

long double ModelLossOracle::loss(std::size_t param, std::size_t entry, long double delta) {
    masn::Tensor& value = impl_->params.value(param);
    const long double saved = value[entry];
    value[entry] = saved + delta;
    const long double l = impl_->model.loss(impl_->params, impl_->episode, nullptr);
    value[entry] = saved;
    return l;
}

}  // namespace masn_extended
