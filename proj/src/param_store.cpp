#include "masn/param_store.hpp"

#include "masn/errors.hpp"

namespace masn {

std::size_t ParamStore::add(std::string path, Tensor init) {
    if (lookup_.count(path)) throw ConfigError("duplicate parameter path: " + path);
    if (!init.all_finite()) throw NumericError("non-finite initial value for " + path);
    const std::size_t i = values_.size();
    lookup_.emplace(path, i);
    paths_.push_back(std::move(path));
    grads_.push_back(Tensor::zeros_like(init));
    values_.push_back(std::move(init));
    return i;
}

bool ParamStore::contains(std::string_view path) const {
    return lookup_.count(std::string(path)) != 0;
}

std::size_t ParamStore::index(std::string_view path) const {
    auto it = lookup_.find(std::string(path));
    if (it == lookup_.end()) throw ConfigError("unknown parameter path: " + std::string(path));
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& g : grads_) g.fill(0.0);
}

GradBuffer ParamStore::make_grad_buffer() const {
    GradBuffer buf;
    buf.reserve(values_.size());
    for (const auto& v : values_) buf.push_back(Tensor::zeros_like(v));
    return buf;
}

std::size_t ParamStore::element_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

bool ParamStore::same_values(const ParamStore& other) const {
    return paths_ == other.paths_ && values_ == other.values_;
}

}  // namespace masn
