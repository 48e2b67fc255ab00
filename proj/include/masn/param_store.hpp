#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "masn/tensor.hpp"

namespace masn {

// One gradient tensor per parameter, index-aligned with a ParamStore.
using GradBuffer = std::vector<Tensor>;

// Trainable tensors addressed by a slash-separated path such as
// "appearance/graph/w1". Enumeration order is insertion order.
class ParamStore {
public:
    std::size_t add(std::string path, Tensor init);

    std::size_t size() const { return values_.size(); }
    bool contains(std::string_view path) const;
    std::size_t index(std::string_view path) const;
    const std::string& path(std::size_t i) const { return paths_[i]; }
    const std::vector<std::string>& paths() const { return paths_; }

    const Tensor& value(std::size_t i) const { return values_[i]; }
    Tensor& value(std::size_t i) { return values_[i]; }
    const Tensor& value(std::string_view path) const { return values_[index(path)]; }
    Tensor& value(std::string_view path) { return values_[index(path)]; }

    const Tensor& grad(std::size_t i) const { return grads_[i]; }
    Tensor& grad(std::size_t i) { return grads_[i]; }
    GradBuffer& grads() { return grads_; }
    const GradBuffer& grads() const { return grads_; }

    void zero_grad();
    GradBuffer make_grad_buffer() const;
    std::size_t element_count() const;

    // Exact equality of paths and values (gradients ignored).
    bool same_values(const ParamStore& other) const;

private:
    std::vector<std::string> paths_;
    std::vector<Tensor> values_;
    GradBuffer grads_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

}  // namespace masn
