#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "masn/real.hpp"

namespace masn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of Real. Every op in the model works on rank-2
// tensors; vectors are stored as 1xd rows.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = 0.0);
    Tensor(Shape shape, std::vector<Real> data);

    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<Real> values);
    static Tensor row(std::span<const Real> values);
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // Rank-2 views. Rank-1 tensors read as a single row.
    std::size_t rows() const;
    std::size_t cols() const;

    Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }

    std::span<Real> data() { return data_; }
    std::span<const Real> data() const { return data_; }
    std::span<Real> row_span(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const Real> row_span(std::size_t r) const {
        return {data_.data() + r * cols(), cols()};
    }

    bool all_finite() const;
    void fill(Real v);
    // this += other (same shape)
    void add_(const Tensor& other);

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<Real> data_;
};

// Throws ShapeError unless the shapes match exactly.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);
void require_rank2(const Tensor& t, const char* what);

Real max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace masn
