#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "snn/error.hpp"

namespace snn {

/// Extents of a dense tensor, 1 to 4 dimensions, each at least 1.
class Shape {
public:
    static constexpr std::size_t max_rank = 4;

    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims);
    explicit Shape(std::vector<std::size_t> dims);

    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }

    /// Product of all extents. Zero only for a default-constructed Shape.
    std::size_t element_count() const noexcept { return count_; }

    /// Row-major strides: the last axis has stride 1.
    std::vector<std::size_t> strides() const;

    std::string to_string() const;

    friend bool operator==(const Shape&, const Shape&) = default;

private:
    std::vector<std::size_t> dims_;
    std::size_t count_ = 0;
};

/// Dense row-major float32 tensor.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape);
    static Tensor from_data(const Shape& shape, std::vector<float> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    /// Flat offset of a multi-index; throws IndexError if out of bounds.
    std::size_t offset(std::span<const std::size_t> index) const;
    std::size_t offset(std::initializer_list<std::size_t> index) const
    {
        return offset(std::span<const std::size_t>(index.begin(), index.size()));
    }

    float get(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }
    void set(std::initializer_list<std::size_t> index, float value) { data_[offset(index)] = value; }
    float get(std::span<const std::size_t> index) const { return data_[offset(index)]; }
    void set(std::span<const std::size_t> index, float value) { data_[offset(index)] = value; }

    /// Contiguous copy of slice `i` along axis 0 (e.g. one channel or one frame).
    Tensor slice0(std::size_t i) const;

    /// Value equality: same shape and identical bit patterns.
    bool bit_equal(const Tensor& other) const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Tensor(Shape shape, std::vector<float> data);

    Shape shape_;
    std::vector<float> data_;
};

} // namespace snn
