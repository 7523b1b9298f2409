#include "snn/tensor.hpp"

#include <cstring>
#include <limits>
#include <sstream>

namespace snn {

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::vector<std::size_t>(dims))
{
}

Shape::Shape(std::vector<std::size_t> dims)
    : dims_(std::move(dims))
{
    if (dims_.empty() || dims_.size() > max_rank) {
        throw ShapeError("shape must have 1 to 4 dimensions, got " + std::to_string(dims_.size()));
    }
    std::size_t count = 1;
    for (std::size_t d : dims_) {
        if (d == 0) {
            throw ShapeError("shape " + to_string() + " has a zero extent");
        }
        if (count > std::numeric_limits<std::size_t>::max() / d) {
            throw ShapeError("shape " + to_string() + " overflows the addressable range");
        }
        count *= d;
    }
    count_ = count;
}

std::vector<std::size_t> Shape::strides() const
{
    std::vector<std::size_t> s(dims_.size(), 1);
    for (std::size_t i = dims_.size(); i-- > 1;) {
        s[i - 1] = s[i] * dims_[i];
    }
    return s;
}

std::string Shape::to_string() const
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i != 0) {
            os << ',';
        }
        os << dims_[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data))
{
}

Tensor Tensor::zeros(const Shape& shape)
{
    if (shape.rank() == 0) {
        throw ShapeError("cannot build a tensor from an empty shape");
    }
    return Tensor(shape, std::vector<float>(shape.element_count(), 0.0f));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<float> data)
{
    if (shape.rank() == 0) {
        throw ShapeError("cannot build a tensor from an empty shape");
    }
    if (data.size() != shape.element_count()) {
        throw ShapeError("shape " + shape.to_string() + " needs " + std::to_string(shape.element_count()) +
                         " values, got " + std::to_string(data.size()));
    }
    return Tensor(shape, std::move(data));
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const
{
    const auto& dims = shape_.dims();
    if (index.size() != dims.size()) {
        throw IndexError("index rank " + std::to_string(index.size()) + " does not match shape " + shape_.to_string());
    }
    std::size_t flat = 0;
    for (std::size_t axis = 0; axis < dims.size(); ++axis) {
        if (index[axis] >= dims[axis]) {
            throw IndexError("index " + std::to_string(index[axis]) + " out of bounds for axis " +
                             std::to_string(axis) + " of shape " + shape_.to_string());
        }
        flat = flat * dims[axis] + index[axis];
    }
    return flat;
}

Tensor Tensor::slice0(std::size_t i) const
{
    const auto& dims = shape_.dims();
    if (dims.empty() || i >= dims[0]) {
        throw IndexError("slice " + std::to_string(i) + " out of bounds for shape " + shape_.to_string());
    }
    std::vector<std::size_t> rest(dims.begin() + 1, dims.end());
    if (rest.empty()) {
        rest.push_back(1);
    }
    Shape sub(rest);
    const std::size_t n = sub.element_count();
    std::vector<float> out(data_.begin() + static_cast<std::ptrdiff_t>(i * n),
                           data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
    return Tensor(std::move(sub), std::move(out));
}

bool Tensor::bit_equal(const Tensor& other) const noexcept
{
    return shape_ == other.shape_ && data_.size() == other.data_.size() &&
           (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
}

} // namespace snn
