#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

using Pair = std::array<std::size_t, 2>;

struct Conv2dSpec {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    Pair kernel{1, 1};
    Pair stride{1, 1};
    Pair padding{0, 0};
    Tensor weights;  // [out, in, kh, kw]
    Tensor bias;     // [out]

    friend bool operator==(const Conv2dSpec&, const Conv2dSpec&) = default;
};

struct LinearSpec {
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    Tensor weights;  // [out, in]
    Tensor bias;     // [out]

    friend bool operator==(const LinearSpec&, const LinearSpec&) = default;
};

struct MaxPool2dSpec {
    Pair kernel{2, 2};
    Pair stride{2, 2};

    friend bool operator==(const MaxPool2dSpec&, const MaxPool2dSpec&) = default;
};

enum class ResetMode { subtract, zero };

struct LifSpec {
    float beta = 0.5f;
    float threshold = 1.0f;
    ResetMode reset = ResetMode::subtract;

    friend bool operator==(const LifSpec&, const LifSpec&) = default;
};

struct FlattenSpec {
    friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};

using Layer = std::variant<Conv2dSpec, LinearSpec, MaxPool2dSpec, LifSpec, FlattenSpec>;

/// Schema name of a layer ("conv2d", "linear", ...).
std::string_view layer_type_name(const Layer& layer);

struct Network {
    static constexpr int current_format_version = 1;

    int format_version = current_format_version;
    Shape input_shape;  // [C, H, W]
    std::size_t num_steps = 1;
    std::vector<Layer> layers;

    friend bool operator==(const Network&, const Network&) = default;
};

struct LayerShapes {
    Shape input;
    Shape output;
};

using ShapeTrace = std::vector<LayerShapes>;

/// Runs shape inference over the layer stack. Throws ValidationError naming
/// the first layer whose input does not compose with its predecessor.
ShapeTrace validate(const Network& net);

/// Number of output classes, i.e. the neuron count of the final LIF layer.
std::size_t class_count(const Network& net);

// Output extent of a sliding window along one axis; 0 if the window does not fit.
std::size_t window_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Parses a model document. Throws ParseError, SchemaError or ValidationError.
Network load_model(std::string_view text);
Network load_model_file(const std::string& path);

/// Serializes with the shortest decimal form of every float, so the output
/// reloads bit-exactly and reserializes byte-for-byte.
std::string save_model(const Network& net);
void save_model_file(const Network& net, const std::string& path);

/// Bitwise comparison of two networks, weights included.
bool bit_identical(const Network& a, const Network& b);

} // namespace snn
