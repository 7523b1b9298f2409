#include "snn/model.hpp"

#include <bit>
#include <cstdint>
#include <limits>
#include <sstream>

namespace snn {

namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void fail(std::size_t layer, std::string_view type, const std::string& what)
{
    std::ostringstream os;
    os << "layer " << layer << " (" << type << "): " << what;
    throw ValidationError(os.str());
}

std::string describe_prev(const Network& net, std::size_t layer)
{
    if (layer == 0) {
        return "network input";
    }
    return "layer " + std::to_string(layer - 1) + " (" + std::string(layer_type_name(net.layers[layer - 1])) + ")";
}

} // namespace

std::string_view layer_type_name(const Layer& layer)
{
    return std::visit(overloaded{
                          [](const Conv2dSpec&) { return std::string_view("conv2d"); },
                          [](const LinearSpec&) { return std::string_view("linear"); },
                          [](const MaxPool2dSpec&) { return std::string_view("maxpool2d"); },
                          [](const LifSpec&) { return std::string_view("lif"); },
                          [](const FlattenSpec&) { return std::string_view("flatten"); },
                      },
                      layer);
}

std::size_t window_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad)
{
    const std::size_t padded = in + 2 * pad;
    if (stride == 0 || padded < kernel) {
        return 0;
    }
    return (padded - kernel) / stride + 1;
}

ShapeTrace validate(const Network& net)
{
    if (net.format_version != Network::current_format_version) {
        throw ValidationError("unsupported format_version " + std::to_string(net.format_version));
    }
    if (net.input_shape.rank() != 3) {
        throw ValidationError("input_shape must be [C,H,W], got " + net.input_shape.to_string());
    }
    if (net.num_steps == 0) {
        throw ValidationError("num_steps must be at least 1");
    }

    ShapeTrace trace;
    trace.reserve(net.layers.size());
    Shape current = net.input_shape;

    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& layer = net.layers[i];
        const std::string_view type = layer_type_name(layer);
        const auto mismatch = [&](const std::string& what) {
            fail(i, type, what + " (input from " + describe_prev(net, i) + " has shape " + current.to_string() + ")");
        };

        Shape next = std::visit(
            overloaded{
                [&](const Conv2dSpec& c) -> Shape {
                    if (c.stride[0] == 0 || c.stride[1] == 0) {
                        fail(i, type, "stride must be >= 1");
                    }
                    if (c.kernel[0] == 0 || c.kernel[1] == 0 || c.in_channels == 0 || c.out_channels == 0) {
                        fail(i, type, "kernel and channel counts must be >= 1");
                    }
                    if (c.weights.shape() != Shape{c.out_channels, c.in_channels, c.kernel[0], c.kernel[1]}) {
                        fail(i, type, "weights shape " + c.weights.shape().to_string() + " inconsistent with channels/kernel");
                    }
                    if (c.bias.shape() != Shape{c.out_channels}) {
                        fail(i, type, "bias shape " + c.bias.shape().to_string() + " inconsistent with out_channels");
                    }
                    if (current.rank() != 3) {
                        mismatch("expects a [C,H,W] input");
                    }
                    if (current[0] != c.in_channels) {
                        mismatch("expects " + std::to_string(c.in_channels) + " input channels");
                    }
                    const std::size_t h = window_output_extent(current[1], c.kernel[0], c.stride[0], c.padding[0]);
                    const std::size_t w = window_output_extent(current[2], c.kernel[1], c.stride[1], c.padding[1]);
                    if (h == 0 || w == 0) {
                        mismatch("kernel larger than padded input");
                    }
                    return Shape{c.out_channels, h, w};
                },
                [&](const LinearSpec& l) -> Shape {
                    if (l.in_features == 0 || l.out_features == 0) {
                        fail(i, type, "feature counts must be >= 1");
                    }
                    if (l.weights.shape() != Shape{l.out_features, l.in_features}) {
                        fail(i, type, "weights shape " + l.weights.shape().to_string() + " inconsistent with features");
                    }
                    if (l.bias.shape() != Shape{l.out_features}) {
                        fail(i, type, "bias shape " + l.bias.shape().to_string() + " inconsistent with out_features");
                    }
                    if (current.rank() != 1) {
                        mismatch("expects a flat input; insert a flatten layer");
                    }
                    if (current[0] != l.in_features) {
                        mismatch("in_features " + std::to_string(l.in_features) + " does not match input size");
                    }
                    return Shape{l.out_features};
                },
                [&](const MaxPool2dSpec& p) -> Shape {
                    if (p.kernel[0] == 0 || p.kernel[1] == 0 || p.stride[0] == 0 || p.stride[1] == 0) {
                        fail(i, type, "kernel and stride must be >= 1");
                    }
                    if (current.rank() != 3) {
                        mismatch("expects a [C,H,W] input");
                    }
                    const std::size_t h = window_output_extent(current[1], p.kernel[0], p.stride[0], 0);
                    const std::size_t w = window_output_extent(current[2], p.kernel[1], p.stride[1], 0);
                    if (h == 0 || w == 0) {
                        mismatch("input smaller than pooling window");
                    }
                    return Shape{current[0], h, w};
                },
                [&](const LifSpec& l) -> Shape {
                    if (!(l.beta >= 0.0f && l.beta <= 1.0f)) {
                        fail(i, type, "beta must lie in [0,1]");
                    }
                    if (!(l.threshold > 0.0f) || l.threshold == std::numeric_limits<float>::infinity()) {
                        fail(i, type, "threshold must be finite and > 0");
                    }
                    return current;
                },
                [&](const FlattenSpec&) -> Shape { return Shape{current.element_count()}; },
            },
            layer);

        trace.push_back({current, next});
        current = std::move(next);
    }

    if (!net.layers.empty() && !std::holds_alternative<LifSpec>(net.layers.back())) {
        fail(net.layers.size() - 1, layer_type_name(net.layers.back()),
             "final layer must be a lif layer (spike-count readout)");
    }
    return trace;
}

std::size_t class_count(const Network& net)
{
    const ShapeTrace trace = validate(net);
    if (trace.empty()) {
        throw ValidationError("network has no layers");
    }
    return trace.back().output.element_count();
}

bool bit_identical(const Network& a, const Network& b)
{
    if (a.format_version != b.format_version || a.input_shape != b.input_shape || a.num_steps != b.num_steps ||
        a.layers.size() != b.layers.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const Layer& la = a.layers[i];
        const Layer& lb = b.layers[i];
        if (la.index() != lb.index()) {
            return false;
        }
        const bool same = std::visit(
            overloaded{
                [&](const Conv2dSpec& c) {
                    const auto& d = std::get<Conv2dSpec>(lb);
                    return c.in_channels == d.in_channels && c.out_channels == d.out_channels && c.kernel == d.kernel &&
                           c.stride == d.stride && c.padding == d.padding && c.weights.bit_equal(d.weights) &&
                           c.bias.bit_equal(d.bias);
                },
                [&](const LinearSpec& l) {
                    const auto& d = std::get<LinearSpec>(lb);
                    return l.in_features == d.in_features && l.out_features == d.out_features &&
                           l.weights.bit_equal(d.weights) && l.bias.bit_equal(d.bias);
                },
                [&](const MaxPool2dSpec& p) { return p == std::get<MaxPool2dSpec>(lb); },
                [&](const LifSpec& l) {
                    const auto& d = std::get<LifSpec>(lb);
                    return std::bit_cast<std::uint32_t>(l.beta) == std::bit_cast<std::uint32_t>(d.beta) &&
                           std::bit_cast<std::uint32_t>(l.threshold) == std::bit_cast<std::uint32_t>(d.threshold) &&
                           l.reset == d.reset;
                },
                [&](const FlattenSpec&) { return true; },
            },
            la);
        if (!same) {
            return false;
        }
    }
    return true;
}

} // namespace snn
