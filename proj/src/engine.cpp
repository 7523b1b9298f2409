#include "snn/engine.hpp"

#include <algorithm>
#include <chrono>

namespace snn {

namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_size(std::size_t got, std::size_t want, const char* what)
{
    if (got != want) {
        throw ShapeError(std::string(what) + ": expected " + std::to_string(want) + " elements, got " +
                         std::to_string(got));
    }
}

// Range of output positions o with 0 <= o*stride + offset < extent.
std::pair<std::ptrdiff_t, std::ptrdiff_t> valid_range(std::ptrdiff_t out_extent, std::ptrdiff_t stride,
                                                      std::ptrdiff_t offset, std::ptrdiff_t extent)
{
    std::ptrdiff_t lo = 0;
    if (offset < 0) {
        lo = (-offset + stride - 1) / stride;
    }
    std::ptrdiff_t hi = out_extent;
    if (extent - offset <= 0) {
        hi = 0;
    } else {
        hi = std::min(out_extent, (extent - offset - 1) / stride + 1);
    }
    return {lo, std::max(lo, hi)};
}

} // namespace

void LifState::reset()
{
    std::fill(membrane.begin(), membrane.end(), 0.0f);
    std::fill(spikes.begin(), spikes.end(), 0.0f);
}

void lif_step(const LifSpec& spec, LifState& state, std::span<const float> current)
{
    require_size(current.size(), state.size(), "lif input current");
    const float beta = spec.beta;
    const float theta = spec.threshold;
    float* u = state.membrane.data();
    float* s = state.spikes.data();
    const std::size_t n = state.size();

    if (spec.reset == ResetMode::subtract) {
        for (std::size_t i = 0; i < n; ++i) {
            float v = beta * u[i] + current[i];
            if (s[i] != 0.0f) {
                v -= theta;
            }
            u[i] = v;
            s[i] = v > theta ? 1.0f : 0.0f;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const float v = (s[i] != 0.0f ? 0.0f : beta * u[i]) + current[i];
            u[i] = v;
            s[i] = v > theta ? 1.0f : 0.0f;
        }
    }
}

void conv2d_forward(const Conv2dSpec& spec, const Shape& in_shape, std::span<const float> in, std::span<float> out)
{
    if (in_shape.rank() != 3 || in_shape[0] != spec.in_channels) {
        throw ShapeError("conv2d expects " + std::to_string(spec.in_channels) + " input channels, got shape " +
                         in_shape.to_string());
    }
    const std::size_t channels = in_shape[0];
    const std::size_t h = in_shape[1];
    const std::size_t w = in_shape[2];
    const std::size_t kh = spec.kernel[0];
    const std::size_t kw = spec.kernel[1];
    const std::size_t ho = window_output_extent(h, kh, spec.stride[0], spec.padding[0]);
    const std::size_t wo = window_output_extent(w, kw, spec.stride[1], spec.padding[1]);
    if (ho == 0 || wo == 0) {
        throw ShapeError("conv2d kernel larger than padded input " + in_shape.to_string());
    }
    require_size(in.size(), in_shape.element_count(), "conv2d input");
    require_size(out.size(), spec.out_channels * ho * wo, "conv2d output");

    const auto sh = static_cast<std::ptrdiff_t>(spec.stride[0]);
    const auto sw = static_cast<std::ptrdiff_t>(spec.stride[1]);
    const auto ph = static_cast<std::ptrdiff_t>(spec.padding[0]);
    const auto pw = static_cast<std::ptrdiff_t>(spec.padding[1]);
    const auto weights = spec.weights.data();
    const auto bias = spec.bias.data();

    // Accumulation order per output element is (c, i, j), matching the
    // textbook sum, so removing an all-zero input channel leaves results bit-identical.
    for (std::size_t o = 0; o < spec.out_channels; ++o) {
        float* plane = out.data() + o * ho * wo;
        std::fill(plane, plane + ho * wo, bias[o]);
        for (std::size_t c = 0; c < channels; ++c) {
            const float* src = in.data() + c * h * w;
            for (std::size_t i = 0; i < kh; ++i) {
                const auto [y0, y1] = valid_range(static_cast<std::ptrdiff_t>(ho), sh,
                                                  static_cast<std::ptrdiff_t>(i) - ph, static_cast<std::ptrdiff_t>(h));
                for (std::size_t j = 0; j < kw; ++j) {
                    const float wt = weights[((o * channels + c) * kh + i) * kw + j];
                    const std::ptrdiff_t xoff = static_cast<std::ptrdiff_t>(j) - pw;
                    const auto [x0, x1] = valid_range(static_cast<std::ptrdiff_t>(wo), sw, xoff,
                                                      static_cast<std::ptrdiff_t>(w));
                    for (std::ptrdiff_t y = y0; y < y1; ++y) {
                        const float* row = src + (y * sh + static_cast<std::ptrdiff_t>(i) - ph) * static_cast<std::ptrdiff_t>(w);
                        float* dst = plane + y * static_cast<std::ptrdiff_t>(wo);
                        if (sw == 1) {
                            for (std::ptrdiff_t x = x0; x < x1; ++x) {
                                dst[x] += wt * row[x + xoff];
                            }
                        } else {
                            for (std::ptrdiff_t x = x0; x < x1; ++x) {
                                dst[x] += wt * row[x * sw + xoff];
                            }
                        }
                    }
                }
            }
        }
    }
}

void linear_forward(const LinearSpec& spec, std::span<const float> in, std::span<float> out)
{
    require_size(in.size(), spec.in_features, "linear input");
    require_size(out.size(), spec.out_features, "linear output");
    const auto weights = spec.weights.data();
    const auto bias = spec.bias.data();
    for (std::size_t o = 0; o < spec.out_features; ++o) {
        const float* row = weights.data() + o * spec.in_features;
        float acc = bias[o];
        for (std::size_t i = 0; i < spec.in_features; ++i) {
            acc += row[i] * in[i];
        }
        out[o] = acc;
    }
}

void maxpool_forward(const MaxPool2dSpec& spec, const Shape& in_shape, std::span<const float> in, std::span<float> out)
{
    if (in_shape.rank() != 3) {
        throw ShapeError("maxpool2d expects a [C,H,W] input, got " + in_shape.to_string());
    }
    const std::size_t channels = in_shape[0];
    const std::size_t h = in_shape[1];
    const std::size_t w = in_shape[2];
    const std::size_t ho = window_output_extent(h, spec.kernel[0], spec.stride[0], 0);
    const std::size_t wo = window_output_extent(w, spec.kernel[1], spec.stride[1], 0);
    if (ho == 0 || wo == 0) {
        throw ShapeError("maxpool2d input " + in_shape.to_string() + " smaller than the pooling window");
    }
    require_size(in.size(), in_shape.element_count(), "maxpool2d input");
    require_size(out.size(), channels * ho * wo, "maxpool2d output");

    for (std::size_t c = 0; c < channels; ++c) {
        const float* src = in.data() + c * h * w;
        float* dst = out.data() + c * ho * wo;
        for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t x = 0; x < wo; ++x) {
                const float* win = src + y * spec.stride[0] * w + x * spec.stride[1];
                float m = win[0];
                for (std::size_t i = 0; i < spec.kernel[0]; ++i) {
                    for (std::size_t j = 0; j < spec.kernel[1]; ++j) {
                        m = std::max(m, win[i * w + j]);
                    }
                }
                dst[y * wo + x] = m;
            }
        }
    }
}

Tensor conv2d_forward(const Conv2dSpec& spec, const Tensor& input)
{
    const Shape& s = input.shape();
    if (s.rank() != 3) {
        throw ShapeError("conv2d expects a [C,H,W] input, got " + s.to_string());
    }
    const std::size_t ho = window_output_extent(s[1], spec.kernel[0], spec.stride[0], spec.padding[0]);
    const std::size_t wo = window_output_extent(s[2], spec.kernel[1], spec.stride[1], spec.padding[1]);
    if (s[0] != spec.in_channels || ho == 0 || wo == 0) {
        throw ShapeError("conv2d cannot consume input of shape " + s.to_string());
    }
    Tensor out = Tensor::zeros(Shape{spec.out_channels, ho, wo});
    conv2d_forward(spec, s, input.data(), out.data());
    return out;
}

Tensor linear_forward(const LinearSpec& spec, const Tensor& input)
{
    Tensor out = Tensor::zeros(Shape{spec.out_features});
    linear_forward(spec, input.data(), out.data());
    return out;
}

Tensor maxpool_forward(const MaxPool2dSpec& spec, const Tensor& input)
{
    const Shape& s = input.shape();
    if (s.rank() != 3) {
        throw ShapeError("maxpool2d expects a [C,H,W] input, got " + s.to_string());
    }
    const std::size_t ho = window_output_extent(s[1], spec.kernel[0], spec.stride[0], 0);
    const std::size_t wo = window_output_extent(s[2], spec.kernel[1], spec.stride[1], 0);
    if (ho == 0 || wo == 0) {
        throw ShapeError("maxpool2d input " + s.to_string() + " smaller than the pooling window");
    }
    Tensor out = Tensor::zeros(Shape{s[0], ho, wo});
    maxpool_forward(spec, s, input.data(), out.data());
    return out;
}

std::size_t argmax_lowest(std::span<const std::uint64_t> counts)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i) {
        if (counts[i] > counts[best]) {
            best = i;
        }
    }
    return best;
}

RasterWriter::RasterWriter(std::ostream& out, bool header) : out_(out)
{
    if (header) {
        out_ << "step,layer_index,neuron_index\n";
    }
}

void RasterWriter::on_layer_output(std::size_t step, std::size_t layer_index, const Layer& layer,
                                   std::span<const float> output)
{
    if (!std::holds_alternative<LifSpec>(layer)) {
        return;
    }
    for (std::size_t n = 0; n < output.size(); ++n) {
        if (output[n] != 0.0f) {
            out_ << step << ',' << layer_index << ',' << n << '\n';
        }
    }
}

Engine::Engine(const Network& net) : net_(&net), trace_(validate(net))
{
    if (net.layers.empty()) {
        throw ValidationError("cannot run a network without layers");
    }
    const std::size_t n = net.layers.size();
    outputs_.resize(n);
    lif_.resize(n);
    layer_totals_.assign(n, 0);
    layer_seconds_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t count = trace_[i].output.element_count();
        if (std::holds_alternative<LifSpec>(net.layers[i])) {
            lif_[i] = LifState(count);
        } else if (!std::holds_alternative<FlattenSpec>(net.layers[i])) {
            outputs_[i].assign(count, 0.0f);
        }
    }
    class_counts_.assign(trace_.back().output.element_count(), 0);
}

void Engine::enable_layer_timing(bool on)
{
    timing_ = on;
    std::fill(layer_seconds_.begin(), layer_seconds_.end(), 0.0);
}

void Engine::reset_state()
{
    for (auto& s : lif_) {
        s.reset();
    }
    std::fill(class_counts_.begin(), class_counts_.end(), 0);
    std::fill(layer_totals_.begin(), layer_totals_.end(), 0);
}

InferenceResult Engine::run(const FrameSequence& frames, LayerObserver* observer)
{
    const Shape& fs = frames.frames.shape();
    if (fs.rank() != 4 || frames.frame_shape() != net_->input_shape) {
        throw ShapeError("step 0, layer 0: frames of shape " + fs.to_string() + " do not match network input " +
                         net_->input_shape.to_string());
    }
    reset_state();

    const Network& net = *net_;
    const std::size_t steps = fs[0];
    const std::size_t frame_size = net.input_shape.element_count();
    const std::size_t last = net.layers.size() - 1;
    const auto all = frames.frames.data();

    for (std::size_t t = 0; t < steps; ++t) {
        std::span<const float> x = all.subspan(t * frame_size, frame_size);
        for (std::size_t li = 0; li <= last; ++li) {
            const Layer& layer = net.layers[li];
            const auto started = timing_ ? std::chrono::steady_clock::now() : std::chrono::steady_clock::time_point{};
            try {
                x = std::visit(overloaded{
                                   [&](const Conv2dSpec& c) -> std::span<const float> {
                                       conv2d_forward(c, trace_[li].input, x, outputs_[li]);
                                       return outputs_[li];
                                   },
                                   [&](const LinearSpec& l) -> std::span<const float> {
                                       linear_forward(l, x, outputs_[li]);
                                       return outputs_[li];
                                   },
                                   [&](const MaxPool2dSpec& p) -> std::span<const float> {
                                       maxpool_forward(p, trace_[li].input, x, outputs_[li]);
                                       return outputs_[li];
                                   },
                                   [&](const LifSpec& l) -> std::span<const float> {
                                       lif_step(l, lif_[li], x);
                                       return lif_[li].spikes;
                                   },
                                   [&](const FlattenSpec&) -> std::span<const float> { return x; },
                               },
                               layer);
            } catch (const ShapeError& e) {
                throw ShapeError("step " + std::to_string(t) + ", layer " + std::to_string(li) + ": " + e.what());
            }
            if (timing_) {
                layer_seconds_[li] +=
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            }

            if (std::holds_alternative<LifSpec>(layer)) {
                std::uint64_t fired = 0;
                for (float s : x) {
                    fired += s != 0.0f ? 1 : 0;
                }
                layer_totals_[li] += fired;
                if (li == last) {
                    for (std::size_t k = 0; k < x.size(); ++k) {
                        class_counts_[k] += x[k] != 0.0f ? 1 : 0;
                    }
                }
            }
            if (observer != nullptr) {
                observer->on_layer_output(t, li, layer, x);
            }
        }
    }

    InferenceResult result;
    result.class_spike_counts = class_counts_;
    result.predicted_class = argmax_lowest(class_counts_);
    result.per_layer_spike_totals = layer_totals_;
    return result;
}

InferenceResult run_inference(const Network& net, const FrameSequence& frames)
{
    Engine engine(net);
    return engine.run(frames);
}

} // namespace snn
