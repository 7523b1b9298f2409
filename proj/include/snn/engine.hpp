#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "snn/events.hpp"
#include "snn/model.hpp"

namespace snn {

/// Membrane potentials and the previous step's spikes, one flat array each.
struct LifState {
    std::vector<float> membrane;
    std::vector<float> spikes;

    explicit LifState(std::size_t neurons = 0) : membrane(neurons, 0.0f), spikes(neurons, 0.0f) {}

    std::size_t size() const noexcept { return membrane.size(); }
    void reset();
};

/// One LIF update:
///   subtract: U = beta*U + I - S*theta
///   zero:     U = (S ? 0 : beta*U) + I
/// with S the previous step's spikes, then S = (U > theta).
void lif_step(const LifSpec& spec, LifState& state, std::span<const float> current);

// Span kernels used by the engine. `out` must already have the output size.
void conv2d_forward(const Conv2dSpec& spec, const Shape& in_shape, std::span<const float> in, std::span<float> out);
void linear_forward(const LinearSpec& spec, std::span<const float> in, std::span<float> out);
void maxpool_forward(const MaxPool2dSpec& spec, const Shape& in_shape, std::span<const float> in, std::span<float> out);

Tensor conv2d_forward(const Conv2dSpec& spec, const Tensor& input);
Tensor linear_forward(const LinearSpec& spec, const Tensor& input);
Tensor maxpool_forward(const MaxPool2dSpec& spec, const Tensor& input);

struct InferenceResult {
    std::vector<std::uint64_t> class_spike_counts;
    std::size_t predicted_class = 0;
    /// Spikes emitted per layer over the whole window; zero for non-LIF layers.
    std::vector<std::uint64_t> per_layer_spike_totals;

    friend bool operator==(const InferenceResult&, const InferenceResult&) = default;
};

/// Index of the largest count, lowest index on ties. Empty input yields 0.
std::size_t argmax_lowest(std::span<const std::uint64_t> counts);

class LayerObserver {
public:
    virtual ~LayerObserver() = default;
    /// Called after every layer at every step. For LIF layers `output` holds the spikes.
    virtual void on_layer_output(std::size_t step, std::size_t layer_index, const Layer& layer,
                                 std::span<const float> output) = 0;
};

/// Writes `step,layer_index,neuron_index` for every emitted spike.
class RasterWriter : public LayerObserver {
public:
    explicit RasterWriter(std::ostream& out, bool header = true);
    void on_layer_output(std::size_t step, std::size_t layer_index, const Layer& layer,
                         std::span<const float> output) override;

private:
    std::ostream& out_;
};

/// One in-flight inference over a shared, immutable Network. All buffers are
/// allocated in the constructor; run() does not allocate per step.
/// The Network must outlive the engine.
class Engine {
public:
    explicit Engine(const Network& net);
    Engine(Network&&) = delete;

    InferenceResult run(const FrameSequence& frames, LayerObserver* observer = nullptr);

    const Network& network() const noexcept { return *net_; }
    const ShapeTrace& trace() const noexcept { return trace_; }

    void enable_layer_timing(bool on);
    /// Accumulated wall time per layer (seconds) since timing was enabled.
    const std::vector<double>& layer_seconds() const noexcept { return layer_seconds_; }

private:
    void reset_state();

    const Network* net_;
    ShapeTrace trace_;
    std::vector<std::vector<float>> outputs_;
    std::vector<LifState> lif_;
    std::vector<std::uint64_t> class_counts_;
    std::vector<std::uint64_t> layer_totals_;
    bool timing_ = false;
    std::vector<double> layer_seconds_;
};

InferenceResult run_inference(const Network& net, const FrameSequence& frames);

} // namespace snn
