#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "snn/events.hpp"
#include "snn/model.hpp"

namespace snn::testing {

// Platform-independent generator: std::mt19937 output is fully specified,
// the std distributions are not.
class Rng {
public:
    explicit Rng(std::uint32_t seed) : gen_(seed) {}

    float uniform(float lo, float hi) { return lo + (hi - lo) * static_cast<float>(gen_() >> 8) * 0x1p-24f; }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
    std::size_t range(std::size_t lo, std::size_t hi) { return lo + index(hi - lo + 1); }
    bool chance(float p) { return uniform(0.0f, 1.0f) < p; }
    std::uint32_t next() { return gen_(); }

private:
    std::mt19937 gen_;
};

Tensor random_tensor(Rng& rng, const Shape& shape, float lo, float hi);

Conv2dSpec make_conv(Rng& rng, std::size_t in, std::size_t out, std::size_t k, float lo, float hi);
LinearSpec make_linear(Rng& rng, std::size_t in, std::size_t out, float lo, float hi);

/// Two conv blocks on a 2x34x34 input: conv(2->12,5x5) lif pool conv(12->32,5x5) lif pool flatten linear(->10) lif.
Network nmnist_reference_network(std::uint32_t seed = 7);

/// Synthetic digit-like N-MNIST stream: a ring traced by a saccading sensor.
EventStream synthetic_nmnist_stream(std::uint32_t seed, std::size_t events = 2000);

/// Dense 100->128->10 model on a 1x10x10 tactile grid.
Network stmnist_dense_network(std::uint32_t seed = 11);

/// The 4-filter toy: conv(1->4, 2x2) on a 1x3x3 input feeds a 16-neuron LIF layer,
/// four neurons per filter. Filters 0 ("red") and 2 ("blue") can never fire.
Network toy_filter_network();
std::vector<FrameSequence> toy_filter_inputs();

/// Conv-heavy net where exactly half the channels of each conv are provably
/// silent on non-negative input (non-positive weights, negative bias).
Network half_silent_network(std::uint32_t seed = 5);

/// Random conv SNN with 1-3 conv blocks, all extents <= 16, and a hidden
/// dense LIF layer. Some channels/neurons are forced silent, one per layer forced active.
Network random_conv_snn(Rng& rng);

/// Random stack of at most 4 layers with every extent <= 8.
Network random_small_network(Rng& rng);

/// Frames with the given fraction of non-zero cells, values in {1, 2}.
FrameSequence sparse_frames(Rng& rng, const Shape& frame_shape, std::size_t steps, float density);

/// Dense non-negative real-valued frames in [0, hi).
FrameSequence dense_frames(Rng& rng, const Shape& frame_shape, std::size_t steps, float hi);

/// Test-only inverse of load_events_nmnist.
std::vector<std::uint8_t> encode_nmnist(const EventStream& stream);

} // namespace snn::testing
