#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snn/engine.hpp"
#include "snn/model.hpp"

namespace snn {

struct LayerSpikeCounts {
    std::size_t layer_index = 0;
    std::vector<std::uint64_t> counts;  // one per neuron, flattened [C,H,W] order

    friend bool operator==(const LayerSpikeCounts&, const LayerSpikeCounts&) = default;
};

/// Spike counts per LIF layer, summed over every profiled sample and step.
struct SpikeProfile {
    std::vector<LayerSpikeCounts> layers;
    std::uint64_t samples_profiled = 0;

    const LayerSpikeCounts* find(std::size_t layer_index) const;

    friend bool operator==(const SpikeProfile&, const SpikeProfile&) = default;
};

/// Runs every sample through a fresh engine and accumulates spikes.
/// With jobs > 1 samples are split across threads; counts merge by summation.
SpikeProfile profile_spikes(const Network& net, std::span<const FrameSequence> dataset, std::size_t jobs = 1);

std::string profile_to_json(const SpikeProfile& profile);
SpikeProfile profile_from_json(std::string_view text);

enum class PruneKind { conv_channels, neurons };
enum class InputKind { conv_input_channels, linear_columns };

/// Inputs the next weighted layer loses when a group is removed.
struct DownstreamRemoval {
    std::size_t layer_index = 0;
    InputKind kind = InputKind::conv_input_channels;
    std::vector<std::size_t> remove;

    friend bool operator==(const DownstreamRemoval&, const DownstreamRemoval&) = default;
};

struct LayerPrune {
    std::size_t layer_index = 0;   // the LIF layer whose activity was examined
    std::size_t source_layer = 0;  // conv or linear feeding it
    PruneKind kind = PruneKind::conv_channels;
    std::vector<std::size_t> remove;  // sorted channel or neuron indices
    std::size_t group_count = 0;      // channels or neurons before pruning
    DownstreamRemoval downstream;

    friend bool operator==(const LayerPrune&, const LayerPrune&) = default;
};

struct PrunePlan {
    std::vector<LayerPrune> layers;
    std::uint64_t threshold = 0;
    std::uint64_t samples_profiled = 0;

    bool empty() const noexcept { return layers.empty(); }

    friend bool operator==(const PrunePlan&, const PrunePlan&) = default;
};

/// Where a LIF layer sits relative to the weighted layers around it.
/// Only LIF layers fed (through pooling only) by a conv or linear layer and
/// feeding (through pooling/flatten only) another conv or linear layer qualify.
struct PrunableSite {
    std::size_t lif_layer = 0;
    std::size_t source_layer = 0;
    PruneKind kind = PruneKind::conv_channels;
    std::size_t group_count = 0;
    std::size_t neurons_per_group = 1;
    std::size_t consumer_layer = 0;
    InputKind consumer_kind = InputKind::conv_input_channels;
    std::size_t columns_per_group = 1;  // linear_columns only
};

std::vector<PrunableSite> prunable_sites(const Network& net);

enum class Aggregation { sum, max };

/// Groups with activity <= threshold are removed. The output layer is never
/// touched. Throws PlanError if a layer would lose every group.
PrunePlan select_prunable(const SpikeProfile& profile, const Network& net, std::uint64_t threshold,
                          Aggregation aggregation = Aggregation::sum);

struct GroupRemoval {
    std::size_t lif_layer = 0;
    std::vector<std::size_t> remove;
};

/// Builds a plan from explicit removals, deriving the downstream input removals.
PrunePlan make_plan(const Network& net, std::span<const GroupRemoval> removals);

/// Rewrites the network per the plan; the result always passes validate().
Network prune_network(const Network& net, const PrunePlan& plan);

std::string plan_to_json(const PrunePlan& plan);
/// Reads layer_index/kind/remove and re-derives the rest against `net`.
PrunePlan plan_from_json(std::string_view text, const Network& net);

struct LayerOps {
    std::size_t layer_index = 0;
    std::uint64_t macs = 0;       // multiply-accumulates per time step
    std::uint64_t other_ops = 0;  // pooling comparisons or neuron updates
};

struct MacReport {
    std::vector<LayerOps> layers;
    std::uint64_t total_macs = 0;
    std::uint64_t conv_macs = 0;
    std::uint64_t linear_macs = 0;
};

MacReport mac_count(const Network& net);

} // namespace snn
