#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "snn/engine.hpp"
#include "snn/model.hpp"

namespace snn {

inline constexpr std::size_t default_bench_runs = 500;

struct MemoryEstimate {
    std::uint64_t weights_bytes = 0;
    std::uint64_t state_bytes = 0;   // membrane + spike buffers of every LIF layer
    std::uint64_t frame_bytes = 0;   // one input frame
    std::uint64_t total_bytes = 0;
};

/// Static footprint from data-structure sizes, float32 throughout.
MemoryEstimate estimate_memory(const Network& net);

struct BenchReport {
    std::string label;
    std::size_t runs = 0;
    double mean_latency_s = 0.0;
    double min_latency_s = 0.0;
    double max_latency_s = 0.0;
    double stddev_latency_s = 0.0;
    std::vector<double> per_layer_time_s;  // mean per inference; empty unless requested
    std::uint64_t mac_total = 0;
    std::uint64_t memory_estimate_bytes = 0;
    std::string hostname;
    std::string timestamp;   // UTC, ISO 8601
    std::string model_hash;  // sha256 of the model file

    friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

struct BenchOptions {
    std::size_t runs = default_bench_runs;
    bool per_layer = false;
    std::string label;
};

/// Times `runs` inferences after one discarded warm-up. Every run must yield
/// the warm-up's InferenceResult; a mismatch throws InternalError.
BenchReport bench_inference(const Network& net, const FrameSequence& sample, const BenchOptions& options = {});

/// Summary statistics over raw durations (population standard deviation).
BenchReport summarize_durations(std::span<const double> seconds);

struct Comparison {
    double speedup = 1.0;        // a.mean / b.mean
    double mac_ratio = 1.0;      // a.macs / b.macs
    double memory_ratio = 1.0;   // a.bytes / b.bytes
    double latency_delta_s = 0.0;
    std::int64_t mac_delta = 0;
    std::int64_t memory_delta_bytes = 0;
};

/// How much faster `b` is than `a`; ratios > 1 favour b.
Comparison compare_reports(const BenchReport& a, const BenchReport& b);

std::string report_to_json(const BenchReport& report);
BenchReport report_from_json(std::string_view text);
std::string report_csv_header();
std::string report_to_csv_row(const BenchReport& report);
std::string report_to_table(const BenchReport& report);
std::string comparison_to_table(const BenchReport& a, const BenchReport& b, const Comparison& c);

std::string sha256_hex(std::string_view bytes);

} // namespace snn
