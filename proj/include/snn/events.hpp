#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "snn/tensor.hpp"

namespace snn {

struct Event {
    std::uint64_t t = 0;  // microseconds
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::uint8_t polarity = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

struct SensorShape {
    std::size_t height = 0;
    std::size_t width = 0;

    friend bool operator==(const SensorShape&, const SensorShape&) = default;
};

inline constexpr SensorShape nmnist_sensor{34, 34};

/// Time-sorted AER events on a fixed sensor.
struct EventStream {
    std::vector<Event> events;
    SensorShape sensor;

    /// Largest timestamp, 0 for an empty stream.
    std::uint64_t duration_us() const noexcept { return events.empty() ? 0 : events.back().t; }
};

/// Decodes N-MNIST 5-byte records:
///   byte0 = x, byte1 = y, byte2 bit 7 = polarity,
///   byte2 bits 6..0 / byte3 / byte4 = timestamp bits 22..16 / 15..8 / 7..0.
/// Throws FormatError on a partial trailing record or an off-sensor address.
EventStream load_events_nmnist(std::span<const std::uint8_t> bytes);

/// Parses `t,x,y,p` lines (optional header, LF or CRLF). Events are re-sorted by t.
EventStream load_events_csv(std::string_view text, SensorShape sensor);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

/// Picks the decoder from the extension: `.bin` for N-MNIST, `.csv` for CSV.
EventStream load_events_file(const std::string& path, SensorShape csv_sensor);

struct BinningOptions {
    std::size_t num_frames = 10;
    bool binarize = false;
    /// Collapse both polarities into a single channel.
    bool merge_polarity = false;
    /// Global fixed bin width instead of duration/num_frames per sample.
    std::optional<std::uint64_t> fixed_bin_width_us;
};

struct FrameSequence {
    Tensor frames;  // [T, C, H, W]
    std::uint64_t bin_width_us = 0;

    std::size_t num_frames() const { return frames.shape()[0]; }
    Shape frame_shape() const { return Shape{frames.shape()[1], frames.shape()[2], frames.shape()[3]}; }
};

/// Accumulates events into `num_frames` bins. With the per-sample width
/// w = ceil((duration + 1) / T), an event at t lands in bin min(t / w, T - 1).
FrameSequence bin_to_frames(const EventStream& stream, const BinningOptions& options);

/// Debug dump: {"shape":[...],"data":[...]}.
std::string frames_to_json(const FrameSequence& frames);
Tensor tensor_from_json(std::string_view text);

} // namespace snn
