#include "snn/events.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

namespace snn {

namespace {

constexpr std::size_t nmnist_record_bytes = 5;

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::uint64_t parse_field(std::string_view field, std::size_t line, const char* name)
{
    field = trim(field);
    std::uint64_t v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw ParseError("line " + std::to_string(line) + ": field '" + name + "' is not a non-negative integer: '" +
                         std::string(field) + "'");
    }
    return v;
}

} // namespace

EventStream load_events_nmnist(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() % nmnist_record_bytes != 0) {
        throw FormatError("N-MNIST data has a partial trailing record (" + std::to_string(bytes.size()) +
                          " bytes is not a multiple of 5)");
    }
    EventStream stream;
    stream.sensor = nmnist_sensor;
    stream.events.reserve(bytes.size() / nmnist_record_bytes);

    for (std::size_t r = 0; r * nmnist_record_bytes < bytes.size(); ++r) {
        const auto rec = bytes.subspan(r * nmnist_record_bytes, nmnist_record_bytes);
        Event e;
        e.x = rec[0];
        e.y = rec[1];
        e.polarity = static_cast<std::uint8_t>(rec[2] >> 7);
        e.t = (static_cast<std::uint64_t>(rec[2] & 0x7Fu) << 16) | (static_cast<std::uint64_t>(rec[3]) << 8) | rec[4];
        if (e.x >= stream.sensor.width || e.y >= stream.sensor.height) {
            throw FormatError("record " + std::to_string(r) + ": address (" + std::to_string(e.x) + "," +
                              std::to_string(e.y) + ") outside the 34x34 sensor");
        }
        stream.events.push_back(e);
    }
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return stream;
}

EventStream load_events_csv(std::string_view text, SensorShape sensor)
{
    if (sensor.height == 0 || sensor.width == 0) {
        throw ArgumentError("sensor shape must be non-empty");
    }
    EventStream stream;
    stream.sensor = sensor;

    std::size_t line_no = 0;
    while (!text.empty()) {
        const std::size_t nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        if (line.empty()) {
            continue;
        }
        if (line_no == 1 && line == "t,x,y,p") {
            continue;
        }

        std::string_view fields[4];
        std::size_t n = 0;
        while (n < 4) {
            const std::size_t comma = line.find(',');
            fields[n++] = line.substr(0, comma);
            if (comma == std::string_view::npos) {
                line = {};
                break;
            }
            line = line.substr(comma + 1);
        }
        if (n != 4 || !line.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields t,x,y,p");
        }

        const std::uint64_t t = parse_field(fields[0], line_no, "t");
        const std::uint64_t x = parse_field(fields[1], line_no, "x");
        const std::uint64_t y = parse_field(fields[2], line_no, "y");
        const std::uint64_t p = parse_field(fields[3], line_no, "p");
        if (p > 1) {
            throw FormatError("line " + std::to_string(line_no) + ": polarity must be 0 or 1, got " + std::to_string(p));
        }
        if (x >= sensor.width || y >= sensor.height) {
            throw FormatError("line " + std::to_string(line_no) + ": address (" + std::to_string(x) + "," +
                              std::to_string(y) + ") outside the " + std::to_string(sensor.height) + "x" +
                              std::to_string(sensor.width) + " sensor");
        }
        stream.events.push_back(Event{t, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                                      static_cast<std::uint8_t>(p)});
    }
    std::stable_sort(stream.events.begin(), stream.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return stream;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArgumentError("cannot open '" + path + "'");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EventStream load_events_file(const std::string& path, SensorShape csv_sensor)
{
    const std::string ext = std::filesystem::path(path).extension().string();
    const auto bytes = read_file_bytes(path);
    if (ext == ".bin") {
        return load_events_nmnist(bytes);
    }
    if (ext == ".csv") {
        return load_events_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), csv_sensor);
    }
    throw ArgumentError("unknown event file extension '" + ext + "' (expected .bin or .csv)");
}

FrameSequence bin_to_frames(const EventStream& stream, const BinningOptions& options)
{
    const std::size_t frames = options.num_frames;
    if (frames == 0) {
        throw ArgumentError("number of frames must be at least 1");
    }
    if (options.fixed_bin_width_us && *options.fixed_bin_width_us == 0) {
        throw ArgumentError("fixed bin width must be at least 1 us");
    }
    const std::size_t channels = options.merge_polarity ? 1 : 2;
    const std::size_t h = stream.sensor.height;
    const std::size_t w = stream.sensor.width;

    FrameSequence out;
    out.frames = Tensor::zeros(Shape{frames, channels, h, w});
    const std::uint64_t span = stream.duration_us() + 1;
    out.bin_width_us = options.fixed_bin_width_us.value_or((span + frames - 1) / frames);

    auto data = out.frames.data();
    const std::size_t plane = h * w;
    for (const Event& e : stream.events) {
        const std::size_t bin = static_cast<std::size_t>(std::min<std::uint64_t>(e.t / out.bin_width_us, frames - 1));
        const std::size_t c = options.merge_polarity ? 0 : e.polarity;
        float& cell = data[(bin * channels + c) * plane + std::size_t{e.y} * w + e.x];
        cell = options.binarize ? 1.0f : cell + 1.0f;
    }
    return out;
}

std::string frames_to_json(const FrameSequence& frames)
{
    nlohmann::json j;
    j["shape"] = frames.frames.shape().dims();
    j["data"] = std::vector<float>(frames.frames.data().begin(), frames.frames.data().end());
    return j.dump();
}

Tensor tensor_from_json(std::string_view text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what());
    }
    if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
        throw SchemaError("tensor document needs 'shape' and 'data'");
    }
    return Tensor::from_data(Shape(j["shape"].get<std::vector<std::size_t>>()), j["data"].get<std::vector<float>>());
}

} // namespace snn
