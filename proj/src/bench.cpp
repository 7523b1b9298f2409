#include "snn/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <unistd.h>

#include <json.hpp>
#include <openssl/evp.h>

#include "snn/pruning.hpp"

namespace snn {

namespace {

using json = nlohmann::json;

std::string host_name()
{
    std::array<char, 256> buf{};
    if (gethostname(buf.data(), buf.size() - 1) != 0) {
        return "unknown";
    }
    return buf.data();
}

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string fixed(double v, int digits)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

} // namespace

MemoryEstimate estimate_memory(const Network& net)
{
    const ShapeTrace trace = validate(net);
    MemoryEstimate m;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (const auto* c = std::get_if<Conv2dSpec>(&net.layers[i])) {
            m.weights_bytes += 4 * (c->weights.size() + c->bias.size());
        } else if (const auto* l = std::get_if<LinearSpec>(&net.layers[i])) {
            m.weights_bytes += 4 * (l->weights.size() + l->bias.size());
        } else if (std::holds_alternative<LifSpec>(net.layers[i])) {
            m.state_bytes += 4 * 2 * trace[i].output.element_count();
        }
    }
    m.frame_bytes = 4 * net.input_shape.element_count();
    m.total_bytes = m.weights_bytes + m.state_bytes + m.frame_bytes;
    return m;
}

BenchReport summarize_durations(std::span<const double> seconds)
{
    if (seconds.empty()) {
        throw ArgumentError("need at least one timed run");
    }
    BenchReport r;
    r.runs = seconds.size();
    const auto [lo, hi] = std::minmax_element(seconds.begin(), seconds.end());
    r.min_latency_s = *lo;
    r.max_latency_s = *hi;
    r.mean_latency_s = std::accumulate(seconds.begin(), seconds.end(), 0.0) / static_cast<double>(seconds.size());
    double var = 0.0;
    for (double s : seconds) {
        var += (s - r.mean_latency_s) * (s - r.mean_latency_s);
    }
    r.stddev_latency_s = std::sqrt(var / static_cast<double>(seconds.size()));
    // Keep min <= mean <= max despite rounding in the sum.
    r.mean_latency_s = std::clamp(r.mean_latency_s, r.min_latency_s, r.max_latency_s);
    return r;
}

BenchReport bench_inference(const Network& net, const FrameSequence& sample, const BenchOptions& options)
{
    if (options.runs == 0) {
        throw ArgumentError("runs must be at least 1");
    }
    Engine engine(net);
    const InferenceResult reference = engine.run(sample);

    std::vector<double> seconds;
    seconds.reserve(options.runs);
    for (std::size_t r = 0; r < options.runs; ++r) {
        const auto start = std::chrono::steady_clock::now();
        const InferenceResult result = engine.run(sample);
        seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        if (result != reference) {
            throw InternalError("non-deterministic inference: run " + std::to_string(r) +
                                " differs from the warm-up run");
        }
    }

    BenchReport report = summarize_durations(seconds);
    report.label = options.label;
    report.mac_total = mac_count(net).total_macs;
    report.memory_estimate_bytes = estimate_memory(net).total_bytes;
    report.hostname = host_name();
    report.timestamp = utc_timestamp();
    report.model_hash = sha256_hex(save_model(net));

    if (options.per_layer) {
        // Separate pass so the clock reads do not perturb the headline numbers.
        engine.enable_layer_timing(true);
        for (std::size_t r = 0; r < options.runs; ++r) {
            engine.run(sample);
        }
        report.per_layer_time_s = engine.layer_seconds();
        for (double& s : report.per_layer_time_s) {
            s /= static_cast<double>(options.runs);
        }
    }
    return report;
}

Comparison compare_reports(const BenchReport& a, const BenchReport& b)
{
    Comparison c;
    c.speedup = b.mean_latency_s > 0.0 ? a.mean_latency_s / b.mean_latency_s : 1.0;
    c.mac_ratio = b.mac_total > 0 ? static_cast<double>(a.mac_total) / static_cast<double>(b.mac_total) : 1.0;
    c.memory_ratio = b.memory_estimate_bytes > 0 ? static_cast<double>(a.memory_estimate_bytes) /
                                                       static_cast<double>(b.memory_estimate_bytes)
                                                 : 1.0;
    c.latency_delta_s = b.mean_latency_s - a.mean_latency_s;
    c.mac_delta = static_cast<std::int64_t>(b.mac_total) - static_cast<std::int64_t>(a.mac_total);
    c.memory_delta_bytes =
        static_cast<std::int64_t>(b.memory_estimate_bytes) - static_cast<std::int64_t>(a.memory_estimate_bytes);
    return c;
}

std::string report_to_json(const BenchReport& r)
{
    json j{
        {"label", r.label},
        {"runs", r.runs},
        {"mean_latency_s", r.mean_latency_s},
        {"min_latency_s", r.min_latency_s},
        {"max_latency_s", r.max_latency_s},
        {"stddev_latency_s", r.stddev_latency_s},
        {"per_layer_time_s", r.per_layer_time_s},
        {"mac_total", r.mac_total},
        {"memory_estimate_bytes", r.memory_estimate_bytes},
        {"hostname", r.hostname},
        {"timestamp", r.timestamp},
        {"model_hash", r.model_hash},
    };
    return j.dump(2);
}

BenchReport report_from_json(std::string_view text)
{
    try {
        const json j = json::parse(text);
        BenchReport r;
        r.label = j.at("label").get<std::string>();
        r.runs = j.at("runs").get<std::size_t>();
        r.mean_latency_s = j.at("mean_latency_s").get<double>();
        r.min_latency_s = j.at("min_latency_s").get<double>();
        r.max_latency_s = j.at("max_latency_s").get<double>();
        r.stddev_latency_s = j.at("stddev_latency_s").get<double>();
        r.per_layer_time_s = j.at("per_layer_time_s").get<std::vector<double>>();
        r.mac_total = j.at("mac_total").get<std::uint64_t>();
        r.memory_estimate_bytes = j.at("memory_estimate_bytes").get<std::uint64_t>();
        r.hostname = j.at("hostname").get<std::string>();
        r.timestamp = j.at("timestamp").get<std::string>();
        r.model_hash = j.at("model_hash").get<std::string>();
        return r;
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed report JSON: ") + e.what());
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid report JSON: ") + e.what());
    }
}

std::string report_csv_header()
{
    return "label,runs,mean_latency_s,min_latency_s,max_latency_s,stddev_latency_s,mac_total,"
           "memory_estimate_bytes,hostname,timestamp,model_hash\n";
}

std::string report_to_csv_row(const BenchReport& r)
{
    std::ostringstream os;
    os << std::setprecision(9) << csv_field(r.label) << ',' << r.runs << ',' << r.mean_latency_s << ','
       << r.min_latency_s << ',' << r.max_latency_s << ',' << r.stddev_latency_s << ',' << r.mac_total << ','
       << r.memory_estimate_bytes << ',' << csv_field(r.hostname) << ',' << r.timestamp << ',' << r.model_hash
       << '\n';
    return os.str();
}

std::string report_to_table(const BenchReport& r)
{
    std::ostringstream os;
    os << "label            " << (r.label.empty() ? "-" : r.label) << '\n'
       << "runs             " << r.runs << '\n'
       << "mean latency     " << fixed(r.mean_latency_s * 1e3, 3) << " ms\n"
       << "min / max        " << fixed(r.min_latency_s * 1e3, 3) << " / " << fixed(r.max_latency_s * 1e3, 3)
       << " ms\n"
       << "stddev           " << fixed(r.stddev_latency_s * 1e3, 3) << " ms\n"
       << "MACs per step    " << r.mac_total << '\n'
       << "memory estimate  " << r.memory_estimate_bytes << " bytes\n";
    for (std::size_t i = 0; i < r.per_layer_time_s.size(); ++i) {
        os << "  layer " << std::setw(2) << i << "       " << fixed(r.per_layer_time_s[i] * 1e3, 4) << " ms\n";
    }
    return os.str();
}

std::string comparison_to_table(const BenchReport& a, const BenchReport& b, const Comparison& c)
{
    std::ostringstream os;
    os << "                 " << std::setw(14) << (a.label.empty() ? "baseline" : a.label) << std::setw(14)
       << (b.label.empty() ? "candidate" : b.label) << '\n'
       << "mean latency ms  " << std::setw(14) << fixed(a.mean_latency_s * 1e3, 3) << std::setw(14)
       << fixed(b.mean_latency_s * 1e3, 3) << '\n'
       << "MACs per step    " << std::setw(14) << a.mac_total << std::setw(14) << b.mac_total << '\n'
       << "memory bytes     " << std::setw(14) << a.memory_estimate_bytes << std::setw(14) << b.memory_estimate_bytes
       << '\n'
       << "speedup          " << fixed(c.speedup, 2) << "x\n"
       << "MAC ratio        " << fixed(c.mac_ratio, 2) << "x\n"
       << "memory ratio     " << fixed(c.memory_ratio, 2) << "x\n";
    return os.str();
}

std::string sha256_hex(std::string_view bytes)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw InternalError("sha256 failed");
    }
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) {
        os << std::setw(2) << static_cast<int>(digest[i]);
    }
    return os.str();
}

} // namespace snn
