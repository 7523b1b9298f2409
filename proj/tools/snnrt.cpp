// snnrt: validate, convert, run, profile, prune and benchmark spiking networks.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "snn/bench.hpp"
#include "snn/engine.hpp"
#include "snn/events.hpp"
#include "snn/model.hpp"
#include "snn/pruning.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Bad flags, missing or unreadable files: exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Format { table, json, csv };

const std::map<std::string, Format> format_names{
    {"table", Format::table}, {"json", Format::json}, {"csv", Format::csv}};

void require_file(const std::string& path)
{
    std::error_code ec;
    if (!fs::exists(path, ec) || fs::is_directory(path, ec)) {
        throw UsageError("no such file: '" + path + "'");
    }
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw UsageError("cannot write '" + path + "'");
    }
}

std::string read_text(const std::string& path)
{
    require_file(path);
    const auto bytes = snn::read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

snn::Network load_checked_model(const std::string& path)
{
    require_file(path);
    snn::Network net = snn::load_model_file(path);
    snn::validate(net);
    return net;
}

struct Sample {
    std::string path;
    std::optional<int> label;
};

// Label from a trailing "_<digit>" in the file stem, e.g. "sample17_3.bin".
std::optional<int> label_from_name(const fs::path& p)
{
    const std::string stem = p.stem().string();
    if (stem.size() >= 2 && stem[stem.size() - 2] == '_' && std::isdigit(static_cast<unsigned char>(stem.back()))) {
        return stem.back() - '0';
    }
    return std::nullopt;
}

std::vector<Sample> collect_samples(const std::string& path)
{
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) {
        return {{path, label_from_name(path)}};
    }
    if (!fs::is_directory(path, ec)) {
        throw UsageError("no such file or directory: '" + path + "'");
    }
    std::vector<Sample> out;
    for (const auto& entry : fs::directory_iterator(path)) {
        const std::string ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".bin" || ext == ".csv")) {
            out.push_back({entry.path().string(), label_from_name(entry.path())});
        }
    }
    std::sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.path < b.path; });
    return out;
}

// Binning that matches the model input: CSV grids take the model's H and W,
// a single input channel means both polarities are merged.
struct FrameSettings {
    std::optional<std::size_t> frames;
    bool binarize = false;
};

snn::FrameSequence frames_for(const snn::Network& net, const std::string& path, const FrameSettings& s)
{
    const snn::SensorShape sensor{net.input_shape[1], net.input_shape[2]};
    const snn::EventStream stream = snn::load_events_file(path, sensor);
    snn::BinningOptions opt;
    opt.num_frames = s.frames.value_or(net.num_steps);
    opt.binarize = s.binarize;
    opt.merge_polarity = net.input_shape[0] == 1;
    return snn::bin_to_frames(stream, opt);
}

std::string percent(double fraction)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
    std::string s = buf;
    if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) {
        s.resize(s.size() - 2);
    }
    return s + "%";
}

std::string reduction(std::uint64_t before, std::uint64_t after)
{
    if (before == 0) {
        return "-0%";
    }
    return "-" + percent(static_cast<double>(before - after) / static_cast<double>(before));
}

json counts_json(const snn::InferenceResult& r)
{
    return {{"predicted_class", r.predicted_class},
            {"class_spike_counts", r.class_spike_counts},
            {"per_layer_spike_totals", r.per_layer_spike_totals}};
}

std::string join(const std::vector<std::uint64_t>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? " " : "") + std::to_string(v[i]);
    }
    return s;
}

// ---- validate

int cmd_validate(const std::string& model_path, Format format)
{
    const snn::Network net = load_checked_model(model_path);
    const snn::ShapeTrace trace = snn::validate(net);
    const snn::MacReport macs = snn::mac_count(net);

    if (format == Format::json) {
        json layers = json::array();
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            layers.push_back({{"index", i},
                              {"type", snn::layer_type_name(net.layers[i])},
                              {"input", trace[i].input.dims()},
                              {"output", trace[i].output.dims()},
                              {"macs", macs.layers[i].macs}});
        }
        std::cout << json{{"valid", true}, {"num_steps", net.num_steps}, {"layers", layers},
                          {"total_macs", macs.total_macs}}
                         .dump(2)
                  << "\n";
        return 0;
    }
    std::cout << "input " << net.input_shape.to_string() << ", " << net.num_steps << " steps\n";
    std::cout << std::left << std::setw(6) << "layer" << std::setw(9) << "type" << std::setw(16) << "input"
              << std::setw(16) << "output" << "macs\n";
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        std::cout << std::setw(6) << i << std::setw(9) << snn::layer_type_name(net.layers[i]) << std::setw(16)
                  << trace[i].input.to_string() << std::setw(16) << trace[i].output.to_string()
                  << macs.layers[i].macs << "\n";
    }
    std::cout << "ok: " << net.layers.size() << " layers, " << macs.total_macs << " MACs per step\n";
    return 0;
}

// ---- convert

struct ConvertArgs {
    std::string events;
    std::string out;
    std::size_t frames = 10;
    std::string sensor = "34x34";
    bool binarize = false;
    bool merge_polarity = false;
    std::optional<std::uint64_t> bin_width_us;
};

snn::SensorShape parse_sensor(const std::string& s)
{
    const auto x = s.find('x');
    try {
        if (x != std::string::npos) {
            std::size_t used = 0;
            const auto h = std::stoul(s.substr(0, x), &used);
            const auto w = std::stoul(s.substr(x + 1));
            if (h > 0 && w > 0 && used == x) {
                return {h, w};
            }
        }
    } catch (const std::exception&) {
    }
    throw UsageError("--sensor expects HxW, got '" + s + "'");
}

int cmd_convert(const ConvertArgs& a)
{
    require_file(a.events);
    const snn::EventStream stream = snn::load_events_file(a.events, parse_sensor(a.sensor));
    snn::BinningOptions opt;
    opt.num_frames = a.frames;
    opt.binarize = a.binarize;
    opt.merge_polarity = a.merge_polarity;
    opt.fixed_bin_width_us = a.bin_width_us;
    const std::string text = snn::frames_to_json(snn::bin_to_frames(stream, opt)) + "\n";
    if (a.out.empty() || a.out == "-") {
        std::cout << text;
    } else {
        write_text(a.out, text);
        std::cerr << "wrote " << stream.events.size() << " events as " << a.frames << " frames to " << a.out << "\n";
    }
    return 0;
}

// ---- run

struct RunArgs {
    std::string model;
    std::string events;
    FrameSettings frames;
    std::string raster;
    Format format = Format::table;
};

int cmd_run(const RunArgs& a)
{
    const snn::Network net = load_checked_model(a.model);
    const std::vector<Sample> samples = collect_samples(a.events);
    if (samples.empty()) {
        throw UsageError("no .bin or .csv event files in '" + a.events + "'");
    }

    std::ofstream raster_file;
    std::optional<snn::RasterWriter> raster;
    if (!a.raster.empty()) {
        raster_file.open(a.raster, std::ios::binary);
        if (!raster_file) {
            throw UsageError("cannot write '" + a.raster + "'");
        }
        raster.emplace(raster_file);
    }

    snn::Engine engine(net);
    json results = json::array();
    std::size_t labelled = 0;
    std::size_t correct = 0;
    if (a.format == Format::csv) {
        std::cout << "file,predicted_class,label,class_spike_counts\n";
    }
    for (const Sample& s : samples) {
        const snn::FrameSequence frames = frames_for(net, s.path, a.frames);
        const snn::InferenceResult r = engine.run(frames, raster ? &*raster : nullptr);
        if (s.label) {
            ++labelled;
            correct += static_cast<std::size_t>(*s.label) == r.predicted_class ? 1 : 0;
        }
        const std::string name = fs::path(s.path).filename().string();
        switch (a.format) {
        case Format::json: {
            json j = counts_json(r);
            j["file"] = name;
            j["label"] = s.label ? json(*s.label) : json(nullptr);
            results.push_back(j);
            break;
        }
        case Format::csv:
            std::cout << name << ',' << r.predicted_class << ',' << (s.label ? std::to_string(*s.label) : "") << ','
                      << join(r.class_spike_counts) << "\n";
            break;
        case Format::table:
            std::cout << name << ": predicted class " << r.predicted_class << "  counts [" << join(r.class_spike_counts)
                      << "]" << (s.label ? "  label " + std::to_string(*s.label) : "") << "\n";
            break;
        }
    }
    const double accuracy = labelled ? static_cast<double>(correct) / static_cast<double>(labelled) : 0.0;
    if (a.format == Format::json) {
        json doc{{"samples", results}};
        if (labelled) {
            doc["accuracy"] = accuracy;
            doc["labelled"] = labelled;
        }
        std::cout << doc.dump(2) << "\n";
    } else if (a.format == Format::table && labelled) {
        std::cout << "accuracy " << correct << "/" << labelled << " (" << percent(accuracy) << ")\n";
    }
    return 0;
}

// ---- profile

struct ProfileArgs {
    std::string model;
    std::string dataset;
    std::string out;
    std::size_t jobs = 1;
    FrameSettings frames;
};

int cmd_profile(const ProfileArgs& a)
{
    const snn::Network net = load_checked_model(a.model);
    const std::vector<Sample> samples = collect_samples(a.dataset);
    if (samples.empty()) {
        throw UsageError("dataset '" + a.dataset + "' has no .bin or .csv event files");
    }
    std::vector<snn::FrameSequence> data;
    data.reserve(samples.size());
    for (const Sample& s : samples) {
        data.push_back(frames_for(net, s.path, a.frames));
    }
    const snn::SpikeProfile profile = snn::profile_spikes(net, data, a.jobs);
    write_text(a.out, snn::profile_to_json(profile));

    std::cout << "profiled " << profile.samples_profiled << " samples\n";
    for (const auto& l : profile.layers) {
        const auto silent = std::count(l.counts.begin(), l.counts.end(), std::uint64_t{0});
        std::cout << "layer " << l.layer_index << ": " << silent << "/" << l.counts.size() << " neurons silent\n";
    }
    return 0;
}

// ---- prune

struct PruneArgs {
    std::string model;
    std::string profile;
    std::uint64_t threshold = 0;
    std::string out;
    std::string plan_out;
    std::string aggregate = "sum";
};

int cmd_prune(const PruneArgs& a)
{
    const snn::Network net = load_checked_model(a.model);
    const snn::SpikeProfile profile = snn::profile_from_json(read_text(a.profile));
    const snn::Aggregation agg = a.aggregate == "max" ? snn::Aggregation::max : snn::Aggregation::sum;

    if (a.threshold > 0) {
        std::cerr << "snnrt: warning: threshold " << a.threshold
                  << " also removes neurons that fired; re-validate accuracy before deploying\n";
    }
    const snn::PrunePlan plan = snn::select_prunable(profile, net, a.threshold, agg);
    const snn::Network pruned = snn::prune_network(net, plan);
    snn::save_model_file(pruned, a.out);
    if (!a.plan_out.empty()) {
        write_text(a.plan_out, snn::plan_to_json(plan));
    }
    if (plan.empty()) {
        std::cout << "nothing to prune\n";
        return 0;
    }

    std::size_t channels = 0;
    std::size_t channel_total = 0;
    std::size_t neurons = 0;
    std::size_t neuron_total = 0;
    for (const auto& lp : plan.layers) {
        const bool conv = lp.kind == snn::PruneKind::conv_channels;
        (conv ? channels : neurons) += lp.remove.size();
        (conv ? channel_total : neuron_total) += lp.group_count;
        std::cout << "layer " << lp.layer_index << ": removed " << lp.remove.size() << "/" << lp.group_count
                  << (conv ? " channels" : " neurons") << " of " << snn::layer_type_name(net.layers[lp.source_layer])
                  << " layer " << lp.source_layer << "\n";
    }

    const snn::MacReport before = snn::mac_count(net);
    const snn::MacReport after = snn::mac_count(pruned);
    const auto mem_before = snn::estimate_memory(net).total_bytes;
    const auto mem_after = snn::estimate_memory(pruned).total_bytes;
    std::string line = "removed";
    if (channel_total) {
        line += " " + std::to_string(channels) + "/" + std::to_string(channel_total) + " channels";
    }
    if (neuron_total) {
        line += std::string(channel_total ? "," : "") + " " + std::to_string(neurons) + "/" +
                std::to_string(neuron_total) + " neurons";
    }
    if (before.conv_macs) {
        line += ", conv MACs " + reduction(before.conv_macs, after.conv_macs);
    }
    if (before.linear_macs) {
        line += ", linear MACs " + reduction(before.linear_macs, after.linear_macs);
    }
    line += ", total MACs " + reduction(before.total_macs, after.total_macs);
    line += ", memory " + reduction(mem_before, mem_after);
    std::cout << line << "\n";
    return 0;
}

// ---- bench

struct BenchArgs {
    std::string model;
    std::string events;
    std::string compare;
    std::size_t runs = snn::default_bench_runs;
    Format format = Format::table;
    std::string label;
    bool per_layer = false;
    FrameSettings frames;
};

json comparison_json(const snn::Comparison& c)
{
    return {{"speedup", c.speedup},
            {"mac_ratio", c.mac_ratio},
            {"memory_ratio", c.memory_ratio},
            {"latency_delta_s", c.latency_delta_s},
            {"mac_delta", c.mac_delta},
            {"memory_delta_bytes", c.memory_delta_bytes}};
}

int cmd_bench(const BenchArgs& a)
{
    if (a.runs == 0) {
        throw UsageError("--runs must be at least 1");
    }
    const snn::Network net = load_checked_model(a.model);
    require_file(a.events);
    const snn::FrameSequence frames = frames_for(net, a.events, a.frames);

    snn::BenchOptions opt;
    opt.runs = a.runs;
    opt.per_layer = a.per_layer;
    opt.label = a.label.empty() ? fs::path(a.model).stem().string() : a.label;
    const snn::BenchReport base = snn::bench_inference(net, frames, opt);

    std::optional<snn::BenchReport> other;
    if (!a.compare.empty()) {
        const snn::Network net2 = load_checked_model(a.compare);
        snn::BenchOptions opt2 = opt;
        opt2.label = fs::path(a.compare).stem().string();
        other = snn::bench_inference(net2, frames_for(net2, a.events, a.frames), opt2);
    }

    switch (a.format) {
    case Format::json:
        if (other) {
            const snn::Comparison c = snn::compare_reports(base, *other);
            json doc{{"baseline", json::parse(snn::report_to_json(base))},
                     {"candidate", json::parse(snn::report_to_json(*other))},
                     {"comparison", comparison_json(c)}};
            std::cout << doc.dump(2) << "\n";
        } else {
            std::cout << snn::report_to_json(base) << "\n";
        }
        break;
    case Format::csv:
        std::cout << snn::report_csv_header() << snn::report_to_csv_row(base);
        if (other) {
            std::cout << snn::report_to_csv_row(*other);
        }
        break;
    case Format::table:
        std::cout << snn::report_to_table(base);
        if (other) {
            std::cout << "\n"
                      << snn::report_to_table(*other) << "\n"
                      << snn::comparison_to_table(base, *other, snn::compare_reports(base, *other));
        }
        break;
    }
    return 0;
}

std::string one_line(std::string s)
{
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

void add_frame_flags(CLI::App* cmd, FrameSettings& s)
{
    cmd->add_option("--frames", s.frames, "Time bins per sample (default: the model's num_steps)")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--binarize", s.binarize, "Clamp frame cells to 0/1");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spiking network inference and activity-based pruning"};
    app.name("snnrt");
    app.require_subcommand(1);

    Format format = Format::table;
    const auto add_format = [&](CLI::App* cmd) {
        cmd->add_option("--format", format, "Output format: table, json or csv")
            ->transform(CLI::CheckedTransformer(format_names, CLI::ignore_case));
    };

    std::string validate_model;
    auto* validate = app.add_subcommand("validate", "Check a model file and print its shape trace");
    validate->add_option("model", validate_model, "Model JSON")->required();
    add_format(validate);

    ConvertArgs convert_args;
    auto* convert = app.add_subcommand("convert", "Bin an event file into frames and dump them as JSON");
    convert->add_option("events", convert_args.events, "N-MNIST .bin or t,x,y,p .csv")->required();
    convert->add_option("--frames", convert_args.frames, "Number of time bins")->check(CLI::PositiveNumber);
    convert->add_option("-o,--out", convert_args.out, "Output file (default: stdout)");
    convert->add_option("--sensor", convert_args.sensor, "Sensor grid HxW for CSV input");
    convert->add_flag("--binarize", convert_args.binarize, "Clamp frame cells to 0/1");
    convert->add_flag("--merge-polarity", convert_args.merge_polarity, "Sum both polarities into one channel");
    convert->add_option("--bin-width-us", convert_args.bin_width_us, "Fixed bin width instead of duration/frames")
        ->check(CLI::PositiveNumber);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Classify one event file or every file in a directory");
    run->add_option("--model", run_args.model, "Model JSON")->required();
    run->add_option("--events", run_args.events, "Event file or directory")->required();
    run->add_option("--dump-raster", run_args.raster, "Write step,layer_index,neuron_index for every spike");
    add_frame_flags(run, run_args.frames);
    add_format(run);

    ProfileArgs profile_args;
    auto* profile = app.add_subcommand("profile", "Count spikes per neuron over a dataset directory");
    profile->add_option("--model", profile_args.model, "Model JSON")->required();
    profile->add_option("--dataset", profile_args.dataset, "Directory of .bin/.csv samples")->required();
    profile->add_option("--out", profile_args.out, "Profile JSON to write")->required();
    profile->add_option("--jobs", profile_args.jobs, "Worker threads")->check(CLI::PositiveNumber);
    add_frame_flags(profile, profile_args.frames);

    PruneArgs prune_args;
    auto* prune = app.add_subcommand("prune", "Remove channels and neurons whose activity is at most the threshold");
    prune->add_option("--model", prune_args.model, "Model JSON")->required();
    prune->add_option("--profile", prune_args.profile, "Profile JSON from 'profile'")->required();
    prune->add_option("--threshold", prune_args.threshold, "Spike count threshold (0 keeps outputs exact)");
    prune->add_option("--out", prune_args.out, "Pruned model JSON to write")->required();
    prune->add_option("--plan-out", prune_args.plan_out, "Prune plan JSON to write");
    prune->add_option("--aggregate", prune_args.aggregate, "Group activity: sum or max")
        ->check(CLI::IsMember({"sum", "max"}));

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "Time repeated inference on one sample");
    bench->add_option("--model", bench_args.model, "Model JSON")->required();
    bench->add_option("--events", bench_args.events, "Event file")->required();
    bench->add_option("--compare", bench_args.compare, "Second model to time on the same sample");
    bench->add_option("--runs", bench_args.runs, "Timed runs after one warm-up");
    bench->add_option("--label", bench_args.label, "Report label (default: model file stem)");
    bench->add_flag("--per-layer", bench_args.per_layer, "Also time each layer");
    add_frame_flags(bench, bench_args.frames);
    add_format(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "snnrt: error: " << one_line(e.what()) << "\n";
        return 2;
    }

    try {
        if (*validate) {
            return cmd_validate(validate_model, format);
        }
        if (*convert) {
            return cmd_convert(convert_args);
        }
        if (*run) {
            run_args.format = format;
            return cmd_run(run_args);
        }
        if (*profile) {
            return cmd_profile(profile_args);
        }
        if (*prune) {
            return cmd_prune(prune_args);
        }
        if (*bench) {
            bench_args.format = format;
            return cmd_bench(bench_args);
        }
    } catch (const UsageError& e) {
        std::cerr << "snnrt: error: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const snn::ArgumentError& e) {
        std::cerr << "snnrt: error: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "snnrt: error: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
