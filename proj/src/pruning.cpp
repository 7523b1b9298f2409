#include "snn/pruning.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <thread>

#include <json.hpp>

namespace snn {

namespace {

using json = nlohmann::json;

class SpikeCounter : public LayerObserver {
public:
    explicit SpikeCounter(const Network& net, const ShapeTrace& trace)
    {
        counts_.resize(net.layers.size());
        for (std::size_t i = 0; i < net.layers.size(); ++i) {
            if (std::holds_alternative<LifSpec>(net.layers[i])) {
                counts_[i].assign(trace[i].output.element_count(), 0);
            }
        }
    }

    void on_layer_output(std::size_t, std::size_t layer_index, const Layer& layer,
                         std::span<const float> output) override
    {
        if (!std::holds_alternative<LifSpec>(layer)) {
            return;
        }
        auto& c = counts_[layer_index];
        for (std::size_t n = 0; n < output.size(); ++n) {
            c[n] += output[n] != 0.0f ? 1 : 0;
        }
    }

    std::vector<std::vector<std::uint64_t>> counts_;
};

const char* kind_name(PruneKind k) { return k == PruneKind::conv_channels ? "conv_channels" : "neurons"; }
const char* input_kind_name(InputKind k)
{
    return k == InputKind::conv_input_channels ? "conv_input_channels" : "linear_columns";
}

std::optional<PrunableSite> site_for(const Network& net, const ShapeTrace& trace, std::size_t lif)
{
    const std::size_t n = net.layers.size();
    if (lif + 1 >= n || !std::holds_alternative<LifSpec>(net.layers[lif])) {
        return std::nullopt;
    }

    std::size_t src = lif;
    do {
        if (src == 0) {
            return std::nullopt;
        }
        --src;
    } while (std::holds_alternative<MaxPool2dSpec>(net.layers[src]));

    PrunableSite site;
    site.lif_layer = lif;
    site.source_layer = src;
    const std::size_t neurons = trace[lif].output.element_count();
    if (const auto* c = std::get_if<Conv2dSpec>(&net.layers[src])) {
        site.kind = PruneKind::conv_channels;
        site.group_count = c->out_channels;
        site.neurons_per_group = neurons / c->out_channels;
    } else if (const auto* l = std::get_if<LinearSpec>(&net.layers[src])) {
        site.kind = PruneKind::neurons;
        site.group_count = l->out_features;
        site.neurons_per_group = 1;
    } else {
        return std::nullopt;
    }

    std::size_t dst = lif + 1;
    std::optional<std::size_t> flatten_at;
    while (dst < n && (std::holds_alternative<MaxPool2dSpec>(net.layers[dst]) ||
                       std::holds_alternative<FlattenSpec>(net.layers[dst]))) {
        if (std::holds_alternative<FlattenSpec>(net.layers[dst]) && !flatten_at) {
            flatten_at = dst;
        }
        ++dst;
    }
    if (dst >= n) {
        return std::nullopt;
    }
    site.consumer_layer = dst;
    if (std::holds_alternative<Conv2dSpec>(net.layers[dst])) {
        if (site.kind != PruneKind::conv_channels) {
            return std::nullopt;
        }
        site.consumer_kind = InputKind::conv_input_channels;
    } else if (std::holds_alternative<LinearSpec>(net.layers[dst])) {
        site.consumer_kind = InputKind::linear_columns;
        if (site.kind == PruneKind::conv_channels) {
            if (!flatten_at) {
                return std::nullopt;
            }
            // Flatten is channel-major, so each channel owns one contiguous block of columns.
            site.columns_per_group = trace[*flatten_at].input.element_count() / site.group_count;
        }
    } else {
        return std::nullopt;
    }
    return site;
}

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

std::vector<std::size_t> keep_list(std::size_t count, const std::set<std::size_t>& removed)
{
    std::vector<std::size_t> keep;
    keep.reserve(count - removed.size());
    for (std::size_t i = 0; i < count; ++i) {
        if (!removed.contains(i)) {
            keep.push_back(i);
        }
    }
    return keep;
}

} // namespace

const LayerSpikeCounts* SpikeProfile::find(std::size_t layer_index) const
{
    for (const auto& l : layers) {
        if (l.layer_index == layer_index) {
            return &l;
        }
    }
    return nullptr;
}

SpikeProfile profile_spikes(const Network& net, std::span<const FrameSequence> dataset, std::size_t jobs)
{
    if (dataset.empty()) {
        throw ArgumentError("profiling needs at least one sample");
    }
    const ShapeTrace trace = validate(net);
    jobs = std::clamp<std::size_t>(jobs, 1, dataset.size());

    std::vector<SpikeCounter> counters;
    counters.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) {
        counters.emplace_back(net, trace);
    }

    const auto work = [&](std::size_t j) {
        Engine engine(net);
        const std::size_t begin = dataset.size() * j / jobs;
        const std::size_t end = dataset.size() * (j + 1) / jobs;
        for (std::size_t s = begin; s < end; ++s) {
            engine.run(dataset[s], &counters[j]);
        }
    };

    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::exception_ptr> errors(jobs);
        std::vector<std::jthread> threads;
        for (std::size_t j = 0; j < jobs; ++j) {
            threads.emplace_back([&, j] {
                try {
                    work(j);
                } catch (...) {
                    errors[j] = std::current_exception();
                }
            });
        }
        threads.clear();
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    SpikeProfile profile;
    profile.samples_profiled = dataset.size();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!std::holds_alternative<LifSpec>(net.layers[i])) {
            continue;
        }
        LayerSpikeCounts layer{i, counters[0].counts_[i]};
        for (std::size_t j = 1; j < jobs; ++j) {
            for (std::size_t n = 0; n < layer.counts.size(); ++n) {
                layer.counts[n] += counters[j].counts_[i][n];
            }
        }
        profile.layers.push_back(std::move(layer));
    }
    return profile;
}

std::string profile_to_json(const SpikeProfile& profile)
{
    json j;
    j["samples_profiled"] = profile.samples_profiled;
    j["layers"] = json::array();
    for (const auto& l : profile.layers) {
        j["layers"].push_back({{"layer_index", l.layer_index}, {"counts", l.counts}});
    }
    return j.dump();
}

SpikeProfile profile_from_json(std::string_view text)
{
    try {
        const json j = json::parse(text);
        SpikeProfile p;
        p.samples_profiled = j.at("samples_profiled").get<std::uint64_t>();
        for (const auto& l : j.at("layers")) {
            p.layers.push_back({l.at("layer_index").get<std::size_t>(), l.at("counts").get<std::vector<std::uint64_t>>()});
        }
        return p;
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed profile JSON: ") + e.what());
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid profile JSON: ") + e.what());
    }
}

std::vector<PrunableSite> prunable_sites(const Network& net)
{
    const ShapeTrace trace = validate(net);
    std::vector<PrunableSite> sites;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (auto s = site_for(net, trace, i)) {
            sites.push_back(*s);
        }
    }
    return sites;
}

PrunePlan select_prunable(const SpikeProfile& profile, const Network& net, std::uint64_t threshold,
                          Aggregation aggregation)
{
    const ShapeTrace trace = validate(net);
    std::size_t lif_layers = 0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!std::holds_alternative<LifSpec>(net.layers[i])) {
            continue;
        }
        ++lif_layers;
        const LayerSpikeCounts* counts = profile.find(i);
        if (counts == nullptr || counts->counts.size() != trace[i].output.element_count()) {
            throw ArgumentError("profile does not match network at layer " + std::to_string(i));
        }
    }
    if (profile.layers.size() != lif_layers) {
        throw ArgumentError("profile has " + std::to_string(profile.layers.size()) + " layers, network has " +
                            std::to_string(lif_layers) + " lif layers");
    }

    std::vector<GroupRemoval> removals;
    for (const PrunableSite& site : prunable_sites(net)) {
        const auto& counts = profile.find(site.lif_layer)->counts;
        GroupRemoval r{site.lif_layer, {}};
        for (std::size_t g = 0; g < site.group_count; ++g) {
            std::uint64_t activity = 0;
            for (std::size_t k = 0; k < site.neurons_per_group; ++k) {
                const std::uint64_t c = counts[g * site.neurons_per_group + k];
                activity = aggregation == Aggregation::sum ? activity + c : std::max(activity, c);
            }
            if (activity <= threshold) {
                r.remove.push_back(g);
            }
        }
        if (!r.remove.empty()) {
            removals.push_back(std::move(r));
        }
    }

    PrunePlan plan = make_plan(net, removals);
    plan.threshold = threshold;
    plan.samples_profiled = profile.samples_profiled;
    return plan;
}

PrunePlan make_plan(const Network& net, std::span<const GroupRemoval> removals)
{
    const ShapeTrace trace = validate(net);
    PrunePlan plan;
    std::set<std::size_t> seen;
    for (const GroupRemoval& r : removals) {
        const auto site = site_for(net, trace, r.lif_layer);
        if (!site) {
            throw PlanError("layer " + std::to_string(r.lif_layer) + " is not a prunable lif layer");
        }
        if (!seen.insert(r.lif_layer).second) {
            throw PlanError("layer " + std::to_string(r.lif_layer) + " appears twice in the plan");
        }
        LayerPrune lp;
        lp.layer_index = site->lif_layer;
        lp.source_layer = site->source_layer;
        lp.kind = site->kind;
        lp.group_count = site->group_count;
        lp.remove = sorted_unique(r.remove);
        if (lp.remove.empty()) {
            continue;
        }
        if (lp.remove.back() >= site->group_count) {
            throw PlanError("layer " + std::to_string(r.lif_layer) + ": index " + std::to_string(lp.remove.back()) +
                            " out of range (" + std::to_string(site->group_count) + " groups)");
        }
        if (lp.remove.size() == site->group_count) {
            throw PlanError("pruning would remove all " + std::to_string(site->group_count) + " " +
                            (site->kind == PruneKind::conv_channels ? "channels" : "neurons") + " of layer " +
                            std::to_string(site->source_layer) + " (" +
                            std::string(layer_type_name(net.layers[site->source_layer])) + ", feeding lif layer " +
                            std::to_string(site->lif_layer) + ")");
        }
        lp.downstream.layer_index = site->consumer_layer;
        lp.downstream.kind = site->consumer_kind;
        for (std::size_t g : lp.remove) {
            for (std::size_t k = 0; k < site->columns_per_group; ++k) {
                lp.downstream.remove.push_back(g * site->columns_per_group + k);
            }
        }
        plan.layers.push_back(std::move(lp));
    }
    std::sort(plan.layers.begin(), plan.layers.end(),
              [](const LayerPrune& a, const LayerPrune& b) { return a.layer_index < b.layer_index; });
    return plan;
}

Network prune_network(const Network& net, const PrunePlan& plan)
{
    const ShapeTrace trace = validate(net);

    // Re-deriving catches plans built for a different network.
    std::vector<GroupRemoval> removals;
    for (const auto& lp : plan.layers) {
        removals.push_back({lp.layer_index, lp.remove});
    }
    const PrunePlan checked = make_plan(net, removals);
    for (std::size_t i = 0; i < checked.layers.size(); ++i) {
        const LayerPrune& a = checked.layers[i];
        const auto it = std::find_if(plan.layers.begin(), plan.layers.end(),
                                     [&](const LayerPrune& p) { return p.layer_index == a.layer_index; });
        if (it->source_layer != a.source_layer || it->kind != a.kind || it->downstream != a.downstream) {
            throw PlanError("plan does not match the network at layer " + std::to_string(a.layer_index));
        }
    }

    std::vector<std::set<std::size_t>> drop_out(net.layers.size());
    std::vector<std::set<std::size_t>> drop_in(net.layers.size());
    for (const auto& lp : checked.layers) {
        drop_out[lp.source_layer].insert(lp.remove.begin(), lp.remove.end());
        drop_in[lp.downstream.layer_index].insert(lp.downstream.remove.begin(), lp.downstream.remove.end());
    }

    Network out = net;
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
        if (drop_out[li].empty() && drop_in[li].empty()) {
            continue;
        }
        if (auto* c = std::get_if<Conv2dSpec>(&out.layers[li])) {
            const auto keep_o = keep_list(c->out_channels, drop_out[li]);
            const auto keep_i = keep_list(c->in_channels, drop_in[li]);
            const std::size_t taps = c->kernel[0] * c->kernel[1];
            const auto w = c->weights.data();
            const auto b = c->bias.data();
            std::vector<float> nw;
            std::vector<float> nb;
            nw.reserve(keep_o.size() * keep_i.size() * taps);
            for (std::size_t o : keep_o) {
                nb.push_back(b[o]);
                for (std::size_t i : keep_i) {
                    const auto first = w.begin() + static_cast<std::ptrdiff_t>((o * c->in_channels + i) * taps);
                    nw.insert(nw.end(), first, first + static_cast<std::ptrdiff_t>(taps));
                }
            }
            c->out_channels = keep_o.size();
            c->in_channels = keep_i.size();
            c->weights = Tensor::from_data(Shape{c->out_channels, c->in_channels, c->kernel[0], c->kernel[1]}, std::move(nw));
            c->bias = Tensor::from_data(Shape{c->out_channels}, std::move(nb));
        } else if (auto* l = std::get_if<LinearSpec>(&out.layers[li])) {
            const auto keep_o = keep_list(l->out_features, drop_out[li]);
            const auto keep_i = keep_list(l->in_features, drop_in[li]);
            const auto w = l->weights.data();
            const auto b = l->bias.data();
            std::vector<float> nw;
            std::vector<float> nb;
            nw.reserve(keep_o.size() * keep_i.size());
            for (std::size_t o : keep_o) {
                nb.push_back(b[o]);
                for (std::size_t i : keep_i) {
                    nw.push_back(w[o * l->in_features + i]);
                }
            }
            l->out_features = keep_o.size();
            l->in_features = keep_i.size();
            l->weights = Tensor::from_data(Shape{l->out_features, l->in_features}, std::move(nw));
            l->bias = Tensor::from_data(Shape{l->out_features}, std::move(nb));
        } else {
            throw InternalError("layer " + std::to_string(li) + " selected for pruning has no weights");
        }
    }

    validate(out);
    return out;
}

std::string plan_to_json(const PrunePlan& plan)
{
    json j;
    j["threshold"] = plan.threshold;
    j["samples_profiled"] = plan.samples_profiled;
    j["layers"] = json::array();
    for (const auto& lp : plan.layers) {
        j["layers"].push_back({
            {"layer_index", lp.layer_index},
            {"kind", kind_name(lp.kind)},
            {"remove", lp.remove},
            {"source_layer", lp.source_layer},
            {"group_count", lp.group_count},
            {"downstream",
             {{"layer_index", lp.downstream.layer_index},
              {"kind", input_kind_name(lp.downstream.kind)},
              {"remove", lp.downstream.remove}}},
        });
    }
    return j.dump(2);
}

PrunePlan plan_from_json(std::string_view text, const Network& net)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed plan JSON: ") + e.what());
    }
    try {
        std::vector<GroupRemoval> removals;
        std::vector<std::string> kinds;
        for (const auto& l : j.at("layers")) {
            removals.push_back({l.at("layer_index").get<std::size_t>(), l.at("remove").get<std::vector<std::size_t>>()});
            kinds.push_back(l.at("kind").get<std::string>());
        }
        PrunePlan plan = make_plan(net, removals);
        for (std::size_t i = 0; i < plan.layers.size(); ++i) {
            const auto it = std::find_if(removals.begin(), removals.end(), [&](const GroupRemoval& r) {
                return r.lif_layer == plan.layers[i].layer_index;
            });
            if (kinds[static_cast<std::size_t>(it - removals.begin())] != kind_name(plan.layers[i].kind)) {
                throw PlanError("plan kind does not match the network at layer " +
                                std::to_string(plan.layers[i].layer_index));
            }
        }
        plan.threshold = j.value("threshold", std::uint64_t{0});
        plan.samples_profiled = j.value("samples_profiled", std::uint64_t{0});
        return plan;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("invalid plan JSON: ") + e.what());
    }
}

MacReport mac_count(const Network& net)
{
    const ShapeTrace trace = validate(net);
    MacReport report;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        LayerOps ops{i, 0, 0};
        const Shape& out = trace[i].output;
        if (const auto* c = std::get_if<Conv2dSpec>(&net.layers[i])) {
            ops.macs = std::uint64_t{out.element_count()} * c->in_channels * c->kernel[0] * c->kernel[1];
            report.conv_macs += ops.macs;
        } else if (const auto* l = std::get_if<LinearSpec>(&net.layers[i])) {
            ops.macs = std::uint64_t{l->out_features} * l->in_features;
            report.linear_macs += ops.macs;
        } else if (const auto* p = std::get_if<MaxPool2dSpec>(&net.layers[i])) {
            ops.other_ops = std::uint64_t{out.element_count()} * p->kernel[0] * p->kernel[1];
        } else if (std::holds_alternative<LifSpec>(net.layers[i])) {
            ops.other_ops = out.element_count();
        }
        report.total_macs += ops.macs;
        report.layers.push_back(ops);
    }
    return report;
}

} // namespace snn
