#include "snn/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace snn {

namespace {

using json = nlohmann::json;

// Forwards to nlohmann's DOM builder, except that floating-point tokens are
// re-parsed as float32 from their source text. Going through double first can
// double-round, so weights would not reload bit-exactly.
class Float32Sax {
public:
    explicit Float32Sax(json& root) : dom_(root, true) {}

    bool null() { return dom_.null(); }
    bool boolean(bool v) { return dom_.boolean(v); }
    bool number_integer(json::number_integer_t v) { return dom_.number_integer(v); }
    bool number_unsigned(json::number_unsigned_t v) { return dom_.number_unsigned(v); }
    bool number_float(json::number_float_t v, const json::string_t& text)
    {
        float f = 0.0f;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), f);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(f)) {
            return dom_.number_float(v, text);  // out of float range; rejected later as non-finite
        }
        return dom_.number_float(static_cast<double>(f), text);
    }
    bool string(json::string_t& v) { return dom_.string(v); }
    bool binary(json::binary_t& v) { return dom_.binary(v); }
    bool start_object(std::size_t n) { return dom_.start_object(n); }
    bool key(json::string_t& v) { return dom_.key(v); }
    bool end_object() { return dom_.end_object(); }
    bool start_array(std::size_t n) { return dom_.start_array(n); }
    bool end_array() { return dom_.end_array(); }
    template <class Exception>
    bool parse_error(std::size_t pos, const std::string& token, const Exception& ex)
    {
        return dom_.parse_error(pos, token, ex);
    }

private:
    nlohmann::detail::json_sax_dom_parser<json> dom_;
};

class LayerReader {
public:
    LayerReader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {}

    [[noreturn]] void fail(const std::string& field, const std::string& what) const
    {
        throw SchemaError(where_ + ": field '" + field + "': " + what);
    }

    void allow_only(std::initializer_list<std::string_view> fields) const
    {
        for (const auto& [k, v] : obj_.items()) {
            bool known = false;
            for (auto f : fields) {
                known = known || k == f;
            }
            if (!known) {
                throw SchemaError(where_ + ": unknown field '" + k + "'");
            }
        }
    }

    bool has(const std::string& field) const { return obj_.contains(field); }

    const json& require(const std::string& field) const
    {
        const auto it = obj_.find(field);
        if (it == obj_.end()) {
            throw SchemaError(where_ + ": missing field '" + field + "'");
        }
        return *it;
    }

    std::size_t count(const std::string& field) const { return as_count(require(field), field); }

    std::size_t as_count(const json& v, const std::string& field) const
    {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            fail(field, "expected a non-negative integer");
        }
        return v.get<std::size_t>();
    }

    Pair pair(const std::string& field) const
    {
        const json& v = require(field);
        if (!v.is_array() || v.size() != 2) {
            fail(field, "expected an array of two integers");
        }
        return {as_count(v[0], field), as_count(v[1], field)};
    }

    float number(const json& v, const std::string& field) const
    {
        if (!v.is_number()) {
            fail(field, "expected a number");
        }
        const double d = v.get<double>();
        const float f = static_cast<float>(d);
        if (!std::isfinite(f)) {
            fail(field, "value is not a finite float32");
        }
        return f;
    }

    float number(const std::string& field) const { return number(require(field), field); }

    Tensor tensor(const std::string& field, const Shape& shape) const
    {
        const json& v = require(field);
        if (!v.is_array()) {
            fail(field, "expected an array of numbers");
        }
        if (v.size() != shape.element_count()) {
            fail(field, "expected " + std::to_string(shape.element_count()) + " values for shape " +
                            shape.to_string() + ", got " + std::to_string(v.size()));
        }
        std::vector<float> data;
        data.reserve(v.size());
        for (const json& e : v) {
            data.push_back(number(e, field));
        }
        return Tensor::from_data(shape, std::move(data));
    }

private:
    const json& obj_;
    std::string where_;
};

Shape checked_shape(const LayerReader& r, const std::string& field, std::vector<std::size_t> dims)
{
    try {
        return Shape(std::move(dims));
    } catch (const ShapeError& e) {
        r.fail(field, e.what());
    }
}

Layer read_layer(const json& obj, std::size_t index)
{
    if (!obj.is_object()) {
        throw SchemaError("layer " + std::to_string(index) + ": expected an object");
    }
    const auto type_it = obj.find("type");
    if (type_it == obj.end() || !type_it->is_string()) {
        throw SchemaError("layer " + std::to_string(index) + ": missing string field 'type'");
    }
    const std::string type = type_it->get<std::string>();
    const LayerReader r(obj, "layer " + std::to_string(index) + " (" + type + ")");

    if (type == "conv2d") {
        r.allow_only({"type", "in_channels", "out_channels", "kernel", "stride", "padding", "weights", "bias"});
        Conv2dSpec c;
        c.in_channels = r.count("in_channels");
        c.out_channels = r.count("out_channels");
        c.kernel = r.pair("kernel");
        c.stride = r.has("stride") ? r.pair("stride") : Pair{1, 1};
        c.padding = r.has("padding") ? r.pair("padding") : Pair{0, 0};
        if (c.stride[0] == 0 || c.stride[1] == 0) {
            r.fail("stride", "components must be >= 1");
        }
        c.weights = r.tensor("weights", checked_shape(r, "weights", {c.out_channels, c.in_channels, c.kernel[0], c.kernel[1]}));
        c.bias = r.tensor("bias", checked_shape(r, "bias", {c.out_channels}));
        return c;
    }
    if (type == "linear") {
        r.allow_only({"type", "in_features", "out_features", "weights", "bias"});
        LinearSpec l;
        l.in_features = r.count("in_features");
        l.out_features = r.count("out_features");
        l.weights = r.tensor("weights", checked_shape(r, "weights", {l.out_features, l.in_features}));
        l.bias = r.tensor("bias", checked_shape(r, "bias", {l.out_features}));
        return l;
    }
    if (type == "maxpool2d") {
        r.allow_only({"type", "kernel", "stride"});
        MaxPool2dSpec p;
        p.kernel = r.pair("kernel");
        p.stride = r.has("stride") ? r.pair("stride") : p.kernel;
        if (p.kernel[0] == 0 || p.kernel[1] == 0) {
            r.fail("kernel", "components must be >= 1");
        }
        if (p.stride[0] == 0 || p.stride[1] == 0) {
            r.fail("stride", "components must be >= 1");
        }
        return p;
    }
    if (type == "lif") {
        r.allow_only({"type", "beta", "threshold", "reset"});
        LifSpec l;
        l.beta = r.number("beta");
        if (r.has("threshold")) {
            l.threshold = r.number("threshold");
        }
        if (r.has("reset")) {
            const json& v = r.require("reset");
            if (v == "subtract") {
                l.reset = ResetMode::subtract;
            } else if (v == "zero") {
                l.reset = ResetMode::zero;
            } else {
                r.fail("reset", "expected \"subtract\" or \"zero\"");
            }
        }
        if (!(l.beta >= 0.0f && l.beta <= 1.0f)) {
            r.fail("beta", "must lie in [0,1]");
        }
        if (!(l.threshold > 0.0f)) {
            r.fail("threshold", "must be > 0");
        }
        return l;
    }
    if (type == "flatten") {
        r.allow_only({"type"});
        return FlattenSpec{};
    }
    throw SchemaError("layer " + std::to_string(index) + ": unknown layer type '" + type + "'");
}

void append_float(std::string& out, float f)
{
    if (!std::isfinite(f)) {
        throw ValidationError("cannot serialize non-finite value");
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), f);
    std::string_view s(buf, static_cast<std::size_t>(res.ptr - buf));
    out += s;
    // "-0" would be read back as the integer 0 and lose its sign.
    if (s == "-0") {
        out += ".0";
    }
}

void append_count(std::string& out, std::size_t v)
{
    char buf[24];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

void append_pair(std::string& out, const char* key, const Pair& p)
{
    out += ",\"";
    out += key;
    out += "\":[";
    append_count(out, p[0]);
    out += ',';
    append_count(out, p[1]);
    out += ']';
}

void append_floats(std::string& out, const char* key, std::span<const float> values)
{
    out += ",\"";
    out += key;
    out += "\":[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i != 0) {
            out += ',';
        }
        append_float(out, values[i]);
    }
    out += ']';
}

void append_layer(std::string& out, const Layer& layer)
{
    out += "{\"type\":\"";
    out += layer_type_name(layer);
    out += '"';
    if (const auto* c = std::get_if<Conv2dSpec>(&layer)) {
        out += ",\"in_channels\":";
        append_count(out, c->in_channels);
        out += ",\"out_channels\":";
        append_count(out, c->out_channels);
        append_pair(out, "kernel", c->kernel);
        append_pair(out, "stride", c->stride);
        append_pair(out, "padding", c->padding);
        append_floats(out, "weights", c->weights.data());
        append_floats(out, "bias", c->bias.data());
    } else if (const auto* l = std::get_if<LinearSpec>(&layer)) {
        out += ",\"in_features\":";
        append_count(out, l->in_features);
        out += ",\"out_features\":";
        append_count(out, l->out_features);
        append_floats(out, "weights", l->weights.data());
        append_floats(out, "bias", l->bias.data());
    } else if (const auto* p = std::get_if<MaxPool2dSpec>(&layer)) {
        append_pair(out, "kernel", p->kernel);
        append_pair(out, "stride", p->stride);
    } else if (const auto* lif = std::get_if<LifSpec>(&layer)) {
        out += ",\"beta\":";
        append_float(out, lif->beta);
        out += ",\"threshold\":";
        append_float(out, lif->threshold);
        out += lif->reset == ResetMode::subtract ? ",\"reset\":\"subtract\"" : ",\"reset\":\"zero\"";
    }
    out += '}';
}

} // namespace

Network load_model(std::string_view text)
{
    json doc;
    try {
        Float32Sax sax(doc);
        json::sax_parse(text.begin(), text.end(), &sax);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed model JSON: ") + e.what());
    }

    if (!doc.is_object()) {
        throw SchemaError("model document must be a JSON object");
    }
    const LayerReader top(doc, "model");
    top.allow_only({"format_version", "input_shape", "num_steps", "layers"});

    Network net;
    const json& version = top.require("format_version");
    if (!version.is_number_integer()) {
        top.fail("format_version", "expected an integer");
    }
    net.format_version = version.get<int>();
    if (net.format_version != Network::current_format_version) {
        top.fail("format_version", "unsupported version " + std::to_string(net.format_version));
    }

    const json& input = top.require("input_shape");
    if (!input.is_array() || input.size() != 3) {
        top.fail("input_shape", "expected [C,H,W]");
    }
    net.input_shape = checked_shape(top, "input_shape",
                                    {top.as_count(input[0], "input_shape"), top.as_count(input[1], "input_shape"),
                                     top.as_count(input[2], "input_shape")});
    net.num_steps = top.count("num_steps");

    const json& layers = top.require("layers");
    if (!layers.is_array()) {
        top.fail("layers", "expected an array");
    }
    net.layers.reserve(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        net.layers.push_back(read_layer(layers[i], i));
    }

    validate(net);
    return net;
}

Network load_model_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArgumentError("cannot open model file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_model(ss.str());
}

std::string save_model(const Network& net)
{
    validate(net);

    std::string out;
    out += "{\n  \"format_version\": ";
    append_count(out, static_cast<std::size_t>(net.format_version));
    out += ",\n  \"input_shape\": [";
    for (std::size_t i = 0; i < net.input_shape.rank(); ++i) {
        if (i != 0) {
            out += ',';
        }
        append_count(out, net.input_shape[i]);
    }
    out += "],\n  \"num_steps\": ";
    append_count(out, net.num_steps);
    out += ",\n  \"layers\": [";
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        out += i == 0 ? "\n    " : ",\n    ";
        append_layer(out, net.layers[i]);
    }
    out += net.layers.empty() ? "]\n}\n" : "\n  ]\n}\n";
    return out;
}

void save_model_file(const Network& net, const std::string& path)
{
    const std::string text = save_model(net);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ArgumentError("cannot write model file '" + path + "'");
    }
    out << text;
}

} // namespace snn
