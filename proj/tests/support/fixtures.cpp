#include "fixtures.hpp"

#include <algorithm>
#include <cmath>

namespace snn::testing {

namespace {

enum class Role { dead, active, normal };

std::vector<Role> assign_roles(Rng& rng, std::size_t n)
{
    std::vector<Role> roles(n, Role::normal);
    for (auto& r : roles) {
        if (rng.chance(0.35f)) {
            r = Role::dead;
        }
    }
    roles[rng.index(n)] = Role::active;
    return roles;
}

LifSpec random_lif(Rng& rng)
{
    LifSpec l;
    l.beta = rng.uniform(0.3f, 0.95f);
    l.threshold = rng.uniform(0.5f, 1.5f);
    l.reset = rng.chance(0.5f) ? ResetMode::subtract : ResetMode::zero;
    return l;
}

// Weights for one output unit with `fan_in` inputs, following its role.
void fill_unit(Rng& rng, Role role, float threshold, std::span<float> w, float& b)
{
    switch (role) {
    case Role::dead:
        for (float& v : w) {
            v = rng.uniform(-1.0f, 0.0f);
        }
        b = rng.uniform(-1.0f, -0.2f);
        break;
    case Role::active:
        for (float& v : w) {
            v = rng.uniform(0.0f, 0.3f);
        }
        b = threshold + 0.5f;
        break;
    case Role::normal:
        for (float& v : w) {
            v = rng.uniform(-0.4f, 0.6f);
        }
        b = rng.uniform(-0.3f, 0.3f);
        break;
    }
}

} // namespace

Tensor random_tensor(Rng& rng, const Shape& shape, float lo, float hi)
{
    std::vector<float> data(shape.element_count());
    for (float& v : data) {
        v = rng.uniform(lo, hi);
    }
    return Tensor::from_data(shape, std::move(data));
}

Conv2dSpec make_conv(Rng& rng, std::size_t in, std::size_t out, std::size_t k, float lo, float hi)
{
    Conv2dSpec c;
    c.in_channels = in;
    c.out_channels = out;
    c.kernel = {k, k};
    c.weights = random_tensor(rng, Shape{out, in, k, k}, lo, hi);
    c.bias = random_tensor(rng, Shape{out}, -0.1f, 0.1f);
    return c;
}

LinearSpec make_linear(Rng& rng, std::size_t in, std::size_t out, float lo, float hi)
{
    LinearSpec l;
    l.in_features = in;
    l.out_features = out;
    l.weights = random_tensor(rng, Shape{out, in}, lo, hi);
    l.bias = random_tensor(rng, Shape{out}, -0.1f, 0.1f);
    return l;
}

Network nmnist_reference_network(std::uint32_t seed)
{
    Rng rng(seed);
    Network net;
    net.input_shape = Shape{2, 34, 34};
    net.num_steps = 10;
    const LifSpec lif{0.5f, 1.0f, ResetMode::subtract};
    net.layers.push_back(make_conv(rng, 2, 12, 5, -0.15f, 0.35f));
    net.layers.push_back(lif);
    net.layers.push_back(MaxPool2dSpec{{2, 2}, {2, 2}});
    net.layers.push_back(make_conv(rng, 12, 32, 5, -0.1f, 0.1f));
    net.layers.push_back(lif);
    net.layers.push_back(MaxPool2dSpec{{2, 2}, {2, 2}});
    net.layers.push_back(FlattenSpec{});
    net.layers.push_back(make_linear(rng, 32 * 5 * 5, 10, -0.06f, 0.07f));
    net.layers.push_back(lif);
    return net;
}

EventStream synthetic_nmnist_stream(std::uint32_t seed, std::size_t events)
{
    Rng rng(seed);
    EventStream s;
    s.sensor = nmnist_sensor;
    s.events.reserve(events);
    const float two_pi = 6.2831853f;
    for (std::size_t k = 0; k < events; ++k) {
        const std::uint64_t t = k * 150;
        // Three saccades, each shifting the stimulus diagonally.
        const float shift = static_cast<float>((t / 100000) % 3) * 2.0f - 2.0f;
        const float angle = rng.uniform(0.0f, two_pi);
        const float radius = 9.0f + rng.uniform(-1.5f, 1.5f);
        const long x = std::lround(17.0f + shift + radius * std::cos(angle));
        const long y = std::lround(17.0f + shift + radius * std::sin(angle));
        Event e;
        e.t = t;
        e.x = static_cast<std::uint16_t>(std::clamp(x, 0L, 33L));
        e.y = static_cast<std::uint16_t>(std::clamp(y, 0L, 33L));
        e.polarity = rng.chance(0.5f) ? 1 : 0;
        s.events.push_back(e);
    }
    return s;
}

Network stmnist_dense_network(std::uint32_t seed)
{
    Rng rng(seed);
    Network net;
    net.input_shape = Shape{1, 10, 10};
    net.num_steps = 10;
    const LifSpec lif{0.5f, 1.0f, ResetMode::subtract};
    net.layers.push_back(FlattenSpec{});
    net.layers.push_back(make_linear(rng, 100, 128, -0.2f, 0.4f));
    net.layers.push_back(lif);
    net.layers.push_back(make_linear(rng, 128, 10, -0.2f, 0.3f));
    net.layers.push_back(lif);
    return net;
}

Network toy_filter_network()
{
    Network net;
    net.input_shape = Shape{1, 3, 3};
    net.num_steps = 4;

    // red, green, blue, gray
    const std::vector<float> fill = {-0.5f, 0.6f, -0.3f, 0.4f};
    const std::vector<float> bias = {-1.0f, 0.2f, -0.5f, 0.1f};
    std::vector<float> w;
    for (float v : fill) {
        w.insert(w.end(), 4, v);
    }
    Conv2dSpec conv;
    conv.in_channels = 1;
    conv.out_channels = 4;
    conv.kernel = {2, 2};
    conv.weights = Tensor::from_data(Shape{4, 1, 2, 2}, w);
    conv.bias = Tensor::from_data(Shape{4}, bias);

    LinearSpec head;
    head.in_features = 16;
    head.out_features = 2;
    std::vector<float> hw(32);
    for (std::size_t i = 0; i < 16; ++i) {
        hw[i] = (i % 2 == 0) ? 0.5f : 0.1f;
        hw[16 + i] = (i % 2 == 0) ? 0.1f : 0.5f;
    }
    head.weights = Tensor::from_data(Shape{2, 16}, hw);
    head.bias = Tensor::from_data(Shape{2}, {0.0f, 0.0f});

    const LifSpec lif{0.5f, 1.0f, ResetMode::subtract};
    net.layers = {conv, lif, FlattenSpec{}, head, lif};
    return net;
}

std::vector<FrameSequence> toy_filter_inputs()
{
    std::vector<FrameSequence> out;
    const std::vector<std::vector<float>> patterns = {
        {1, 0, 1, 0, 2, 0, 1, 0, 1},
        {0, 1, 0, 1, 1, 1, 0, 1, 0},
        {2, 2, 0, 0, 1, 0, 0, 2, 2},
    };
    for (const auto& p : patterns) {
        std::vector<float> frames;
        for (int t = 0; t < 4; ++t) {
            frames.insert(frames.end(), p.begin(), p.end());
        }
        out.push_back(FrameSequence{Tensor::from_data(Shape{4, 1, 3, 3}, frames), 1});
    }
    return out;
}

Network half_silent_network(std::uint32_t seed)
{
    Rng rng(seed);
    Network net;
    net.input_shape = Shape{2, 34, 34};
    net.num_steps = 10;
    const LifSpec lif{0.5f, 1.0f, ResetMode::subtract};

    const auto silence_even = [](Conv2dSpec& c) {
        const std::size_t per = c.in_channels * c.kernel[0] * c.kernel[1];
        auto w = c.weights.data();
        auto b = c.bias.data();
        for (std::size_t o = 0; o < c.out_channels; o += 2) {
            for (std::size_t k = 0; k < per; ++k) {
                w[o * per + k] = -std::abs(w[o * per + k]);
            }
            b[o] = -0.5f;
        }
    };

    Conv2dSpec c1 = make_conv(rng, 2, 16, 5, -0.1f, 0.3f);
    Conv2dSpec c2 = make_conv(rng, 16, 32, 5, -0.1f, 0.2f);
    silence_even(c1);
    silence_even(c2);
    net.layers.push_back(c1);
    net.layers.push_back(lif);
    net.layers.push_back(MaxPool2dSpec{{2, 2}, {2, 2}});
    net.layers.push_back(c2);
    net.layers.push_back(lif);
    net.layers.push_back(MaxPool2dSpec{{2, 2}, {2, 2}});
    net.layers.push_back(FlattenSpec{});
    net.layers.push_back(make_linear(rng, 32 * 5 * 5, 10, -0.06f, 0.07f));
    net.layers.push_back(lif);
    return net;
}

Network random_conv_snn(Rng& rng)
{
    Network net;
    const std::size_t c0 = rng.range(1, 3);
    std::size_t h = rng.range(6, 16);
    std::size_t w = rng.range(6, 16);
    net.input_shape = Shape{c0, h, w};
    net.num_steps = rng.range(3, 8);

    std::size_t channels = c0;
    const std::size_t blocks = rng.range(1, 3);
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t k = std::min<std::size_t>({rng.range(1, 3), h, w});
        const std::size_t pad = rng.chance(0.3f) ? 1 : 0;
        const std::size_t out = rng.range(2, 8);
        const LifSpec lif = random_lif(rng);

        Conv2dSpec c;
        c.in_channels = channels;
        c.out_channels = out;
        c.kernel = {k, k};
        c.padding = {pad, pad};
        std::vector<float> cw(out * channels * k * k);
        std::vector<float> cb(out);
        const auto roles = assign_roles(rng, out);
        const std::size_t per = channels * k * k;
        for (std::size_t o = 0; o < out; ++o) {
            fill_unit(rng, roles[o], lif.threshold, std::span<float>(cw).subspan(o * per, per), cb[o]);
        }
        c.weights = Tensor::from_data(Shape{out, channels, k, k}, cw);
        c.bias = Tensor::from_data(Shape{out}, cb);
        net.layers.push_back(c);
        h = window_output_extent(h, k, 1, pad);
        w = window_output_extent(w, k, 1, pad);
        channels = out;

        const bool can_pool = h >= 4 && w >= 4;
        const bool pool_first = can_pool && rng.chance(0.2f);
        if (pool_first) {
            net.layers.push_back(MaxPool2dSpec{{2, 2}, {2, 2}});
            h /= 2;
            w /= 2;
        }
        net.layers.push_back(lif);
        if (!pool_first && can_pool && rng.chance(0.5f)) {
            net.layers.push_back(MaxPool2dSpec{{2, 2}, {2, 2}});
            h /= 2;
            w /= 2;
        }
    }

    net.layers.push_back(FlattenSpec{});
    const std::size_t flat = channels * h * w;
    const std::size_t hidden = rng.range(3, 12);
    const LifSpec hidden_lif = random_lif(rng);
    LinearSpec l1;
    l1.in_features = flat;
    l1.out_features = hidden;
    std::vector<float> lw(hidden * flat);
    std::vector<float> lb(hidden);
    const auto roles = assign_roles(rng, hidden);
    for (std::size_t o = 0; o < hidden; ++o) {
        fill_unit(rng, roles[o], hidden_lif.threshold, std::span<float>(lw).subspan(o * flat, flat), lb[o]);
    }
    l1.weights = Tensor::from_data(Shape{hidden, flat}, lw);
    l1.bias = Tensor::from_data(Shape{hidden}, lb);
    net.layers.push_back(l1);
    net.layers.push_back(hidden_lif);

    net.layers.push_back(make_linear(rng, hidden, rng.range(2, 5), -0.5f, 1.0f));
    net.layers.push_back(random_lif(rng));
    return net;
}

Network random_small_network(Rng& rng)
{
    Network net;
    std::size_t c = rng.range(1, 3);
    std::size_t h = rng.range(1, 8);
    std::size_t w = rng.range(1, 8);
    net.input_shape = Shape{c, h, w};
    net.num_steps = rng.range(1, 10);

    const std::size_t total = rng.range(1, 4);
    bool flat = false;
    std::size_t features = 0;
    for (std::size_t i = 0; i + 1 < total; ++i) {
        if (flat) {
            if (rng.chance(0.7f)) {
                const std::size_t out = rng.range(1, 8);
                LinearSpec l = make_linear(rng, features, out, -1.0f, 1.0f);
                l.bias = random_tensor(rng, Shape{out}, -0.5f, 0.5f);
                net.layers.push_back(l);
                features = out;
            } else {
                net.layers.push_back(random_lif(rng));
            }
            continue;
        }
        switch (rng.index(4)) {
        case 0: {
            const std::size_t kh = rng.range(1, 3);
            const std::size_t kw = rng.range(1, 3);
            Conv2dSpec cv;
            cv.in_channels = c;
            cv.out_channels = rng.range(1, 8);
            cv.kernel = {kh, kw};
            cv.stride = {rng.range(1, 2), rng.range(1, 2)};
            cv.padding = {rng.range(0, 1), rng.range(0, 1)};
            const std::size_t ho = window_output_extent(h, kh, cv.stride[0], cv.padding[0]);
            const std::size_t wo = window_output_extent(w, kw, cv.stride[1], cv.padding[1]);
            if (ho == 0 || wo == 0) {
                net.layers.push_back(random_lif(rng));
                break;
            }
            cv.weights = random_tensor(rng, Shape{cv.out_channels, c, kh, kw}, -1.0f, 1.0f);
            cv.bias = random_tensor(rng, Shape{cv.out_channels}, -0.5f, 0.5f);
            net.layers.push_back(cv);
            c = cv.out_channels;
            h = ho;
            w = wo;
            break;
        }
        case 1: {
            MaxPool2dSpec p{{rng.range(1, 2), rng.range(1, 2)}, {rng.range(1, 2), rng.range(1, 2)}};
            const std::size_t ho = window_output_extent(h, p.kernel[0], p.stride[0], 0);
            const std::size_t wo = window_output_extent(w, p.kernel[1], p.stride[1], 0);
            if (ho == 0 || wo == 0) {
                net.layers.push_back(random_lif(rng));
                break;
            }
            net.layers.push_back(p);
            h = ho;
            w = wo;
            break;
        }
        case 2:
            net.layers.push_back(random_lif(rng));
            break;
        default:
            net.layers.push_back(FlattenSpec{});
            flat = true;
            features = c * h * w;
            break;
        }
    }
    net.layers.push_back(random_lif(rng));
    return net;
}

FrameSequence sparse_frames(Rng& rng, const Shape& frame_shape, std::size_t steps, float density)
{
    const Shape shape{steps, frame_shape[0], frame_shape[1], frame_shape[2]};
    std::vector<float> data(shape.element_count(), 0.0f);
    for (float& v : data) {
        if (rng.chance(density)) {
            v = rng.chance(0.7f) ? 1.0f : 2.0f;
        }
    }
    return FrameSequence{Tensor::from_data(shape, std::move(data)), 1};
}

FrameSequence dense_frames(Rng& rng, const Shape& frame_shape, std::size_t steps, float hi)
{
    const Shape shape{steps, frame_shape[0], frame_shape[1], frame_shape[2]};
    return FrameSequence{random_tensor(rng, shape, 0.0f, hi), 1};
}

std::vector<std::uint8_t> encode_nmnist(const EventStream& stream)
{
    std::vector<std::uint8_t> out;
    out.reserve(stream.events.size() * 5);
    for (const Event& e : stream.events) {
        out.push_back(static_cast<std::uint8_t>(e.x));
        out.push_back(static_cast<std::uint8_t>(e.y));
        out.push_back(static_cast<std::uint8_t>((e.polarity << 7) | ((e.t >> 16) & 0x7F)));
        out.push_back(static_cast<std::uint8_t>((e.t >> 8) & 0xFF));
        out.push_back(static_cast<std::uint8_t>(e.t & 0xFF));
    }
    return out;
}

} // namespace snn::testing
