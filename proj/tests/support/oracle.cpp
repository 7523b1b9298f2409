#include "oracle.hpp"

#include <stdexcept>

namespace snn::testing {

std::vector<float> oracle_conv(const Conv2dSpec& c, const std::vector<float>& in, std::size_t ch, std::size_t h,
                               std::size_t w, std::size_t& ho, std::size_t& wo)
{
    const long kh = static_cast<long>(c.kernel[0]);
    const long kw = static_cast<long>(c.kernel[1]);
    const long sh = static_cast<long>(c.stride[0]);
    const long sw = static_cast<long>(c.stride[1]);
    const long ph = static_cast<long>(c.padding[0]);
    const long pw = static_cast<long>(c.padding[1]);
    ho = static_cast<std::size_t>((static_cast<long>(h) + 2 * ph - kh) / sh + 1);
    wo = static_cast<std::size_t>((static_cast<long>(w) + 2 * pw - kw) / sw + 1);

    const auto W = c.weights.data();
    const auto B = c.bias.data();
    std::vector<float> out(c.out_channels * ho * wo);
    for (std::size_t o = 0; o < c.out_channels; ++o) {
        for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t x = 0; x < wo; ++x) {
                float acc = B[o];
                for (std::size_t k = 0; k < ch; ++k) {
                    for (long i = 0; i < kh; ++i) {
                        for (long j = 0; j < kw; ++j) {
                            const long iy = static_cast<long>(y) * sh - ph + i;
                            const long ix = static_cast<long>(x) * sw - pw + j;
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) {
                                continue;  // zero padding
                            }
                            const float v =
                                in[(k * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
                            acc += W[((o * ch + k) * c.kernel[0] + static_cast<std::size_t>(i)) * c.kernel[1] +
                                     static_cast<std::size_t>(j)] *
                                   v;
                        }
                    }
                }
                out[(o * ho + y) * wo + x] = acc;
            }
        }
    }
    return out;
}

std::vector<float> oracle_maxpool(const MaxPool2dSpec& p, const std::vector<float>& in, std::size_t ch, std::size_t h,
                                  std::size_t w, std::size_t& ho, std::size_t& wo)
{
    ho = (h - p.kernel[0]) / p.stride[0] + 1;
    wo = (w - p.kernel[1]) / p.stride[1] + 1;
    std::vector<float> out(ch * ho * wo);
    for (std::size_t k = 0; k < ch; ++k) {
        for (std::size_t y = 0; y < ho; ++y) {
            for (std::size_t x = 0; x < wo; ++x) {
                float m = -3.4e38f;
                for (std::size_t i = 0; i < p.kernel[0]; ++i) {
                    for (std::size_t j = 0; j < p.kernel[1]; ++j) {
                        const float v = in[(k * h + y * p.stride[0] + i) * w + x * p.stride[1] + j];
                        if (v > m) {
                            m = v;
                        }
                    }
                }
                out[(k * ho + y) * wo + x] = m;
            }
        }
    }
    return out;
}

std::vector<float> oracle_linear(const LinearSpec& l, const std::vector<float>& in)
{
    std::vector<float> out(l.out_features);
    for (std::size_t o = 0; o < l.out_features; ++o) {
        float acc = l.bias.data()[o];
        for (std::size_t i = 0; i < l.in_features; ++i) {
            acc += l.weights.data()[o * l.in_features + i] * in[i];
        }
        out[o] = acc;
    }
    return out;
}

OracleRun oracle_forward(const Network& net, const Tensor& frames)
{
    const std::size_t steps = frames.shape()[0];
    const std::size_t frame_size = frames.size() / steps;
    const std::size_t n = net.layers.size();

    std::vector<std::vector<float>> membrane(n);
    std::vector<std::vector<float>> spikes(n);

    OracleRun run;
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<float> x(frames.data().begin() + static_cast<long>(t * frame_size),
                             frames.data().begin() + static_cast<long>((t + 1) * frame_size));
        std::size_t c = net.input_shape[0];
        std::size_t h = net.input_shape[1];
        std::size_t w = net.input_shape[2];
        std::vector<std::vector<float>> step_out;

        for (std::size_t li = 0; li < n; ++li) {
            const Layer& layer = net.layers[li];
            if (const auto* cv = std::get_if<Conv2dSpec>(&layer)) {
                std::size_t ho = 0;
                std::size_t wo = 0;
                x = oracle_conv(*cv, x, c, h, w, ho, wo);
                c = cv->out_channels;
                h = ho;
                w = wo;
            } else if (const auto* p = std::get_if<MaxPool2dSpec>(&layer)) {
                std::size_t ho = 0;
                std::size_t wo = 0;
                x = oracle_maxpool(*p, x, c, h, w, ho, wo);
                h = ho;
                w = wo;
            } else if (const auto* l = std::get_if<LinearSpec>(&layer)) {
                x = oracle_linear(*l, x);
            } else if (const auto* lif = std::get_if<LifSpec>(&layer)) {
                if (membrane[li].empty()) {
                    membrane[li].assign(x.size(), 0.0f);
                    spikes[li].assign(x.size(), 0.0f);
                }
                for (std::size_t k = 0; k < x.size(); ++k) {
                    float& u = membrane[li][k];
                    float& s = spikes[li][k];
                    if (lif->reset == ResetMode::subtract) {
                        u = lif->beta * u + x[k] - s * lif->threshold;
                    } else {
                        u = lif->beta * u * (1.0f - s) + x[k];
                    }
                    s = u > lif->threshold ? 1.0f : 0.0f;
                }
                x = spikes[li];
            }
            // flatten leaves the flat buffer untouched
            step_out.push_back(x);
        }

        if (run.class_counts.empty()) {
            run.class_counts.assign(x.size(), 0);
        }
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (x[k] == 1.0f) {
                ++run.class_counts[k];
            }
        }
        run.outputs.push_back(std::move(step_out));
    }

    for (std::size_t k = 1; k < run.class_counts.size(); ++k) {
        if (run.class_counts[k] > run.class_counts[run.predicted]) {
            run.predicted = k;
        }
    }
    return run;
}

} // namespace snn::testing
