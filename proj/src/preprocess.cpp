#include "framecast/preprocess.hpp"

#include <cmath>

#include "framecast/errors.hpp"

namespace fc {

namespace {

// Reflect with edge repeated: -1 -> 0, n -> n-1. Folds until in range.
std::size_t reflect_index(long i, long n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return static_cast<std::size_t>(i);
}

std::vector<double> gaussian_kernel(double sigma) {
    const long radius = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

} // namespace

Tensor2 gaussian_blur(const Tensor2& img, double sigma) {
    if (sigma < 0.0) throw config_error("gaussian_blur: sigma must be >= 0");
    if (sigma == 0.0) return img;
    const std::vector<double> k = gaussian_kernel(sigma);
    const long radius = static_cast<long>(k.size() / 2);
    const long rows = static_cast<long>(img.rows);
    const long cols = static_cast<long>(img.cols);

    Tensor2 tmp(img.rows, img.cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (long t = -radius; t <= radius; ++t)
                acc += k[t + radius] * img(i, reflect_index(j + t, cols));
            tmp(i, j) = acc;
        }
    Tensor2 out(img.rows, img.cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) {
            double acc = 0.0;
            for (long t = -radius; t <= radius; ++t)
                acc += k[t + radius] * tmp(reflect_index(i + t, rows), j);
            out(i, j) = acc;
        }
    return out;
}

Tensor2 invert255(const Tensor2& img) {
    Tensor2 out = img;
    for (double& v : out.data) v = 255.0 - v;
    return out;
}

Tensor2 preprocess(const Frame& frame, const PrepConfig& cfg) {
    Tensor2 m(frame.rows, frame.cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data[i] = frame.pixels[i];
    m = gaussian_blur(m, cfg.gaussian_sigma);
    if (cfg.invert) m = invert255(m);
    if (cfg.scale_to_unit) scale_in_place(m, 1.0 / 255.0);
    return m;
}

Tensor2 as_column(const Tensor2& m) {
    Tensor2 out(m.size(), 1);
    out.data = m.data;
    return out;
}

PreparedEpisode prepare_episode(const Episode& ep, const PrepConfig& cfg) {
    PreparedEpisode out;
    out.inputs.reserve(ep.input_frames.size());
    out.targets.reserve(ep.target_frames.size());
    for (const Frame& f : ep.input_frames) out.inputs.push_back(as_column(preprocess(f, cfg)));
    for (const Frame& f : ep.target_frames) out.targets.push_back(as_column(preprocess(f, cfg)));
    for (const auto& a : ep.actions) {
        Tensor2 v(a.size(), 1);
        v.data = a;
        out.cond.actions.push_back(std::move(v));
    }
    for (const auto& s : ep.states) {
        Tensor2 v(s.size(), 1);
        v.data = s;
        out.cond.states.push_back(std::move(v));
    }
    return out;
}

std::vector<PreparedEpisode> prepare_dataset(const Dataset& ds, const PrepConfig& cfg) {
    std::vector<PreparedEpisode> out;
    out.reserve(ds.episodes.size());
    for (const Episode& ep : ds.episodes) out.push_back(prepare_episode(ep, cfg));
    return out;
}

Frame quantize_frame(const Tensor2& m) {
    Frame f(static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols));
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double v = std::min(1.0, std::max(0.0, m.data[i]));
        f.pixels[i] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
    return f;
}

} // namespace fc
