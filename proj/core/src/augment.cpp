#include "dfv2/augment.hpp"

#include <algorithm>
#include <cmath>

#include "dfv2/ops.hpp"

namespace dfv2 {

RgbdSample flip_horizontal(const RgbdSample& s) {
    const std::size_t h = s.height(), w = s.width();
    RgbdSample out = s;
    std::vector<double> rgb(3 * h * w), depth(h * w);
    std::vector<int> labels(h * w);
    const auto c = s.rgb.data();
    const auto d = s.depth.data();
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t dst = i * w + j, src = i * w + (w - 1 - j);
            for (std::size_t ch = 0; ch < 3; ++ch) rgb[ch * h * w + dst] = c[ch * h * w + src];
            depth[dst] = d[src];
            labels[dst] = s.labels[src];
        }
    }
    out.rgb = TensorD::from({3, h, w}, std::move(rgb));
    out.depth = TensorD::from({h, w}, std::move(depth));
    out.labels = std::move(labels);
    return out;
}

namespace {

/// Center crop or edge-replicating pad of [C x sh x sw] to [C x h x w].
std::vector<double> fit_image(std::span<const double> src, std::size_t c, std::size_t sh, std::size_t sw,
                              std::size_t h, std::size_t w) {
    std::vector<double> out(c * h * w);
    const auto off_i = static_cast<std::ptrdiff_t>(sh / 2) - static_cast<std::ptrdiff_t>(h / 2);
    const auto off_j = static_cast<std::ptrdiff_t>(sw / 2) - static_cast<std::ptrdiff_t>(w / 2);
    for (std::size_t k = 0; k < c; ++k)
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                const auto si = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i) + off_i, 0,
                                                           static_cast<std::ptrdiff_t>(sh) - 1);
                const auto sj = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(j) + off_j, 0,
                                                           static_cast<std::ptrdiff_t>(sw) - 1);
                out[(k * h + i) * w + j] = src[(k * sh + static_cast<std::size_t>(si)) * sw + static_cast<std::size_t>(sj)];
            }
    return out;
}

} // namespace

RgbdSample augment_with(const RgbdSample& sample, bool flip, double scale) {
    if (!(scale > 0.0)) throw ParameterError("augment: scale must be positive");
    RgbdSample s = flip ? flip_horizontal(sample) : sample;
    const std::size_t h = s.height(), w = s.width();
    const auto sh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(h) * scale)));
    const auto sw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(w) * scale)));
    if (sh == h && sw == w) return s;

    Tape<double> tape(false);
    const auto rgb = ops::upsample_bilinear(tape, s.rgb, sh, sw);
    const auto depth = ops::upsample_bilinear(tape, ops::reshape(tape, s.depth, {1, h, w}), sh, sw);

    std::vector<int> scaled(sh * sw);
    for (std::size_t i = 0; i < sh; ++i) {
        const auto si = std::min(h - 1, static_cast<std::size_t>((static_cast<double>(i) + 0.5) * h / sh));
        for (std::size_t j = 0; j < sw; ++j) {
            const auto sj = std::min(w - 1, static_cast<std::size_t>((static_cast<double>(j) + 0.5) * w / sw));
            scaled[i * sw + j] = s.labels[si * w + sj];
        }
    }
    std::vector<int> labels(h * w, kIgnoreIndex);
    const auto off_i = static_cast<std::ptrdiff_t>(sh / 2) - static_cast<std::ptrdiff_t>(h / 2);
    const auto off_j = static_cast<std::ptrdiff_t>(sw / 2) - static_cast<std::ptrdiff_t>(w / 2);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const auto si = static_cast<std::ptrdiff_t>(i) + off_i, sj = static_cast<std::ptrdiff_t>(j) + off_j;
            if (si >= 0 && sj >= 0 && si < static_cast<std::ptrdiff_t>(sh) && sj < static_cast<std::ptrdiff_t>(sw)) {
                labels[i * w + j] = scaled[static_cast<std::size_t>(si) * sw + static_cast<std::size_t>(sj)];
            }
        }

    s.rgb = TensorD::from({3, h, w}, fit_image(rgb.data(), 3, sh, sw, h, w));
    s.depth = TensorD::from({h, w}, fit_image(depth.data(), 1, sh, sw, h, w));
    s.labels = std::move(labels);
    return s;
}

RgbdSample augment(const RgbdSample& sample, Rng& rng) {
    const bool flip = rng.bernoulli(kAugmentFlipProbability);
    const double scale = rng.uniform(kAugmentMinScale, kAugmentMaxScale);
    return augment_with(sample, flip, scale);
}

} // namespace dfv2
