#include "dfv2/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "dfv2/random.hpp"

namespace dfv2 {

namespace {

using Color = std::array<double, 3>;

constexpr std::array<Color, 6> kPalette{{
    {0.80, 0.78, 0.70},  // background
    {0.20, 0.45, 0.85},
    {0.85, 0.30, 0.25},
    {0.25, 0.70, 0.35},
    {0.90, 0.75, 0.20},
    {0.55, 0.30, 0.65},
}};

Color class_color(std::size_t k, std::size_t num_classes) {
    // The last class borrows the color of the one before it.
    const std::size_t src = k + 1 == num_classes ? k - 1 : k;
    if (src < kPalette.size()) return kPalette[src];
    const double t = static_cast<double>(src) / static_cast<double>(num_classes);
    return {0.3 + 0.5 * t, 0.6 - 0.4 * t, 0.2 + 0.6 * std::fmod(3.0 * t, 1.0)};
}

struct Rect {
    std::size_t top = 0, left = 0, rows = 0, cols = 0;
};

} // namespace

RgbdSample synth_scene(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t num_classes) {
    if (num_classes < 2) throw ParameterError("synth_scene: need at least 2 classes");
    if (num_classes > kIgnoreIndex) throw ParameterError("synth_scene: too many classes");
    if (h == 0 || w == 0 || h % 32 != 0 || w % 32 != 0) {
        throw ShapeError("synth_scene: size " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not a positive multiple of 32");
    }
    Rng rng(seed);
    const std::size_t rects = num_classes - 1;
    const auto g = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(rects)))));

    // cell_of[k] for classes 1..K-1. The colliding pair shares a random cell row.
    std::vector<std::size_t> cell_of(num_classes, 0);
    std::vector<bool> used(g * g, false);
    const auto pair_row = static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(g) - 1));
    std::vector<std::size_t> row_cells(g);
    std::iota(row_cells.begin(), row_cells.end(), pair_row * g);
    std::shuffle(row_cells.begin(), row_cells.end(), rng.engine());
    // With two classes the background itself is the flush partner.
    const bool two_class = num_classes == 2;
    const std::size_t near_class = two_class ? 1 : num_classes - 2;
    const std::size_t flush_class = two_class ? 0 : num_classes - 1;
    cell_of[near_class] = row_cells[0];
    used[row_cells[0]] = true;
    if (!two_class) {
        cell_of[flush_class] = row_cells[1];
        used[row_cells[1]] = true;
    }
    std::vector<std::size_t> free_cells;
    for (std::size_t c = 0; c < g * g; ++c) {
        if (!used[c]) free_cells.push_back(c);
    }
    std::shuffle(free_cells.begin(), free_cells.end(), rng.engine());
    for (std::size_t k = 1, next = 0; k + 2 < num_classes; ++k) cell_of[k] = free_cells[next++];

    const std::size_t n = h * w;
    const std::size_t ch = h / g, cw = w / g;
    std::vector<int> labels(n, 0);
    for (std::size_t k = 1; k < num_classes; ++k) {
        const std::size_t ci = cell_of[k] / g, cj = cell_of[k] % g;
        // Sizes between 40% and 85% of the cell, drawn identically for every class.
        Rect r;
        r.rows = static_cast<std::size_t>(rng.integer(std::max<std::int64_t>(1, ch * 2 / 5), ch * 17 / 20));
        r.cols = static_cast<std::size_t>(rng.integer(std::max<std::int64_t>(1, cw * 2 / 5), cw * 17 / 20));
        r.top = ci * ch + static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(ch - r.rows)));
        r.left = cj * cw + static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(cw - r.cols)));
        for (std::size_t i = r.top; i < r.top + r.rows; ++i)
            for (std::size_t j = r.left; j < r.left + r.cols; ++j) labels[i * w + j] = static_cast<int>(k);
    }

    std::vector<double> rgb(3 * n), depth(n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto k = static_cast<std::size_t>(labels[p]);
        const Color c = class_color(k, num_classes);
        for (std::size_t q = 0; q < 3; ++q) rgb[q * n + p] = std::round(c[q] * 255.0) / 255.0;
        double z = kSynthWallDepth;
        if (k != 0) z -= k == flush_class ? kSynthFlushOffset : kSynthNearOffset;
        depth[p] = std::round(z) + static_cast<double>(rng.integer(-kSynthDepthNoise, kSynthDepthNoise));
    }
    RgbdSample s;
    s.id = "synth_" + std::to_string(seed);
    s.rgb = TensorD::from({3, h, w}, std::move(rgb));
    s.depth = TensorD::from({h, w}, std::move(depth));
    s.labels = std::move(labels);
    return s;
}

std::vector<RgbdSample> synth_dataset(std::uint64_t first_seed, std::size_t count, std::size_t h, std::size_t w,
                                      std::size_t num_classes) {
    std::vector<RgbdSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(synth_scene(first_seed + i, h, w, num_classes));
    return out;
}

} // namespace dfv2
