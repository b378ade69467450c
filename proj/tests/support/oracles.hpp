#pragma once

// Brute-force reference implementations used to validate the library.
// They share no code with dfv2 beyond the Tensor container and are written
// for clarity over speed: plain loops, scalar accumulation, no reuse.

#include <cstdint>
#include <optional>
#include <vector>

#include "dfv2/tensor.hpp"

namespace dfv2::oracle {

/// c[i][j] = sum_t a[i][t] b[t][j], triple loop.
TensorD matmul(const TensorD& a, const TensorD& b);

/// Zero-padded cross-correlation, six nested loops.
TensorD conv2d(const TensorD& x, const TensorD& w, const TensorD& bias, std::size_t stride, std::size_t pad);

/// Window mean without padding over the last two dims of [H x W] or [C x H x W].
TensorD avg_pool2d(const TensorD& x, std::size_t kh, std::size_t kw, std::size_t sh, std::size_t sw);

/// Row-by-row softmax(q k^T / sqrt(d)) (.) beta^g, then times v. `g` may be
/// undefined (no decay).
TensorD attention(const TensorD& q, const TensorD& k, const TensorD& v, const TensorD& g, double beta);

/// Two explicit passes over an H x W grid: per-row attention over values,
/// then per-column attention over the row results.
TensorD axial_attention(const TensorD& q, const TensorD& k, const TensorD& v, std::size_t rows, std::size_t cols,
                        const TensorD& gx, const TensorD& gy, double beta);

/// D[p][q] = |z_p - z_q| over a row-major grid of pooled depths.
TensorD depth_distance(const TensorD& z);
/// S[p][q] = |i - i'| + |j - j'|.
TensorD spatial_distance(std::size_t rows, std::size_t cols);

/// Per-class IoU from pixel index sets; nullopt where the union is empty.
/// Pixels labelled `ignore` are dropped first.
std::vector<std::optional<double>> iou_by_sets(const std::vector<int>& gt, const std::vector<int>& pred,
                                               std::size_t num_classes, int ignore = 255);
/// Mean of the defined entries (0 when none are).
double mean_defined(const std::vector<std::optional<double>>& values);

/// Half-pixel bilinear resize of [C x h x w] computed per output pixel.
TensorD upsample_bilinear(const TensorD& x, std::size_t out_h, std::size_t out_w);

} // namespace dfv2::oracle
