#pragma once

#include <span>
#include <vector>

#include "dfv2/tape.hpp"
#include "dfv2/tensor.hpp"

/// Differentiable tensor operations.
///
/// Every op takes the tape it records onto as its first argument. Passing a
/// non-recording tape (`Tape<T>{false}`) evaluates without building a graph.
/// Layout conventions: matrices are row-major, images are C x H x W, token
/// sequences are N x C with tokens flattened row-major (p = i * W + j).
namespace dfv2::ops {

inline constexpr double kLayerNormEps = 1e-6;
inline constexpr int kIgnoreLabel = 255;

// -- linear algebra ----------------------------------------------------------

/// c[i][j] = sum_t a[i][t] * b[t][j]
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Batched product over the leading dimension: a[B x m x k] * b[B x k x n],
/// or a * b^T when `transpose_b` (b is then B x n x k).
template <typename T>
Tensor<T> bmm(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& x);

/// [A x B x C] -> [B x A x C]
template <typename T>
Tensor<T> swap_leading(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

// -- elementwise -------------------------------------------------------------

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Hadamard product.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor);

/// s * x for a single-element tensor s.
template <typename T>
Tensor<T> scale_by(Tape<T>& tape, const Tensor<T>& s, const Tensor<T>& x);

template <typename T>
Tensor<T> abs(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x);

/// Exact (erf-based) GELU.
template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x);

/// beta^g elementwise, evaluated as exp(g * ln beta).
/// Throws ParameterError unless 0 < beta <= 1 and DomainError on g < 0.
template <typename T>
Tensor<T> exp_decay(Tape<T>& tape, const Tensor<T>& g, T beta);

// -- broadcasting / layers ---------------------------------------------------

/// x[... x C] + b[C]
template <typename T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias);

/// x[N x Cin] * w[Cin x Cout] (+ b[Cout] when defined)
template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

/// Softmax along the last dimension, max-subtracted.
template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& x);

/// Normalizes over the last dimension, then applies gamma and shift.
template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& shift, double eps = kLayerNormEps);

/// Direct cross-correlation (kernel not flipped).
/// x[Cin x H x W], w[Cout x Cin x kh x kw], optional bias[Cout].
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad);

/// Window mean over the last two dims of an [H x W] or [C x H x W] tensor.
/// When kernel == stride (non-overlapping) the input must divide evenly.
template <typename T>
Tensor<T> avg_pool2d(Tape<T>& tape, const Tensor<T>& x, std::size_t kh, std::size_t kw,
                     std::size_t sh, std::size_t sw);

/// Bilinear resize of [C x h x w] with half-pixel centres (align_corners = false).
template <typename T>
Tensor<T> upsample_bilinear(Tape<T>& tape, const Tensor<T>& x, std::size_t out_h, std::size_t out_w);

// -- slicing -----------------------------------------------------------------

/// Columns [start, start + len) of an N x C matrix.
template <typename T>
Tensor<T> slice_cols(Tape<T>& tape, const Tensor<T>& x, std::size_t start, std::size_t len);

/// Concatenates N x C_i matrices along columns.
template <typename T>
Tensor<T> concat_cols(Tape<T>& tape, const std::vector<Tensor<T>>& parts);

/// Concatenates tensors along their first dimension.
template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, const std::vector<Tensor<T>>& parts);

// -- reductions / losses -----------------------------------------------------

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);

/// Mean negative log-softmax over positions whose label != ignore_index.
/// If every position is ignored the loss is 0 and all gradients are 0.
template <typename T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const int> labels,
                        int ignore_index = kIgnoreLabel);

} // namespace dfv2::ops
