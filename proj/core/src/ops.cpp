#include "dfv2/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dfv2::ops {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using CMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MMap = Eigen::Map<RowMat<T>>;

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n), K = static_cast<Eigen::Index>(k);
    MMap<T>(c, M, N).noalias() += CMap<T>(a, M, K) * CMap<T>(b, K, N);
}

// C[m x n] += A[k x m]^T * B[k x n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n), K = static_cast<Eigen::Index>(k);
    MMap<T>(c, M, N).noalias() += CMap<T>(a, K, M).transpose() * CMap<T>(b, K, N);
}

template <typename T>
void transpose_into(std::size_t rows, std::size_t cols, const T* src, T* dst) {
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

// C[m x n] += A[m x k] * B[n x k]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    const auto M = static_cast<Eigen::Index>(m), N = static_cast<Eigen::Index>(n), K = static_cast<Eigen::Index>(k);
    MMap<T>(c, M, N).noalias() += CMap<T>(a, M, K) * CMap<T>(b, N, K).transpose();
}

template <typename T>
void require_rank(const Tensor<T>& x, std::size_t rank, const char* op) {
    if (x.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             " tensor, got " + shape_to_string(x.shape()));
    }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(b.shape()));
    }
}

template <typename T>
void accumulate(std::span<T> dst, std::span<const T> src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Elementwise unary op y = f(x) with derivative expressed through (x, y).
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(Tape<T>& tape, const Tensor<T>& x, Fwd fwd, Deriv deriv) {
    auto in = x.data();
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
    auto y = Tensor<T>::from(x.shape(), std::move(out));
    if (tape.tracks({&x})) {
        tape.record({x}, y, [x, y, deriv]() mutable {
            auto gy = y.grad();
            auto xs = x.data();
            auto ys = y.data();
            auto gx = x.mutable_grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * deriv(xs[i], ys[i]);
        });
    }
    return y;
}

} // namespace

// -- linear algebra ----------------------------------------------------------

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k) {
        throw DimensionError("matmul: inner dimensions disagree for " + shape_to_string(a.shape()) +
                             " x " + shape_to_string(b.shape()));
    }
    std::vector<T> out(m * n, T{0});
    gemm_nn(m, n, k, a.raw(), b.raw(), out.data());
    auto c = Tensor<T>::from({m, n}, std::move(out));
    if (tape.tracks({&a, &b})) {
        tape.record({a, b}, c, [a, b, c, m, n, k]() mutable {
            const T* gc = c.grad().data();
            if (a.requires_grad()) gemm_nt(m, k, n, gc, b.raw(), a.mutable_grad().data());
            if (b.requires_grad()) gemm_tn(k, n, m, a.raw(), gc, b.mutable_grad().data());
        });
    }
    return c;
}

template <typename T>
Tensor<T> bmm(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
    require_rank(a, 3, "bmm");
    require_rank(b, 3, "bmm");
    const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2);
    const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
    const std::size_t bk = transpose_b ? b.dim(2) : b.dim(1);
    if (b.dim(0) != batch || bk != k) {
        throw DimensionError(std::string("bmm") + (transpose_b ? " (transposed b)" : "") +
                             ": incompatible shapes " + shape_to_string(a.shape()) + " x " +
                             shape_to_string(b.shape()));
    }
    std::vector<T> out(batch * m * n, T{0});
    for (std::size_t s = 0; s < batch; ++s) {
        const T* ap = a.raw() + s * m * k;
        const T* bp = b.raw() + s * k * n;
        T* cp = out.data() + s * m * n;
        if (transpose_b) {
            gemm_nt(m, n, k, ap, bp, cp);
        } else {
            gemm_nn(m, n, k, ap, bp, cp);
        }
    }
    auto c = Tensor<T>::from({batch, m, n}, std::move(out));
    if (tape.tracks({&a, &b})) {
        tape.record({a, b}, c, [a, b, c, batch, m, n, k, transpose_b]() mutable {
            const T* gc = c.grad().data();
            for (std::size_t s = 0; s < batch; ++s) {
                const T* ap = a.raw() + s * m * k;
                const T* bp = b.raw() + s * k * n;
                const T* gcp = gc + s * m * n;
                if (a.requires_grad()) {
                    T* gap = a.mutable_grad().data() + s * m * k;
                    if (transpose_b) {
                        gemm_nn(m, k, n, gcp, bp, gap);  // dA = dC * B, B is n x k
                    } else {
                        gemm_nt(m, k, n, gcp, bp, gap);  // dA = dC * B^T
                    }
                }
                if (b.requires_grad()) {
                    T* gbp = b.mutable_grad().data() + s * k * n;
                    if (transpose_b) {
                        gemm_tn(n, k, m, gcp, ap, gbp);  // dB = dC^T * A
                    } else {
                        gemm_tn(k, n, m, ap, gcp, gbp);  // dB = A^T * dC
                    }
                }
            }
        });
    }
    return c;
}

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& x) {
    require_rank(x, 2, "transpose");
    const std::size_t r = x.dim(0), c = x.dim(1);
    std::vector<T> out(r * c);
    transpose_into(r, c, x.raw(), out.data());
    auto y = Tensor<T>::from({c, r}, std::move(out));
    if (tape.tracks({&x})) {
        tape.record({x}, y, [x, y, r, c]() mutable {
            auto gy = y.grad();
            auto gx = x.mutable_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[j * r + i];
        });
    }
    return y;
}

template <typename T>
Tensor<T> swap_leading(Tape<T>& tape, const Tensor<T>& x) {
    require_rank(x, 3, "swap_leading");
    const std::size_t A = x.dim(0), B = x.dim(1), C = x.dim(2);
    std::vector<T> out(A * B * C);
    auto in = x.data();
    for (std::size_t a = 0; a < A; ++a)
        for (std::size_t b = 0; b < B; ++b)
            std::copy_n(in.data() + (a * B + b) * C, C, out.data() + (b * A + a) * C);
    auto y = Tensor<T>::from({B, A, C}, std::move(out));
    if (tape.tracks({&x})) {
        tape.record({x}, y, [x, y, A, B, C]() mutable {
            auto gy = y.grad();
            auto gx = x.mutable_grad();
            for (std::size_t a = 0; a < A; ++a)
                for (std::size_t b = 0; b < B; ++b) {
                    const T* src = gy.data() + (b * A + a) * C;
                    T* dst = gx.data() + (a * B + b) * C;
                    for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                }
        });
    }
    return y;
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                         shape_to_string(shape));
    }
    auto y = Tensor<T>::from(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
    if (tape.tracks({&x})) {
        tape.record({x}, y, [x, y]() mutable { accumulate(x.mutable_grad(), y.grad()); });
    }
    return y;
}

// -- elementwise -------------------------------------------------------------

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "add");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    auto c = Tensor<T>::from(a.shape(), std::move(out));
    if (tape.tracks({&a, &b})) {
        tape.record({a, b}, c, [a, b, c]() mutable {
            if (a.requires_grad()) accumulate(a.mutable_grad(), c.grad());
            if (b.requires_grad()) accumulate(b.mutable_grad(), c.grad());
        });
    }
    return c;
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "sub");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    auto c = Tensor<T>::from(a.shape(), std::move(out));
    if (tape.tracks({&a, &b})) {
        tape.record({a, b}, c, [a, b, c]() mutable {
            auto gc = c.grad();
            if (a.requires_grad()) accumulate(a.mutable_grad(), gc);
            if (b.requires_grad()) {
                auto gb = b.mutable_grad();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gc[i];
            }
        });
    }
    return c;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mul");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    auto c = Tensor<T>::from(a.shape(), std::move(out));
    if (tape.tracks({&a, &b})) {
        tape.record({a, b}, c, [a, b, c]() mutable {
            auto gc = c.grad();
            if (a.requires_grad()) {
                auto ga = a.mutable_grad();
                for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gc[i] * b[i];
            }
            if (b.requires_grad()) {
                auto gb = b.mutable_grad();
                for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gc[i] * a[i];
            }
        });
    }
    return c;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor) {
    return unary(
        tape, x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> scale_by(Tape<T>& tape, const Tensor<T>& s, const Tensor<T>& x) {
    if (s.numel() != 1) {
        throw DimensionError("scale_by: scale must have one element, got " + shape_to_string(s.shape()));
    }
    const T sv = s.item();
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * x[i];
    auto y = Tensor<T>::from(x.shape(), std::move(out));
    if (tape.tracks({&s, &x})) {
        tape.record({s, x}, y, [s, x, y, sv]() mutable {
            auto gy = y.grad();
            if (s.requires_grad()) {
                T acc{0};
                for (std::size_t i = 0; i < gy.size(); ++i) acc += gy[i] * x[i];
                s.mutable_grad()[0] += acc;
            }
            if (x.requires_grad()) {
                auto gx = x.mutable_grad();
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += sv * gy[i];
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> abs(Tape<T>& tape, const Tensor<T>& x) {
    return unary(
        tape, x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0}); });
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
    return unary(
        tape, x, [](T v) { return v > T{0} ? v : T{0}; },
        [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x) {
    constexpr T inv_sqrt2 = T(0.70710678118654752440);
    constexpr T inv_sqrt2pi = T(0.39894228040143267794);
    return unary(
        tape, x, [](T v) { return T(0.5) * v * (T{1} + std::erf(v * inv_sqrt2)); },
        [](T v, T) {
            const T cdf = T(0.5) * (T{1} + std::erf(v * inv_sqrt2));
            const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
            return cdf + v * pdf;
        });
}

template <typename T>
Tensor<T> exp_decay(Tape<T>& tape, const Tensor<T>& g, T beta) {
    if (!(beta > T{0}) || beta > T{1}) {
        throw ParameterError("exp_decay: decay rate must lie in (0, 1], got " + std::to_string(beta));
    }
    for (auto v : g.data()) {
        if (!(v >= T{0})) {
            throw DomainError("exp_decay: exponent must be non-negative, got " + std::to_string(v));
        }
    }
    const T log_beta = std::log(beta);
    return unary(
        tape, g, [log_beta](T v) { return std::exp(v * log_beta); },
        [log_beta](T, T y) { return log_beta * y; });
}

// -- broadcasting / layers ---------------------------------------------------

template <typename T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias) {
    const std::size_t c = x.shape().back();
    if (bias.numel() != c) {
        throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) +
                             " does not match trailing dim of " + shape_to_string(x.shape()));
    }
    const std::size_t rows = x.numel() / c;
    std::vector<T> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) out[r * c + j] = x[r * c + j] + bias[j];
    auto y = Tensor<T>::from(x.shape(), std::move(out));
    if (tape.tracks({&x, &bias})) {
        tape.record({x, bias}, y, [x, bias, y, rows, c]() mutable {
            auto gy = y.grad();
            if (x.requires_grad()) accumulate(x.mutable_grad(), gy);
            if (bias.requires_grad()) {
                auto gb = bias.mutable_grad();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < c; ++j) gb[j] += gy[r * c + j];
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
    auto y = matmul(tape, x, w);
    return bias.defined() ? add_bias(tape, y, bias) : y;
}

template <typename T>
Tensor<T> softmax_rows(Tape<T>& tape, const Tensor<T>& x) {
    const std::size_t n = x.shape().back();
    const std::size_t rows = x.numel() / n;
    auto in = x.data();
    std::vector<T> out(in.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* src = in.data() + r * n;
        T* dst = out.data() + r * n;
        const T mx = *std::max_element(src, src + n);
        T total{0};
        for (std::size_t j = 0; j < n; ++j) {
            dst[j] = std::exp(src[j] - mx);
            total += dst[j];
        }
        for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
    }
    auto y = Tensor<T>::from(x.shape(), std::move(out));
    if (tape.tracks({&x})) {
        tape.record({x}, y, [x, y, rows, n]() mutable {
            auto gy = y.grad();
            auto ys = y.data();
            auto gx = x.mutable_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t o = r * n;
                T dot{0};
                for (std::size_t j = 0; j < n; ++j) dot += gy[o + j] * ys[o + j];
                for (std::size_t j = 0; j < n; ++j) gx[o + j] += ys[o + j] * (gy[o + j] - dot);
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& shift,
                     double eps) {
    const std::size_t c = x.shape().back();
    if (gamma.numel() != c || shift.numel() != c) {
        throw DimensionError("layer_norm: affine parameters " + shape_to_string(gamma.shape()) + "/" +
                             shape_to_string(shift.shape()) + " do not match " +
                             shape_to_string(x.shape()));
    }
    const std::size_t rows = x.numel() / c;
    std::vector<T> xhat(x.numel());
    std::vector<T> inv_std(rows);
    std::vector<T> out(x.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* src = x.raw() + r * c;
        T mu{0};
        for (std::size_t j = 0; j < c; ++j) mu += src[j];
        mu /= static_cast<T>(c);
        T var{0};
        for (std::size_t j = 0; j < c; ++j) var += (src[j] - mu) * (src[j] - mu);
        var /= static_cast<T>(c);
        const T is = T{1} / std::sqrt(var + static_cast<T>(eps));
        inv_std[r] = is;
        for (std::size_t j = 0; j < c; ++j) {
            xhat[r * c + j] = (src[j] - mu) * is;
            out[r * c + j] = gamma[j] * xhat[r * c + j] + shift[j];
        }
    }
    auto y = Tensor<T>::from(x.shape(), std::move(out));
    if (tape.tracks({&x, &gamma, &shift})) {
        tape.record({x, gamma, shift}, y,
                    [x, gamma, shift, y, rows, c, xhat = std::move(xhat),
                     inv_std = std::move(inv_std)]() mutable {
                        auto gy = y.grad();
                        if (gamma.requires_grad()) {
                            auto gg = gamma.mutable_grad();
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t j = 0; j < c; ++j) gg[j] += gy[r * c + j] * xhat[r * c + j];
                        }
                        if (shift.requires_grad()) {
                            auto gs = shift.mutable_grad();
                            for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t j = 0; j < c; ++j) gs[j] += gy[r * c + j];
                        }
                        if (x.requires_grad()) {
                            auto gx = x.mutable_grad();
                            const T inv_c = T{1} / static_cast<T>(c);
                            for (std::size_t r = 0; r < rows; ++r) {
                                const std::size_t o = r * c;
                                T mean_d{0}, mean_dx{0};
                                for (std::size_t j = 0; j < c; ++j) {
                                    const T d = gy[o + j] * gamma[j];
                                    mean_d += d;
                                    mean_dx += d * xhat[o + j];
                                }
                                mean_d *= inv_c;
                                mean_dx *= inv_c;
                                for (std::size_t j = 0; j < c; ++j) {
                                    const T d = gy[o + j] * gamma[j];
                                    gx[o + j] += inv_std[r] * (d - mean_d - xhat[o + j] * mean_dx);
                                }
                            }
                        }
                    });
    }
    return y;
}

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad) {
    require_rank(x, 3, "conv2d");
    require_rank(w, 4, "conv2d");
    const std::size_t cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != cin) {
        throw DimensionError("conv2d: input has " + std::to_string(cin) + " channels but kernel " +
                             shape_to_string(w.shape()) + " expects " + std::to_string(w.dim(1)));
    }
    if (bias.defined() && bias.numel() != cout) {
        throw DimensionError("conv2d: bias " + shape_to_string(bias.shape()) + " does not match " +
                             std::to_string(cout) + " output channels");
    }
    if (stride == 0) throw ParameterError("conv2d: stride must be >= 1");
    if (h + 2 * pad < kh || wd + 2 * pad < kw) {
        throw ShapeError("conv2d: kernel larger than padded input " + shape_to_string(x.shape()));
    }
    const std::size_t ho = (h + 2 * pad - kh) / stride + 1;
    const std::size_t wo = (wd + 2 * pad - kw) / stride + 1;
    const std::size_t patch = cin * kh * kw;
    const std::size_t npos = ho * wo;

    // im2col: row (ci, ki, kj), column output position
    std::vector<T> cols(patch * npos, T{0});
    auto xin = x.data();
    for (std::size_t ci = 0; ci < cin; ++ci)
        for (std::size_t ki = 0; ki < kh; ++ki)
            for (std::size_t kj = 0; kj < kw; ++kj) {
                T* row = cols.data() + ((ci * kh + ki) * kw + kj) * npos;
                for (std::size_t oi = 0; oi < ho; ++oi) {
                    const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                                              static_cast<std::ptrdiff_t>(pad);
                    if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t oj = 0; oj < wo; ++oj) {
                        const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(wd)) continue;
                        row[oi * wo + oj] = xin[(ci * h + static_cast<std::size_t>(ii)) * wd +
                                                static_cast<std::size_t>(jj)];
                    }
                }
            }

    std::vector<T> out(cout * npos, T{0});
    gemm_nn(cout, npos, patch, w.raw(), cols.data(), out.data());
    if (bias.defined()) {
        for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t p = 0; p < npos; ++p) out[co * npos + p] += bias[co];
    }
    auto y = Tensor<T>::from({cout, ho, wo}, std::move(out));
    if (tape.tracks({&x, &w, &bias})) {
        std::vector<Tensor<T>> inputs{x, w};
        if (bias.defined()) inputs.push_back(bias);
        tape.record(std::move(inputs), y,
                    [x, w, bias, y, cols = std::move(cols), cin, h, wd, cout, kh, kw, ho, wo, stride, pad,
                     patch, npos]() mutable {
                        const T* gy = y.grad().data();
                        if (w.requires_grad()) {
                            gemm_nt(cout, patch, npos, gy, cols.data(), w.mutable_grad().data());
                        }
                        if (bias.defined() && bias.requires_grad()) {
                            auto gb = bias.mutable_grad();
                            for (std::size_t co = 0; co < cout; ++co)
                                for (std::size_t p = 0; p < npos; ++p) gb[co] += gy[co * npos + p];
                        }
                        if (x.requires_grad()) {
                            std::vector<T> gcols(patch * npos, T{0});
                            gemm_tn(patch, npos, cout, w.raw(), gy, gcols.data());
                            auto gx = x.mutable_grad();
                            for (std::size_t ci = 0; ci < cin; ++ci)
                                for (std::size_t ki = 0; ki < kh; ++ki)
                                    for (std::size_t kj = 0; kj < kw; ++kj) {
                                        const T* row = gcols.data() + ((ci * kh + ki) * kw + kj) * npos;
                                        for (std::size_t oi = 0; oi < ho; ++oi) {
                                            const std::ptrdiff_t ii =
                                                static_cast<std::ptrdiff_t>(oi * stride + ki) -
                                                static_cast<std::ptrdiff_t>(pad);
                                            if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(h)) continue;
                                            for (std::size_t oj = 0; oj < wo; ++oj) {
                                                const std::ptrdiff_t jj =
                                                    static_cast<std::ptrdiff_t>(oj * stride + kj) -
                                                    static_cast<std::ptrdiff_t>(pad);
                                                if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(wd)) continue;
                                                gx[(ci * h + static_cast<std::size_t>(ii)) * wd +
                                                   static_cast<std::size_t>(jj)] += row[oi * wo + oj];
                                            }
                                        }
                                    }
                        }
                    });
    }
    return y;
}

template <typename T>
Tensor<T> avg_pool2d(Tape<T>& tape, const Tensor<T>& x, std::size_t kh, std::size_t kw, std::size_t sh,
                     std::size_t sw) {
    if (x.rank() != 2 && x.rank() != 3) {
        throw DimensionError("avg_pool2d: expected [H x W] or [C x H x W], got " + shape_to_string(x.shape()));
    }
    if (kh == 0 || kw == 0 || sh == 0 || sw == 0) throw ParameterError("avg_pool2d: zero kernel or stride");
    const bool planar = x.rank() == 2;
    const std::size_t ch = planar ? 1 : x.dim(0);
    const std::size_t h = x.dim(planar ? 0 : 1), w = x.dim(planar ? 1 : 2);
    if (kh == sh && kw == sw) {
        if (h % sh != 0 || w % sw != 0) {
            throw ShapeError("avg_pool2d: " + std::to_string(h) + "x" + std::to_string(w) +
                             " is not divisible by pooling window " + std::to_string(kh) + "x" +
                             std::to_string(kw) + "; pad the input first");
        }
    }
    if (h < kh || w < kw) {
        throw ShapeError("avg_pool2d: window larger than input " + shape_to_string(x.shape()));
    }
    const std::size_t ho = (h - kh) / sh + 1, wo = (w - kw) / sw + 1;
    const T inv = T{1} / static_cast<T>(kh * kw);
    std::vector<T> out(ch * ho * wo);
    auto in = x.data();
    for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t oi = 0; oi < ho; ++oi)
            for (std::size_t oj = 0; oj < wo; ++oj) {
                T acc{0};
                for (std::size_t a = 0; a < kh; ++a)
                    for (std::size_t b = 0; b < kw; ++b) acc += in[(c * h + oi * sh + a) * w + oj * sw + b];
                out[(c * ho + oi) * wo + oj] = acc * inv;
            }
    Shape shape = planar ? Shape{ho, wo} : Shape{ch, ho, wo};
    auto y = Tensor<T>::from(std::move(shape), std::move(out));
    if (tape.tracks({&x})) {
        tape.record({x}, y, [x, y, ch, h, w, ho, wo, kh, kw, sh, sw, inv]() mutable {
            auto gy = y.grad();
            auto gx = x.mutable_grad();
            for (std::size_t c = 0; c < ch; ++c)
                for (std::size_t oi = 0; oi < ho; ++oi)
                    for (std::size_t oj = 0; oj < wo; ++oj) {
                        const T g = gy[(c * ho + oi) * wo + oj] * inv;
                        for (std::size_t a = 0; a < kh; ++a)
                            for (std::size_t b = 0; b < kw; ++b) gx[(c * h + oi * sh + a) * w + oj * sw + b] += g;
                    }
        });
    }
    return y;
}

namespace {

struct LerpAxis {
    std::vector<std::size_t> lo, hi;
    std::vector<double> frac;
};

LerpAxis make_axis(std::size_t in, std::size_t out) {
    LerpAxis ax;
    ax.lo.resize(out);
    ax.hi.resize(out);
    ax.frac.resize(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
        if (src < 0.0) src = 0.0;
        auto i0 = static_cast<std::size_t>(src);
        if (i0 > in - 1) i0 = in - 1;
        ax.lo[o] = i0;
        ax.hi[o] = std::min(i0 + 1, in - 1);
        ax.frac[o] = src - static_cast<double>(i0);
    }
    return ax;
}

} // namespace

template <typename T>
Tensor<T> upsample_bilinear(Tape<T>& tape, const Tensor<T>& x, std::size_t out_h, std::size_t out_w) {
    require_rank(x, 3, "upsample_bilinear");
    const std::size_t ch = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (out_h == 0 || out_w == 0) throw ShapeError("upsample_bilinear: empty output size");
    auto ay = make_axis(h, out_h);
    auto ax = make_axis(w, out_w);
    std::vector<T> out(ch * out_h * out_w);
    auto in = x.data();
    for (std::size_t c = 0; c < ch; ++c) {
        const T* src = in.data() + c * h * w;
        for (std::size_t i = 0; i < out_h; ++i) {
            const T fy = static_cast<T>(ay.frac[i]);
            for (std::size_t j = 0; j < out_w; ++j) {
                const T fx = static_cast<T>(ax.frac[j]);
                const T top = src[ay.lo[i] * w + ax.lo[j]] * (T{1} - fx) + src[ay.lo[i] * w + ax.hi[j]] * fx;
                const T bot = src[ay.hi[i] * w + ax.lo[j]] * (T{1} - fx) + src[ay.hi[i] * w + ax.hi[j]] * fx;
                out[(c * out_h + i) * out_w + j] = top * (T{1} - fy) + bot * fy;
            }
        }
    }
    auto y = Tensor<T>::from({ch, out_h, out_w}, std::move(out));
    if (tape.tracks({&x})) {
        tape.record({x}, y, [x, y, ch, h, w, out_h, out_w, ay, ax]() mutable {
            auto gy = y.grad();
            auto gx = x.mutable_grad();
            for (std::size_t c = 0; c < ch; ++c) {
                T* dst = gx.data() + c * h * w;
                for (std::size_t i = 0; i < out_h; ++i) {
                    const T fy = static_cast<T>(ay.frac[i]);
                    for (std::size_t j = 0; j < out_w; ++j) {
                        const T fx = static_cast<T>(ax.frac[j]);
                        const T g = gy[(c * out_h + i) * out_w + j];
                        dst[ay.lo[i] * w + ax.lo[j]] += g * (T{1} - fy) * (T{1} - fx);
                        dst[ay.lo[i] * w + ax.hi[j]] += g * (T{1} - fy) * fx;
                        dst[ay.hi[i] * w + ax.lo[j]] += g * fy * (T{1} - fx);
                        dst[ay.hi[i] * w + ax.hi[j]] += g * fy * fx;
                    }
                }
            }
        });
    }
    return y;
}

// -- slicing -----------------------------------------------------------------

template <typename T>
Tensor<T> slice_cols(Tape<T>& tape, const Tensor<T>& x, std::size_t start, std::size_t len) {
    require_rank(x, 2, "slice_cols");
    const std::size_t n = x.dim(0), c = x.dim(1);
    if (len == 0 || start + len > c) {
        throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " +
                             std::to_string(start + len) + ") out of range for " + shape_to_string(x.shape()));
    }
    std::vector<T> out(n * len);
    for (std::size_t r = 0; r < n; ++r) std::copy_n(x.raw() + r * c + start, len, out.data() + r * len);
    auto y = Tensor<T>::from({n, len}, std::move(out));
    if (tape.tracks({&x})) {
        tape.record({x}, y, [x, y, n, c, start, len]() mutable {
            auto gy = y.grad();
            auto gx = x.mutable_grad();
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < len; ++j) gx[r * c + start + j] += gy[r * len + j];
        });
    }
    return y;
}

template <typename T>
Tensor<T> concat_cols(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw UsageError("concat_cols: no inputs");
    const std::size_t n = parts.front().dim(0);
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_rank(p, 2, "concat_cols");
        if (p.dim(0) != n) {
            throw DimensionError("concat_cols: row count mismatch " + shape_to_string(parts.front().shape()) +
                                 " vs " + shape_to_string(p.shape()));
        }
        total += p.dim(1);
    }
    std::vector<T> out(n * total);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t c = p.dim(1);
        for (std::size_t r = 0; r < n; ++r) std::copy_n(p.raw() + r * c, c, out.data() + r * total + off);
        off += c;
    }
    auto y = Tensor<T>::from({n, total}, std::move(out));
    bool any = false;
    for (const auto& p : parts) any = any || tape.tracks({&p});
    if (any) {
        tape.record(parts, y, [parts, y, n, total]() mutable {
            auto gy = y.grad();
            std::size_t off = 0;
            for (auto& p : parts) {
                const std::size_t c = p.dim(1);
                if (p.requires_grad()) {
                    auto gp = p.mutable_grad();
                    for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t j = 0; j < c; ++j) gp[r * c + j] += gy[r * total + off + j];
                }
                off += c;
            }
        });
    }
    return y;
}

template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw UsageError("concat_rows: no inputs");
    Shape shape = parts.front().shape();
    std::size_t lead = 0;
    for (const auto& p : parts) {
        if (p.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1)) {
            throw DimensionError("concat_rows: trailing shape mismatch " + shape_to_string(shape) + " vs " +
                                 shape_to_string(p.shape()));
        }
        lead += p.dim(0);
    }
    shape[0] = lead;
    std::vector<T> out;
    out.reserve(shape_numel(shape));
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    auto y = Tensor<T>::from(std::move(shape), std::move(out));
    bool any = false;
    for (const auto& p : parts) any = any || tape.tracks({&p});
    if (any) {
        tape.record(parts, y, [parts, y]() mutable {
            auto gy = y.grad();
            std::size_t off = 0;
            for (auto& p : parts) {
                if (p.requires_grad()) accumulate(p.mutable_grad(), gy.subspan(off, p.numel()));
                off += p.numel();
            }
        });
    }
    return y;
}

// -- reductions / losses -----------------------------------------------------

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
    T acc{0};
    for (auto v : x.data()) acc += v;
    auto y = Tensor<T>::scalar(acc);
    if (tape.tracks({&x})) {
        tape.record({x}, y, [x, y]() mutable {
            const T g = y.grad()[0];
            for (auto& v : x.mutable_grad()) v += g;
        });
    }
    return y;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
    return scale(tape, sum(tape, x), T{1} / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const int> labels, int ignore_index) {
    require_rank(logits, 2, "cross_entropy");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (labels.size() != n) {
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(n) + " rows");
    }
    std::size_t count = 0;
    for (int l : labels) {
        if (l == ignore_index) continue;
        if (l < 0 || static_cast<std::size_t>(l) >= k) {
            throw DataError("cross_entropy: label " + std::to_string(l) + " outside [0, " + std::to_string(k) +
                            ") and not the ignore index " + std::to_string(ignore_index));
        }
        ++count;
    }
    std::vector<T> probs(n * k, T{0});
    T loss{0};
    for (std::size_t r = 0; r < n; ++r) {
        if (labels[r] == ignore_index) continue;
        const T* z = logits.raw() + r * k;
        const T mx = *std::max_element(z, z + k);
        T total{0};
        for (std::size_t j = 0; j < k; ++j) {
            probs[r * k + j] = std::exp(z[j] - mx);
            total += probs[r * k + j];
        }
        for (std::size_t j = 0; j < k; ++j) probs[r * k + j] /= total;
        loss += (std::log(total) + mx) - z[labels[r]];
    }
    const T inv = count > 0 ? T{1} / static_cast<T>(count) : T{0};
    auto y = Tensor<T>::scalar(loss * inv);
    if (tape.tracks({&logits})) {
        std::vector<int> lab(labels.begin(), labels.end());
        tape.record({logits}, y,
                    [logits, y, probs = std::move(probs), lab = std::move(lab), n, k, inv, ignore_index]() mutable {
                        const T g = y.grad()[0] * inv;
                        if (g == T{0}) return;
                        auto gl = logits.mutable_grad();
                        for (std::size_t r = 0; r < n; ++r) {
                            if (lab[r] == ignore_index) continue;
                            for (std::size_t j = 0; j < k; ++j) {
                                const T onehot = static_cast<int>(j) == lab[r] ? T{1} : T{0};
                                gl[r * k + j] += g * (probs[r * k + j] - onehot);
                            }
                        }
                    });
    }
    return y;
}

#define DFV2_INSTANTIATE_OPS(T)                                                                               \
    template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> bmm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, bool);                               \
    template Tensor<T> transpose(Tape<T>&, const Tensor<T>&);                                                 \
    template Tensor<T> swap_leading(Tape<T>&, const Tensor<T>&);                                              \
    template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                            \
    template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                     \
    template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                     \
    template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                     \
    template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                                  \
    template Tensor<T> scale_by(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> abs(Tape<T>&, const Tensor<T>&);                                                       \
    template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                                      \
    template Tensor<T> gelu(Tape<T>&, const Tensor<T>&);                                                      \
    template Tensor<T> exp_decay(Tape<T>&, const Tensor<T>&, T);                                              \
    template Tensor<T> add_bias(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                \
    template Tensor<T> linear(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
    template Tensor<T> softmax_rows(Tape<T>&, const Tensor<T>&);                                              \
    template Tensor<T> layer_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);    \
    template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,    \
                              std::size_t);                                                                   \
    template Tensor<T> avg_pool2d(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t, std::size_t,          \
                                  std::size_t);                                                               \
    template Tensor<T> upsample_bilinear(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);               \
    template Tensor<T> slice_cols(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);                      \
    template Tensor<T> concat_cols(Tape<T>&, const std::vector<Tensor<T>>&);                                  \
    template Tensor<T> concat_rows(Tape<T>&, const std::vector<Tensor<T>>&);                                  \
    template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                                       \
    template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                                                      \
    template Tensor<T> cross_entropy(Tape<T>&, const Tensor<T>&, std::span<const int>, int);

DFV2_INSTANTIATE_OPS(float)
DFV2_INSTANTIATE_OPS(double)

#undef DFV2_INSTANTIATE_OPS

} // namespace dfv2::ops
