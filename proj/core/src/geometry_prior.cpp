#include "dfv2/geometry_prior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "dfv2/ops.hpp"

namespace dfv2 {

FusionMode parse_fusion_mode(std::string_view name) {
    if (name == "memory") return FusionMode::Memory;
    if (name == "addition") return FusionMode::Addition;
    if (name == "hadamard") return FusionMode::Hadamard;
    if (name == "conv") return FusionMode::Conv;
    throw ParameterError("unknown fusion mode '" + std::string(name) +
                         "' (expected memory, addition, hadamard or conv)");
}

std::string_view fusion_mode_name(FusionMode mode) {
    switch (mode) {
    case FusionMode::Memory: return "memory";
    case FusionMode::Addition: return "addition";
    case FusionMode::Hadamard: return "hadamard";
    case FusionMode::Conv: return "conv";
    }
    return "memory";
}

template <typename T>
FusionMemory<T> FusionMemory<T>::make(FusionMode mode, T depth, T spatial) {
    FusionMemory m;
    m.w_depth = Tensor<T>::scalar(depth, true);
    m.w_spatial = Tensor<T>::scalar(spatial, true);
    if (mode == FusionMode::Conv) m.bias = Tensor<T>::scalar(T{0}, true);
    return m;
}

template <typename T>
T FusionMemory<T>::effective_depth() const {
    return std::abs(w_depth.item());
}

template <typename T>
T FusionMemory<T>::effective_spatial() const {
    return std::abs(w_spatial.item());
}

template <typename T>
Tensor<T> normalize_depth(const Tensor<T>& depth) {
    auto in = depth.data();
    const auto [lo_it, hi_it] = std::minmax_element(in.begin(), in.end());
    const T lo = *lo_it, hi = *hi_it;
    std::vector<T> out(in.size(), T{0});
    if (hi > lo) {
        const T range = hi - lo;
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = (in[i] - lo) / range;
    }
    return Tensor<T>::from(depth.shape(), std::move(out));
}

template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& depth, std::size_t patch) {
    if (depth.rank() != 2) throw DimensionError("pad_to_multiple: expected [h x w], got " + shape_to_string(depth.shape()));
    if (patch == 0) throw ParameterError("pad_to_multiple: patch must be >= 1");
    const std::size_t h = depth.dim(0), w = depth.dim(1);
    const std::size_t ph = (h + patch - 1) / patch * patch, pw = (w + patch - 1) / patch * patch;
    std::vector<T> out(ph * pw);
    for (std::size_t i = 0; i < ph; ++i)
        for (std::size_t j = 0; j < pw; ++j) out[i * pw + j] = depth.at(std::min(i, h - 1), std::min(j, w - 1));
    return Tensor<T>::from({ph, pw}, std::move(out));
}

template <typename T>
DepthGrid<T> pool_depth_to_grid(const Tensor<T>& depth, std::size_t patch) {
    if (depth.rank() != 2) {
        throw DimensionError("pool_depth_to_grid: expected [h x w] depth, got " + shape_to_string(depth.shape()));
    }
    if (patch == 0) throw ParameterError("pool_depth_to_grid: patch must be >= 1");
    for (auto v : depth.data()) {
        if (!(v >= T{0} && v <= T{1})) {
            throw DomainError("pool_depth_to_grid: depth must be normalized to [0, 1], found " + std::to_string(v));
        }
    }
    Tape<T> tape(false);
    DepthGrid<T> grid;
    grid.z = ops::avg_pool2d(tape, depth, patch, patch, patch, patch);
    grid.grid = {grid.z.dim(0), grid.z.dim(1)};
    return grid;
}

template <typename T>
Tensor<T> depth_distance_matrix(const DepthGrid<T>& grid) {
    const std::size_t n = grid.grid.tokens();
    auto z = grid.z.data();
    std::vector<T> out(n * n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) out[p * n + q] = std::abs(z[p] - z[q]);
    return Tensor<T>::from({n, n}, std::move(out));
}

template <typename T>
Tensor<T> spatial_distance_matrix(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw ShapeError("spatial_distance_matrix: grid must be at least 1x1");
    const std::size_t n = rows * cols;
    std::vector<T> out(n * n);
    for (std::size_t p = 0; p < n; ++p) {
        const auto i = static_cast<long>(p / cols), j = static_cast<long>(p % cols);
        for (std::size_t q = 0; q < n; ++q) {
            const auto i2 = static_cast<long>(q / cols), j2 = static_cast<long>(q % cols);
            out[p * n + q] = static_cast<T>(std::labs(i - i2) + std::labs(j - j2));
        }
    }
    return Tensor<T>::from({n, n}, std::move(out));
}

namespace {

template <typename T>
AxialDistances<T> axial_impl(GridShape g, const T* z) {
    const std::size_t H = g.rows, W = g.cols, n = H * W;
    std::vector<T> dx(n * W), sx(n * W), dy(n * H), sy(n * H);
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) {
            const std::size_t p = i * W + j;
            for (std::size_t j2 = 0; j2 < W; ++j2) {
                dx[p * W + j2] = z ? std::abs(z[p] - z[i * W + j2]) : T{0};
                sx[p * W + j2] = static_cast<T>(j > j2 ? j - j2 : j2 - j);
            }
            for (std::size_t i2 = 0; i2 < H; ++i2) {
                dy[p * H + i2] = z ? std::abs(z[p] - z[i2 * W + j]) : T{0};
                sy[p * H + i2] = static_cast<T>(i > i2 ? i - i2 : i2 - i);
            }
        }
    AxialDistances<T> out;
    if (z) {
        out.dx = Tensor<T>::from({n, W}, std::move(dx));
        out.dy = Tensor<T>::from({n, H}, std::move(dy));
    }
    out.sx = Tensor<T>::from({n, W}, std::move(sx));
    out.sy = Tensor<T>::from({n, H}, std::move(sy));
    return out;
}

template <typename T>
Tensor<T> offdiag_mask(const Tensor<T>& s) {
    std::vector<T> m(s.numel());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = s[i] > T{0} ? T{1} : T{0};
    return Tensor<T>::from(s.shape(), std::move(m));
}

} // namespace

template <typename T>
AxialDistances<T> axial_distances(const DepthGrid<T>& grid) {
    return axial_impl<T>(grid.grid, grid.z.raw());
}

template <typename T>
AxialDistances<T> axial_distances(GridShape grid) {
    return axial_impl<T>(grid, nullptr);
}

template <typename T>
Tensor<T> fuse_priors(Tape<T>& tape, const Tensor<T>& d, const Tensor<T>& s, const FusionMemory<T>& mem,
                      FusionMode mode, PriorTerms terms) {
    if (!terms.any()) return {};
    if (terms.depth && !d.defined()) throw UsageError("fuse_priors: depth term enabled but no depth distances given");
    if (terms.spatial && !s.defined()) throw UsageError("fuse_priors: spatial term enabled but no spatial distances given");
    if (terms.depth && terms.spatial && d.shape() != s.shape()) {
        throw DimensionError("fuse_priors: depth prior " + shape_to_string(d.shape()) + " and spatial prior " +
                             shape_to_string(s.shape()) + " differ in shape");
    }

    if (mode == FusionMode::Memory) {
        Tensor<T> out;
        if (terms.depth) out = ops::scale_by(tape, ops::abs(tape, mem.w_depth), d);
        if (terms.spatial) {
            auto sp = ops::scale_by(tape, ops::abs(tape, mem.w_spatial), s);
            out = out.defined() ? ops::add(tape, out, sp) : sp;
        }
        return out;
    }

    // The remaining operators are only meaningful with both terms present.
    if (!(terms.depth && terms.spatial)) {
        throw ParameterError("fusion mode '" + std::string(fusion_mode_name(mode)) +
                             "' requires both depth and spatial priors");
    }
    switch (mode) {
    case FusionMode::Addition: return ops::add(tape, d, s);
    case FusionMode::Hadamard: return ops::mul(tape, d, s);
    case FusionMode::Conv: {
        auto lin = ops::add(tape, ops::scale_by(tape, mem.w_depth, d), ops::scale_by(tape, mem.w_spatial, s));
        lin = ops::add(tape, lin, ops::scale_by(tape, mem.bias, offdiag_mask(s)));
        return ops::relu(tape, lin);
    }
    case FusionMode::Memory: break;
    }
    return {};
}

template <typename T>
AxialPriors<T> axial_priors(Tape<T>& tape, const AxialDistances<T>& dist, const FusionMemory<T>& mem,
                            FusionMode mode, PriorTerms terms) {
    AxialPriors<T> out;
    out.gx = fuse_priors(tape, dist.dx, dist.sx, mem, mode, terms);
    out.gy = fuse_priors(tape, dist.dy, dist.sy, mem, mode, terms);
    return out;
}

template <typename T>
AxialPriors<T> axial_priors(const DepthGrid<T>& grid, const FusionMemory<T>& mem) {
    Tape<T> tape(false);
    return axial_priors(tape, axial_distances(grid), mem);
}

template <typename T>
Tensor<T> decay_tensor(Tape<T>& tape, const Tensor<T>& g, T beta) {
    return ops::exp_decay(tape, g, beta);
}

template <typename T>
GeometryPrior<T> build_geometry_prior(const DepthGrid<T>& grid, const FusionMemory<T>& mem, FusionMode mode) {
    Tape<T> tape(false);
    GeometryPrior<T> prior;
    prior.grid = grid.grid;
    prior.d = depth_distance_matrix(grid);
    prior.s = spatial_distance_matrix<T>(grid.grid.rows, grid.grid.cols);
    prior.g = fuse_priors(tape, prior.d, prior.s, mem, mode);
    auto axial = axial_priors(tape, axial_distances(grid), mem, mode);
    prior.gx = axial.gx;
    prior.gy = axial.gy;
    return prior;
}

#define DFV2_INSTANTIATE_PRIOR(T)                                                                             \
    template struct FusionMemory<T>;                                                                          \
    template Tensor<T> normalize_depth(const Tensor<T>&);                                                     \
    template Tensor<T> pad_to_multiple(const Tensor<T>&, std::size_t);                                        \
    template DepthGrid<T> pool_depth_to_grid(const Tensor<T>&, std::size_t);                                  \
    template Tensor<T> depth_distance_matrix(const DepthGrid<T>&);                                            \
    template Tensor<T> spatial_distance_matrix<T>(std::size_t, std::size_t);                                  \
    template AxialDistances<T> axial_distances(const DepthGrid<T>&);                                          \
    template AxialDistances<T> axial_distances<T>(GridShape);                                                 \
    template Tensor<T> fuse_priors(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const FusionMemory<T>&,      \
                                   FusionMode, PriorTerms);                                                   \
    template AxialPriors<T> axial_priors(Tape<T>&, const AxialDistances<T>&, const FusionMemory<T>&,          \
                                         FusionMode, PriorTerms);                                             \
    template AxialPriors<T> axial_priors(const DepthGrid<T>&, const FusionMemory<T>&);                        \
    template Tensor<T> decay_tensor(Tape<T>&, const Tensor<T>&, T);                                           \
    template GeometryPrior<T> build_geometry_prior(const DepthGrid<T>&, const FusionMemory<T>&, FusionMode);

DFV2_INSTANTIATE_PRIOR(float)
DFV2_INSTANTIATE_PRIOR(double)

#undef DFV2_INSTANTIATE_PRIOR

} // namespace dfv2
