#pragma once

#include <string_view>

#include "dfv2/tape.hpp"

/// Geometry priors over a grid of patch tokens.
///
/// Tokens are flattened row-major everywhere: token p at grid row i and
/// column j has index p = i * W + j. All distance matrices are indexed
/// [query token][key token].
namespace dfv2 {

struct GridShape {
    std::size_t rows = 1;
    std::size_t cols = 1;

    std::size_t tokens() const noexcept { return rows * cols; }
    bool operator==(const GridShape&) const = default;
};

/// Pooled, normalized depth per patch token. Values lie in [0, 1].
template <typename T>
struct DepthGrid {
    GridShape grid;
    Tensor<T> z;  // rows x cols
};

/// How the depth and spatial distance matrices are combined.
enum class FusionMode {
    Memory,    // |w_d| * D + |w_s| * S  (two learnable scalars)
    Addition,  // D + S
    Hadamard,  // D (.) S
    Conv,      // relu(w_d * D + w_s * S + b * [p != q]), a 1x1 conv over the stacked priors
};

FusionMode parse_fusion_mode(std::string_view name);
std::string_view fusion_mode_name(FusionMode mode);

/// Which distance terms take part in the prior. Disabling both yields no
/// prior at all (vanilla attention).
struct PriorTerms {
    bool depth = true;
    bool spatial = true;

    bool any() const noexcept { return depth || spatial; }
    bool operator==(const PriorTerms&) const = default;
};

inline constexpr double kInitDepthWeight = 1.0;
inline constexpr double kInitSpatialWeight = 0.1;

/// Learnable fusion weights for one attention layer, shared by its heads.
/// Stored values are unconstrained; Memory mode uses their absolute values.
template <typename T>
struct FusionMemory {
    Tensor<T> w_depth;    // [1]
    Tensor<T> w_spatial;  // [1]
    Tensor<T> bias;       // [1], Conv mode only

    static FusionMemory make(FusionMode mode, T depth = T(kInitDepthWeight), T spatial = T(kInitSpatialWeight));

    T effective_depth() const;
    T effective_spatial() const;
};

/// Min-max normalizes a raw depth map to [0, 1]. A constant map becomes all zeros.
template <typename T>
Tensor<T> normalize_depth(const Tensor<T>& depth);

/// Replicates the last row/column until both dims are multiples of `patch`.
template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& depth, std::size_t patch);

/// Mean depth of each non-overlapping patch x patch window.
template <typename T>
DepthGrid<T> pool_depth_to_grid(const Tensor<T>& depth, std::size_t patch);

/// D[p][q] = |z_p - z_q|
template <typename T>
Tensor<T> depth_distance_matrix(const DepthGrid<T>& grid);

/// S[p][q] = |i - i'| + |j - j'|
template <typename T>
Tensor<T> spatial_distance_matrix(std::size_t rows, std::size_t cols);

/// Depth/spatial distances restricted to a token's own row (x) and column (y).
/// dx, sx are [HW x W]; dy, sy are [HW x H].
template <typename T>
struct AxialDistances {
    Tensor<T> dx, sx, dy, sy;
};

template <typename T>
AxialDistances<T> axial_distances(const DepthGrid<T>& grid);

/// Spatial-only axial distances (no depth available).
template <typename T>
AxialDistances<T> axial_distances(GridShape grid);

/// Fuses distance matrices of any matching shape. `d` may be undefined when
/// terms.depth is false. Returns an undefined tensor when no term is enabled.
template <typename T>
Tensor<T> fuse_priors(Tape<T>& tape, const Tensor<T>& d, const Tensor<T>& s, const FusionMemory<T>& mem,
                      FusionMode mode = FusionMode::Memory, PriorTerms terms = {});

/// Axial priors gx [HW x W] and gy [HW x H] computed directly from axial distances.
template <typename T>
struct AxialPriors {
    Tensor<T> gx, gy;
};

template <typename T>
AxialPriors<T> axial_priors(Tape<T>& tape, const AxialDistances<T>& dist, const FusionMemory<T>& mem,
                            FusionMode mode = FusionMode::Memory, PriorTerms terms = {});

template <typename T>
AxialPriors<T> axial_priors(const DepthGrid<T>& grid, const FusionMemory<T>& mem);

/// beta^G elementwise; 1 exactly where G is 0.
template <typename T>
Tensor<T> decay_tensor(Tape<T>& tape, const Tensor<T>& g, T beta);

/// All prior matrices for one resolution, materialized (small grids only).
template <typename T>
struct GeometryPrior {
    GridShape grid;
    Tensor<T> d, s, g, gx, gy;
};

template <typename T>
GeometryPrior<T> build_geometry_prior(const DepthGrid<T>& grid, const FusionMemory<T>& mem,
                                      FusionMode mode = FusionMode::Memory);

} // namespace dfv2
