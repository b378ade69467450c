#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dfv2/tensor.hpp"

namespace dfv2 {

inline constexpr int kIgnoreIndex = 255;

/// One aligned RGB-D sample. rgb is [3 x h x w] in [0, 1]; depth is [h x w]
/// raw sensor units; labels are row-major h*w in [0, K) or kIgnoreIndex.
struct RgbdSample {
    std::string id;
    TensorD rgb;
    TensorD depth;
    std::vector<int> labels;

    std::size_t height() const { return depth.dim(0); }
    std::size_t width() const { return depth.dim(1); }

    /// Throws DataError when dims disagree or a label is outside [0, K) u {255}.
    void validate(std::size_t num_classes) const;
};

/// rgb: P6 8-bit; depth: P5 (16-bit big-endian when maxval > 255); labels: P5 8-bit.
RgbdSample read_sample(const std::filesystem::path& rgb_path, const std::filesystem::path& depth_path,
                       const std::filesystem::path& label_path, std::string id = {});

/// Inverse of read_sample. Depth must be integral in [0, 65535].
void write_sample(const RgbdSample& sample, const std::filesystem::path& rgb_path,
                  const std::filesystem::path& depth_path, const std::filesystem::path& label_path);

struct ManifestEntry {
    std::string id;
    std::filesystem::path rgb, depth, labels;
};

/// One `id<TAB>rgb<TAB>depth<TAB>labels` line per sample. Relative paths are
/// resolved against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

std::vector<RgbdSample> load_manifest_samples(const std::filesystem::path& path);

/// Writes samples as <dir>/<id>_{rgb.ppm,depth.pgm,labels.pgm} plus <dir>/manifest.tsv.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::vector<RgbdSample>& samples);

} // namespace dfv2
