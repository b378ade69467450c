#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dfv2/model.hpp"

namespace dfv2 {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
    std::string name;
    Shape shape;
    /// Bytes per stored element: 4 (float32) or 8 (float64).
    std::uint8_t width = 4;
    std::vector<double> data;
};

/// Binary layout, all integers little-endian: "DFV2", u32 version, u32 tensor
/// count, then per tensor: u16 name length, name bytes, u8 rank, u32 dims,
/// u8 element width, IEEE payload.
void write_checkpoint_file(const std::filesystem::path& path, const std::vector<CheckpointTensor>& tensors);
std::vector<CheckpointTensor> read_checkpoint_file(const std::filesystem::path& path);

/// Path of the `key = value` config stored next to a checkpoint.
std::filesystem::path checkpoint_config_path(const std::filesystem::path& checkpoint);

/// Writes the weights in the model's own precision plus the run config sidecar.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const SegmentationModel<T>& model, const RunConfig& config);

/// Rebuilds the model from the sidecar config and loads weights by name.
/// Missing, extra or misshapen tensors raise ParseError.
template <typename T>
SegmentationModel<T> load_checkpoint(const std::filesystem::path& path, RunConfig* config_out = nullptr);

} // namespace dfv2
