#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dfv2 {

/// Binary Netpbm image: P5 (1 channel) or P6 (3 channels). Samples are
/// stored interleaved row-major; maxval >= 256 means 16-bit big-endian on disk.
struct PnmImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;
    std::uint16_t maxval = 255;
    std::vector<std::uint16_t> samples;
    /// Written as a single '#' header line when non-empty; ignored on read.
    std::string comment;

    std::uint16_t at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
        return samples[(row * width + col) * channels + ch];
    }
};

/// Parses P5/P6 bytes. Errors are ParseError prefixed with `source` and
/// distinguish malformed headers from truncated payloads.
PnmImage decode_pnm(std::string_view bytes, std::string_view source);
std::string encode_pnm(const PnmImage& image);

PnmImage read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const PnmImage& image);

} // namespace dfv2
