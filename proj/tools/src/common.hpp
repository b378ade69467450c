#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include "dfv2/manifest.hpp"
#include "dfv2/metrics.hpp"
#include "dfv2/tensor.hpp"

namespace dfv2::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

/// Wall-clock stopwatch for manifest timings.
class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Starts a manifest with the fields every command records.
RunManifest begin_manifest(const std::string& command, std::uint64_t seed, Precision precision);

/// Writes the manifest and tells the user where it went.
void finish_manifest(RunManifest& manifest, const std::filesystem::path& path, const Stopwatch& clock);

/// `requested` when given, else dfv2-<command>.manifest in the working directory.
std::filesystem::path manifest_path(const std::string& command, const std::string& requested);

/// Echoes a `key = value` config text into the manifest under `config.`.
void echo_config(RunManifest& manifest, const std::string& config_text);

/// Stores mIoU and per-class IoU (n/a for excluded classes) under `prefix`.
void record_miou(RunManifest& manifest, const std::string& prefix, const MiouResult& result);

} // namespace dfv2::cli
