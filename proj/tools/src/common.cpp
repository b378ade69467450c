#include "common.hpp"

#include <iostream>
#include <sstream>

namespace dfv2::cli {

RunManifest begin_manifest(const std::string& command, std::uint64_t seed, Precision precision) {
    RunManifest m;
    m.set("command", command);
    m.set("version", std::string(version_string()));
    m.set_int("seed", static_cast<long long>(seed));
    m.set("precision", precision_name(precision));
    return m;
}

void finish_manifest(RunManifest& manifest, const std::filesystem::path& path, const Stopwatch& clock) {
    manifest.set_number("time.total_s", clock.seconds());
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    manifest.write(path);
    std::cout << "manifest: " << path.string() << "\n";
}

std::filesystem::path manifest_path(const std::string& command, const std::string& requested) {
    if (!requested.empty()) return requested;
    return "dfv2-" + command + ".manifest";
}

void echo_config(RunManifest& manifest, const std::string& config_text) {
    std::istringstream in(config_text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        manifest.set("config." + line.substr(0, eq), line.substr(eq + 3));
    }
}

void record_miou(RunManifest& m, const std::string& prefix, const MiouResult& r) {
    m.set_number(prefix + "miou", r.miou);
    for (std::size_t k = 0; k < r.per_class.size(); ++k) {
        const std::string key = prefix + "iou.class" + std::to_string(k);
        if (r.per_class[k]) {
            m.set_number(key, *r.per_class[k]);
        } else {
            m.set(key, "n/a");
        }
    }
}

} // namespace dfv2::cli
