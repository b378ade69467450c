#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dfv2 {

/// Library version as reported by `git describe` at configure time.
std::string_view version_string();

/// Ordered `key = value` record written by every command. Numbers are
/// printed with 17 significant digits so they read back exactly.
class RunManifest {
public:
    void set(std::string key, std::string value);
    void set_number(std::string key, double value);
    void set_int(std::string key, long long value);

    std::optional<std::string> get(std::string_view key) const;
    /// Throws ParseError when the key is missing or not a number.
    double get_number(std::string_view key) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

    std::string to_text() const;
    static RunManifest parse(std::string_view text, std::string_view source = "<manifest>");

    void write(const std::filesystem::path& path) const;
    static RunManifest read(const std::filesystem::path& path);

    /// Formats with %.17g.
    static std::string format_number(double value);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

} // namespace dfv2
