#include "dfv2/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dfv2/errors.hpp"

#ifndef DFV2_VERSION_STRING
#define DFV2_VERSION_STRING "unknown"
#endif

namespace dfv2 {

std::string_view version_string() {
    return DFV2_VERSION_STRING;
}

std::string RunManifest::format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void RunManifest::set(std::string key, std::string value) {
    if (key.empty() || key.find_first_of("=\n") != std::string::npos) {
        throw ParameterError("manifest key '" + key + "' is empty or contains '=' or a newline");
    }
    if (value.find('\n') != std::string::npos) throw ParameterError("manifest value for '" + key + "' spans lines");
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries_.emplace_back(std::move(key), std::move(value));
}

void RunManifest::set_number(std::string key, double value) {
    set(std::move(key), format_number(value));
}

void RunManifest::set_int(std::string key, long long value) {
    set(std::move(key), std::to_string(value));
}

std::optional<std::string> RunManifest::get(std::string_view key) const {
    for (const auto& [k, v] : entries_) {
        if (k == key) return v;
    }
    return std::nullopt;
}

double RunManifest::get_number(std::string_view key) const {
    const auto v = get(key);
    if (!v) throw ParseError("manifest has no key '" + std::string(key) + "'");
    try {
        std::size_t used = 0;
        const double d = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ParseError("manifest value for '" + std::string(key) + "' is not a number: " + *v);
    }
}

std::string RunManifest::to_text() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
    return out;
}

RunManifest RunManifest::parse(std::string_view text, std::string_view source) {
    RunManifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) {
            throw ParseError(std::string(source) + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        m.set(line.substr(0, eq), line.substr(eq + 3));
    }
    return m;
}

void RunManifest::write(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << to_text();
    if (!f) throw IoError("failed writing '" + path.string() + "'");
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path.string());
}

} // namespace dfv2
