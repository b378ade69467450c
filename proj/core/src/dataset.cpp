#include "dfv2/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dfv2/netpbm.hpp"

namespace dfv2 {

void RgbdSample::validate(std::size_t num_classes) const {
    if (depth.rank() != 2) throw DataError(id + ": depth must be [h x w], got " + shape_to_string(depth.shape()));
    const std::size_t h = depth.dim(0), w = depth.dim(1);
    if (rgb.rank() != 3 || rgb.dim(0) != 3 || rgb.dim(1) != h || rgb.dim(2) != w) {
        throw DataError(id + ": rgb " + shape_to_string(rgb.shape()) + " does not match depth " +
                        shape_to_string(depth.shape()));
    }
    if (labels.size() != h * w) {
        throw DataError(id + ": " + std::to_string(labels.size()) + " labels for a " + std::to_string(h) + "x" +
                        std::to_string(w) + " image");
    }
    for (int l : labels) {
        if (l != kIgnoreIndex && (l < 0 || static_cast<std::size_t>(l) >= num_classes)) {
            throw DataError(id + ": label " + std::to_string(l) + " outside [0, " + std::to_string(num_classes) +
                            ") and not the ignore index");
        }
    }
}

namespace {

std::string dims_text(const PnmImage& img) {
    return std::to_string(img.height) + "x" + std::to_string(img.width);
}

} // namespace

RgbdSample read_sample(const std::filesystem::path& rgb_path, const std::filesystem::path& depth_path,
                       const std::filesystem::path& label_path, std::string id) {
    const PnmImage rgb = read_pnm(rgb_path);
    const PnmImage depth = read_pnm(depth_path);
    const PnmImage labels = read_pnm(label_path);
    if (rgb.channels != 3 || rgb.maxval != 255) {
        throw ParseError(rgb_path.string() + ": rgb must be an 8-bit P6 image");
    }
    if (depth.channels != 1) throw ParseError(depth_path.string() + ": depth must be a P5 image");
    if (labels.channels != 1 || labels.maxval > 255) {
        throw ParseError(label_path.string() + ": labels must be an 8-bit P5 image");
    }
    if (depth.width != rgb.width || depth.height != rgb.height) {
        throw ParseError("dimension mismatch: " + rgb_path.string() + " is " + dims_text(rgb) + " but " +
                         depth_path.string() + " is " + dims_text(depth));
    }
    if (labels.width != rgb.width || labels.height != rgb.height) {
        throw ParseError("dimension mismatch: " + rgb_path.string() + " is " + dims_text(rgb) + " but " +
                         label_path.string() + " is " + dims_text(labels));
    }
    const std::size_t h = rgb.height, w = rgb.width, n = h * w;
    RgbdSample s;
    s.id = id.empty() ? rgb_path.stem().string() : std::move(id);
    std::vector<double> c(3 * n);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t ch = 0; ch < 3; ++ch) c[ch * n + p] = rgb.samples[p * 3 + ch] / 255.0;
    s.rgb = TensorD::from({3, h, w}, std::move(c));
    s.depth = TensorD::from({h, w}, std::vector<double>(depth.samples.begin(), depth.samples.end()));
    s.labels.assign(labels.samples.begin(), labels.samples.end());
    return s;
}

void write_sample(const RgbdSample& s, const std::filesystem::path& rgb_path, const std::filesystem::path& depth_path,
                  const std::filesystem::path& label_path) {
    s.validate(kIgnoreIndex);
    const std::size_t h = s.height(), w = s.width(), n = h * w;
    PnmImage rgb{w, h, 3, 255, std::vector<std::uint16_t>(3 * n), {}};
    const auto c = s.rgb.data();
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t ch = 0; ch < 3; ++ch) {
            const double v = c[ch * n + p];
            if (!(v >= 0.0 && v <= 1.0)) throw DataError(s.id + ": rgb value outside [0, 1]");
            rgb.samples[p * 3 + ch] = static_cast<std::uint16_t>(std::lround(v * 255.0));
        }
    }
    PnmImage depth{w, h, 1, 65535, std::vector<std::uint16_t>(n), {}};
    const auto d = s.depth.data();
    for (std::size_t p = 0; p < n; ++p) {
        if (!(d[p] >= 0.0 && d[p] <= 65535.0) || d[p] != std::floor(d[p])) {
            throw DataError(s.id + ": depth must be integral in [0, 65535] to be stored losslessly");
        }
        depth.samples[p] = static_cast<std::uint16_t>(d[p]);
    }
    PnmImage labels{w, h, 1, 255, std::vector<std::uint16_t>(s.labels.begin(), s.labels.end()), {}};
    write_pnm(rgb_path, rgb);
    write_pnm(depth_path, depth);
    write_pnm(label_path, labels);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest '" + path.string() + "'");
    const auto base = path.parent_path();
    const auto resolve = [&base](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != 4) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated columns, got " +
                             std::to_string(cols.size()));
        }
        out.push_back({cols[0], resolve(cols[1]), resolve(cols[2]), resolve(cols[3])});
    }
    return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& e : entries) {
        f << e.id << '\t' << e.rgb.string() << '\t' << e.depth.string() << '\t' << e.labels.string() << '\n';
    }
    if (!f) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<RgbdSample> load_manifest_samples(const std::filesystem::path& path) {
    std::vector<RgbdSample> out;
    for (const auto& e : read_manifest(path)) out.push_back(read_sample(e.rgb, e.depth, e.labels, e.id));
    return out;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::vector<RgbdSample>& samples) {
    std::filesystem::create_directories(dir);
    std::vector<ManifestEntry> entries;
    for (const auto& s : samples) {
        ManifestEntry e{s.id, s.id + "_rgb.ppm", s.id + "_depth.pgm", s.id + "_labels.pgm"};
        write_sample(s, dir / e.rgb, dir / e.depth, dir / e.labels);
        entries.push_back(std::move(e));
    }
    const auto manifest = dir / "manifest.tsv";
    write_manifest(manifest, entries);
    return manifest;
}

} // namespace dfv2
