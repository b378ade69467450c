#include "dfv2/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace dfv2 {

namespace {

constexpr std::array<char, 4> kMagic{'D', 'F', 'V', '2'};

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        u32(static_cast<std::uint32_t>(bits));
        u32(static_cast<std::uint32_t>(bits >> 32));
    }
    void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    const std::vector<char>& buffer() const { return buf_; }

private:
    void le(std::uint32_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    std::vector<char> buf_;
};

class Reader {
public:
    Reader(std::vector<char> buf, std::string file) : buf_(std::move(buf)), file_(std::move(file)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return le(4); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return std::bit_cast<double>(lo | (hi << 32));
    }
    std::string str(std::size_t n) {
        const char* p = take(n);
        return std::string(p, n);
    }
    bool done() const { return pos_ == buf_.size(); }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(file_ + ": " + msg); }

private:
    const char* take(std::size_t n) {
        if (buf_.size() - pos_ < n) fail("truncated checkpoint at byte " + std::to_string(pos_));
        const char* p = buf_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::uint32_t le(int n) {
        const char* p = take(static_cast<std::size_t>(n));
        std::uint32_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
        return v;
    }
    std::vector<char> buf_;
    std::string file_;
    std::size_t pos_ = 0;
};

} // namespace

void write_checkpoint_file(const std::filesystem::path& path, const std::vector<CheckpointTensor>& tensors) {
    Writer w;
    w.bytes(kMagic.data(), kMagic.size());
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        if (t.name.size() > 0xFFFF) throw ParameterError("checkpoint: tensor name too long: " + t.name);
        if (t.shape.size() > 0xFF) throw ParameterError("checkpoint: rank too large for " + t.name);
        if (shape_numel(t.shape) != t.data.size()) {
            throw ShapeError("checkpoint: " + t.name + " has " + std::to_string(t.data.size()) +
                             " values for shape " + shape_to_string(t.shape));
        }
        w.u16(static_cast<std::uint16_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        if (t.width != 4 && t.width != 8) throw ParameterError("checkpoint: element width must be 4 or 8");
        w.u8(static_cast<std::uint8_t>(t.shape.size()));
        for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
        w.u8(t.width);
        for (double v : t.data) {
            if (t.width == 4) {
                w.f32(static_cast<float>(v));
            } else {
                w.f64(v);
            }
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!f) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<CheckpointTensor> read_checkpoint_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::vector<char> buf{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    Reader r(std::move(buf), path.string());
    if (r.str(4) != std::string(kMagic.data(), kMagic.size())) r.fail("bad magic (not a DFV2 checkpoint)");
    const auto version = r.u32();
    if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
    const auto count = r.u32();
    std::vector<CheckpointTensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointTensor t;
        t.name = r.str(r.u16());
        const auto rank = r.u8();
        for (std::uint8_t k = 0; k < rank; ++k) t.shape.push_back(r.u32());
        t.width = r.u8();
        if (t.width != 4 && t.width != 8) r.fail("tensor '" + t.name + "' has element width " + std::to_string(t.width));
        const std::size_t n = shape_numel(t.shape);
        t.data.reserve(n);
        for (std::size_t k = 0; k < n; ++k) t.data.push_back(t.width == 4 ? r.f32() : r.f64());
        out.push_back(std::move(t));
    }
    if (!r.done()) r.fail("trailing bytes after " + std::to_string(count) + " tensors");
    return out;
}

std::filesystem::path checkpoint_config_path(const std::filesystem::path& checkpoint) {
    auto p = checkpoint;
    p += ".cfg";
    return p;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const SegmentationModel<T>& model, const RunConfig& config) {
    if (!(config.model == model.config())) throw UsageError("save_checkpoint: run config does not describe the model");
    std::vector<CheckpointTensor> tensors;
    for (const auto& p : model.parameters()) {
        CheckpointTensor t{p.name, p.tensor.shape(), static_cast<std::uint8_t>(sizeof(T)), {}};
        t.data.assign(p.tensor.data().begin(), p.tensor.data().end());
        tensors.push_back(std::move(t));
    }
    write_checkpoint_file(path, tensors);
    const auto cfg_path = checkpoint_config_path(path);
    std::ofstream f(cfg_path);
    if (!f) throw IoError("cannot open '" + cfg_path.string() + "' for writing");
    f << format_run_config(config);
    if (!f) throw IoError("failed writing '" + cfg_path.string() + "'");
}

template <typename T>
SegmentationModel<T> load_checkpoint(const std::filesystem::path& path, RunConfig* config_out) {
    const RunConfig cfg = load_run_config(checkpoint_config_path(path));
    auto model = SegmentationModel<T>::create(cfg.model, 0);
    std::map<std::string, const CheckpointTensor*> by_name;
    const auto tensors = read_checkpoint_file(path);
    for (const auto& t : tensors) by_name[t.name] = &t;
    const auto params = model.parameters();
    if (params.size() != tensors.size()) {
        throw ParseError(path.string() + ": checkpoint has " + std::to_string(tensors.size()) +
                         " tensors but its config describes " + std::to_string(params.size()));
    }
    for (auto p : params) {
        const auto it = by_name.find(p.name);
        if (it == by_name.end()) throw ParseError(path.string() + ": missing tensor '" + p.name + "'");
        if (it->second->shape != p.tensor.shape()) {
            throw ParseError(path.string() + ": tensor '" + p.name + "' has shape " +
                             shape_to_string(it->second->shape) + ", config expects " +
                             shape_to_string(p.tensor.shape()));
        }
        auto dst = p.tensor.mutable_data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second->data[i]);
    }
    if (config_out != nullptr) *config_out = cfg;
    return model;
}

template void save_checkpoint(const std::filesystem::path&, const SegmentationModel<float>&, const RunConfig&);
template void save_checkpoint(const std::filesystem::path&, const SegmentationModel<double>&, const RunConfig&);
template SegmentationModel<float> load_checkpoint(const std::filesystem::path&, RunConfig*);
template SegmentationModel<double> load_checkpoint(const std::filesystem::path&, RunConfig*);

} // namespace dfv2
