#include "dfv2/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "dfv2/errors.hpp"

namespace dfv2 {

namespace {

class HeaderScanner {
public:
    HeaderScanner(std::string_view bytes, std::string_view source) : b_(bytes), src_(source) {}

    [[noreturn]] void malformed(const std::string& what) const {
        throw ParseError(std::string(src_) + ": malformed header: " + what);
    }

    void skip_space_and_comments() {
        while (pos_ < b_.size()) {
            const char c = b_[pos_];
            if (c == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t number(const char* field) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        std::size_t v = 0;
        while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
            v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
            if (v > 0xFFFFFFu) malformed(std::string(field) + " is too large");
            ++pos_;
        }
        if (pos_ == start) malformed(std::string("expected ") + field);
        return v;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }
    std::string_view bytes() const { return b_; }

private:
    std::string_view b_;
    std::string_view src_;
    std::size_t pos_ = 0;
};

} // namespace

PnmImage decode_pnm(std::string_view bytes, std::string_view source) {
    HeaderScanner s(bytes, source);
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        s.malformed("expected magic P5 or P6");
    }
    PnmImage img;
    img.channels = bytes[1] == '6' ? 3 : 1;
    s.advance(2);
    img.width = s.number("width");
    img.height = s.number("height");
    const std::size_t maxval = s.number("maxval");
    if (img.width == 0 || img.height == 0) s.malformed("zero width or height");
    if (maxval == 0 || maxval > 65535) s.malformed("maxval must be in [1, 65535]");
    img.maxval = static_cast<std::uint16_t>(maxval);
    if (s.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[s.pos()]))) {
        s.malformed("expected a single whitespace after maxval");
    }
    s.advance(1);
    const std::size_t bps = maxval < 256 ? 1 : 2;
    const std::size_t count = img.width * img.height * img.channels;
    const std::size_t have = bytes.size() - s.pos();
    if (have < count * bps) {
        throw ParseError(std::string(source) + ": truncated payload: expected " + std::to_string(count * bps) +
                         " bytes, found " + std::to_string(have));
    }
    if (have > count * bps) {
        throw ParseError(std::string(source) + ": " + std::to_string(have - count * bps) +
                         " unexpected trailing bytes after payload");
    }
    img.samples.resize(count);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + s.pos());
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint16_t v = bps == 1 ? p[i] : static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
        if (v > maxval) {
            throw ParseError(std::string(source) + ": sample " + std::to_string(i) + " value " + std::to_string(v) +
                             " exceeds maxval " + std::to_string(maxval));
        }
        img.samples[i] = v;
    }
    return img;
}

std::string encode_pnm(const PnmImage& img) {
    if (img.channels != 1 && img.channels != 3) throw ParameterError("encode_pnm: channels must be 1 or 3");
    if (img.maxval == 0) throw ParameterError("encode_pnm: maxval must be >= 1");
    if (img.samples.size() != img.width * img.height * img.channels) {
        throw ShapeError("encode_pnm: " + std::to_string(img.samples.size()) + " samples for " +
                         std::to_string(img.width) + "x" + std::to_string(img.height) + "x" +
                         std::to_string(img.channels));
    }
    std::string out = img.channels == 3 ? "P6\n" : "P5\n";
    if (!img.comment.empty()) out += "# " + img.comment + "\n";
    out += std::to_string(img.width) + " " + std::to_string(img.height) + "\n" + std::to_string(img.maxval) + "\n";
    const bool wide = img.maxval >= 256;
    out.reserve(out.size() + img.samples.size() * (wide ? 2 : 1));
    for (auto v : img.samples) {
        if (v > img.maxval) throw ParameterError("encode_pnm: sample exceeds maxval");
        if (wide) out.push_back(static_cast<char>(v >> 8));
        out.push_back(static_cast<char>(v & 0xFF));
    }
    return out;
}

PnmImage read_pnm(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    const std::string bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    return decode_pnm(bytes, path.string());
}

void write_pnm(const std::filesystem::path& path, const PnmImage& image) {
    const std::string bytes = encode_pnm(image);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing '" + path.string() + "'");
}

} // namespace dfv2
