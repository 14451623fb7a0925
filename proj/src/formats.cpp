#include "edlb/formats.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "edlb/errors.hpp"

namespace edlb {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

namespace {

// Netpbm-style header tokenizer: whitespace separated, '#' starts a comment.
class HeaderReader {
public:
    explicit HeaderReader(const std::string& bytes) : s_(bytes) {}

    std::string token() {
        skip_space();
        const std::size_t start = pos_;
        last_ = start;
        while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
        if (start == pos_) throw ParseError("unexpected end of header", pos_);
        return s_.substr(start, pos_ - start);
    }

    long integer(const char* what) {
        const std::string t = token();
        const std::size_t at = last_;
        for (char c : t) {
            if (!std::isdigit(static_cast<unsigned char>(c))) throw ParseError(std::string("bad ") + what + " '" + t + "'", at);
        }
        if (t.size() > 9) throw ParseError(std::string(what) + " too large", at);
        return std::stol(t);
    }

    // Exactly one whitespace byte separates the header from the payload.
    void end_header() {
        if (pos_ >= s_.size() || !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
            throw ParseError("missing whitespace after header", pos_);
        }
        ++pos_;
    }

    std::size_t pos() const { return pos_; }
    // Start of the most recent token.
    std::size_t last() const { return last_; }

private:
    void skip_space() {
        while (pos_ < s_.size()) {
            if (s_[pos_] == '#') {
                while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    std::size_t last_ = 0;
};

}  // namespace

std::string encode_ppm(const Image8& img) {
    if (img.width <= 0 || img.height <= 0 || img.rgb.size() != std::size_t(img.width) * img.height * 3) {
        throw DimensionError("ppm: image buffer does not match its size");
    }
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
    return out;
}

Image8 decode_ppm(const std::string& bytes) {
    HeaderReader h(bytes);
    if (h.token() != "P6") throw ParseError("not a binary PPM (expected P6)", 0);
    Image8 img;
    img.width = static_cast<int>(h.integer("width"));
    if (img.width <= 0) throw ParseError("ppm: zero width", h.last());
    img.height = static_cast<int>(h.integer("height"));
    if (img.height <= 0) throw ParseError("ppm: zero height", h.last());
    const long maxval = h.integer("max value");
    if (maxval != 255) throw ParseError("ppm: max value must be 255, got " + std::to_string(maxval), h.last());
    h.end_header();
    const std::size_t need = std::size_t(img.width) * img.height * 3;
    if (bytes.size() - h.pos() < need) throw ParseError("ppm: truncated pixel data", bytes.size());
    img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.pos()),
                   bytes.begin() + static_cast<std::ptrdiff_t>(h.pos() + need));
    return img;
}

void write_ppm(const std::filesystem::path& path, const Image8& img) { write_file(path, encode_ppm(img)); }
Image8 read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

// ---------------------------------------------------------------------------

namespace {

std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

void put_le(std::string& out, float v) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) u = bswap32(u);
    char b[4];
    std::memcpy(b, &u, 4);
    out.append(b, 4);
}

float get_float(const char* p, bool little) {
    std::uint32_t u;
    std::memcpy(&u, p, 4);
    const bool native_little = std::endian::native == std::endian::little;
    if (little != native_little) u = bswap32(u);
    return std::bit_cast<float>(u);
}

}  // namespace

std::string encode_pfm(const FloatMap& map) {
    if (map.width <= 0 || map.height <= 0 || map.data.size() != std::size_t(map.width) * map.height) {
        throw DimensionError("pfm: map buffer does not match its size");
    }
    std::string out = "Pf\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n-1.0\n";
    out.reserve(out.size() + map.data.size() * 4);
    for (int y = map.height - 1; y >= 0; --y)
        for (int x = 0; x < map.width; ++x) put_le(out, map.data[std::size_t(y) * map.width + x]);
    return out;
}

FloatMap decode_pfm(const std::string& bytes) {
    HeaderReader h(bytes);
    const std::string magic = h.token();
    if (magic != "Pf") throw ParseError("not a greyscale PFM (expected Pf, got '" + magic + "')", 0);
    FloatMap map;
    map.width = static_cast<int>(h.integer("width"));
    if (map.width <= 0) throw ParseError("pfm: zero width", h.last());
    map.height = static_cast<int>(h.integer("height"));
    if (map.height <= 0) throw ParseError("pfm: zero height", h.last());
    const std::string scale_tok = h.token();
    const std::size_t at = h.last();
    double scale = 0.0;
    try {
        std::size_t used = 0;
        scale = std::stod(scale_tok, &used);
        if (used != scale_tok.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ParseError("pfm: bad scale '" + scale_tok + "'", at);
    }
    if (scale == 0.0 || !std::isfinite(scale)) throw ParseError("pfm: scale must be nonzero", at);
    h.end_header();
    const bool little = scale < 0.0;
    const std::size_t need = std::size_t(map.width) * map.height * 4;
    if (bytes.size() - h.pos() < need) throw ParseError("pfm: truncated data", bytes.size());
    map.data.resize(std::size_t(map.width) * map.height);
    const char* p = bytes.data() + h.pos();
    for (int y = map.height - 1; y >= 0; --y)
        for (int x = 0; x < map.width; ++x, p += 4) map.data[std::size_t(y) * map.width + x] = get_float(p, little);
    return map;
}

void write_pfm(const std::filesystem::path& path, const FloatMap& map) { write_file(path, encode_pfm(map)); }
FloatMap read_pfm(const std::filesystem::path& path) { return decode_pfm(read_file(path)); }

// ---------------------------------------------------------------------------

std::string encode_tum(const std::vector<StampedPose>& traj) {
    std::string out = "# timestamp tx ty tz qx qy qz qw\n";
    char line[256];
    for (const auto& s : traj) {
        const auto q = s.pose.quaternion();
        std::snprintf(line, sizeof line, "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", s.timestamp, s.pose.t[0],
                      s.pose.t[1], s.pose.t[2], q[0], q[1], q[2], q[3]);
        out += line;
    }
    return out;
}

std::vector<StampedPose> decode_tum(const std::string& text) {
    std::vector<StampedPose> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        const std::size_t first = line.find_first_not_of(" \t\r");
        if (first != std::string::npos && line[first] != '#') {
            std::istringstream ss(line);
            double v[8];
            for (int i = 0; i < 8; ++i) {
                if (!(ss >> v[i])) throw ParseError("tum: expected 8 numbers per line", pos);
            }
            std::string rest;
            if (ss >> rest) throw ParseError("tum: trailing data '" + rest + "'", pos);
            const double n = std::sqrt(v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]);
            if (!(n > 1e-9)) throw ParseError("tum: zero quaternion", pos);
            out.push_back({v[0], PoseSE3::from_quaternion({v[4], v[5], v[6], v[7]}, {v[1], v[2], v[3]})});
        }
        pos = end + 1;
    }
    return out;
}

void write_tum(const std::filesystem::path& path, const std::vector<StampedPose>& traj) {
    write_file(path, encode_tum(traj));
}

std::vector<StampedPose> read_tum(const std::filesystem::path& path) { return decode_tum(read_file(path)); }

}  // namespace edlb
