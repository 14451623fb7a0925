#include "edlb/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>

#include "edlb/errors.hpp"
#include "edlb/formats.hpp"

namespace edlb {

namespace {

constexpr std::uint32_t kVersion = 1;

template <typename U>
void put(std::string& out, U v) {
    static_assert(std::is_unsigned_v<U>);
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::string& s) : s_(s) {}

    template <typename U>
    U get(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }

    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string out = s_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    void floats(std::vector<float>& out, std::size_t n, const std::string& what) {
        need(n * 4, what.c_str());
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = std::bit_cast<float>(get<std::uint32_t>("data"));
    }

    bool at_end() const { return pos_ == s_.size(); }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n, const char* what) {
        if (s_.size() - pos_ < n) {
            throw LoadError("checkpoint truncated while reading " + std::string(what) + " at byte " + std::to_string(pos_));
        }
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

std::string encode_checkpoint(const ParamList<float>& params, const std::string& meta) {
    std::string out = "EDLB";
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
    out += meta;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.ndim()));
        for (auto d : p.tensor.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
        out.push_back(0);
        for (float v : p.tensor.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    if (r.bytes(4, "magic") != "EDLB") throw LoadError("not a checkpoint (bad magic)");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kVersion) throw LoadError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.meta = r.bytes(r.get<std::uint32_t>("meta length"), "meta");
    const auto count = r.get<std::uint32_t>("entry count");
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        e.name = r.bytes(r.get<std::uint32_t>("name length"), "name");
        const auto ndim = r.get<std::uint32_t>("rank");
        if (ndim > 8) throw LoadError("checkpoint leaf '" + e.name + "' has rank " + std::to_string(ndim));
        std::uint64_t n = 1;
        for (std::uint32_t k = 0; k < ndim; ++k) {
            const auto d = r.get<std::uint64_t>("dims");
            if (d > (1ULL << 32)) throw LoadError("checkpoint leaf '" + e.name + "' has an implausible dimension");
            e.shape.push_back(static_cast<std::int64_t>(d));
            n *= d;
        }
        const auto dtype = r.get<std::uint8_t>("dtype");
        if (dtype != 0) throw LoadError("checkpoint leaf '" + e.name + "' has unknown dtype " + std::to_string(dtype));
        r.floats(e.data, n, "leaf '" + e.name + "'");
        ckpt.entries.push_back(std::move(e));
    }
    if (!r.at_end()) throw LoadError("trailing bytes after checkpoint at byte " + std::to_string(r.pos()));
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ParamList<float>& params, const std::string& meta) {
    // Write to a temporary name first so a crash never leaves a torn file.
    const auto tmp = path.string() + ".tmp";
    write_file(tmp, encode_checkpoint(params, meta));
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw LoadError("checkpoint not found: " + path.string());
    return decode_checkpoint(read_file(path));
}

std::size_t load_params(const Checkpoint& ckpt, const ParamList<float>& params,
                        const std::function<bool(const std::string&)>& may_be_missing) {
    std::size_t loaded = 0;
    for (const auto& p : params) {
        const auto* e = ckpt.find(p.name);
        if (!e) {
            if (may_be_missing && may_be_missing(p.name)) continue;
            throw LoadError("checkpoint has no leaf '" + p.name + "'");
        }
        if (e->shape != p.tensor.shape()) {
            throw LoadError("leaf '" + p.name + "': checkpoint shape " + shape_str(e->shape) + " vs model shape " +
                            shape_str(p.tensor.shape()));
        }
        auto t = p.tensor;
        std::copy(e->data.begin(), e->data.end(), t.mutable_data().begin());
        ++loaded;
    }
    return loaded;
}

std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace edlb
