#include "jlgcn/checkpoint.hpp"

#include "jlgcn/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace jlgcn {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = kFnvOffset;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

class Writer {
public:
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    std::vector<std::uint8_t>& data() { return out_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) {
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string bytes(std::uint64_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return in_.size() - pos_; }

    void need(std::uint64_t n) const {
        if (n > remaining()) {
            throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
        }
    }

private:
    std::uint64_t le(int n) {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        }
        pos_ += n;
        return v;
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

} // namespace

const NamedTensor& Checkpoint::find(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) {
            return t;
        }
    }
    throw CheckpointError("checkpoint has no tensor '" + std::string(name) + "'");
}

std::vector<std::uint8_t> serialize(const Checkpoint& ck) {
    if (ck.dtype != 4 && ck.dtype != 8) {
        throw CheckpointError("unsupported checkpoint dtype " + std::to_string(ck.dtype));
    }
    Writer w;
    w.bytes(Checkpoint::magic);
    w.u32(Checkpoint::version);
    w.u32(ck.dtype);
    w.u64(ck.rng_seed);
    w.u64(ck.rng_position);
    w.u64(ck.config_json.size());
    w.bytes(ck.config_json);
    w.u64(ck.tensors.size());
    for (const auto& t : ck.tensors) {
        if (t.values.size() != t.rows * t.cols) {
            throw CheckpointError("tensor '" + t.name + "' holds " +
                                  std::to_string(t.values.size()) + " values for shape " +
                                  shape_string(t.rows, t.cols));
        }
        w.u32(static_cast<std::uint32_t>(t.name.size()));
        w.bytes(t.name);
        w.u64(t.rows);
        w.u64(t.cols);
        for (double v : t.values) {
            if (ck.dtype == 4) {
                w.f32(static_cast<float>(v));
            } else {
                w.f64(v);
            }
        }
    }
    w.u64(fnv1a(w.data()));
    return std::move(w.data());
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < Checkpoint::magic.size() + 8 ||
        std::memcmp(bytes.data(), Checkpoint::magic.data(), Checkpoint::magic.size()) != 0) {
        throw CheckpointError("not a checkpoint (bad magic)");
    }
    const auto body = bytes.first(bytes.size() - 8);
    Reader tail(bytes.last(8));
    if (tail.u64() != fnv1a(body)) {
        throw CheckpointError("checkpoint checksum mismatch (file corrupted or edited)");
    }

    Reader r(body);
    r.bytes(Checkpoint::magic.size());
    const std::uint32_t version = r.u32();
    if (version != Checkpoint::version) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.dtype = r.u32();
    if (ck.dtype != 4 && ck.dtype != 8) {
        throw CheckpointError("unsupported checkpoint dtype " + std::to_string(ck.dtype));
    }
    ck.rng_seed = r.u64();
    ck.rng_position = r.u64();
    ck.config_json = r.bytes(r.u64());
    const std::uint64_t count = r.u64();
    for (std::uint64_t k = 0; k < count; ++k) {
        NamedTensor t;
        t.name = r.bytes(r.u32());
        t.rows = r.u64();
        t.cols = r.u64();
        // guard the multiplication before reserving
        if (t.cols != 0 && t.rows > r.remaining() / t.cols / ck.dtype) {
            throw CheckpointError("tensor '" + t.name + "' shape " + shape_string(t.rows, t.cols) +
                                  " exceeds the file size");
        }
        t.values.resize(t.rows * t.cols);
        for (double& v : t.values) {
            v = ck.dtype == 4 ? static_cast<double>(r.f32()) : r.f64();
        }
        ck.tensors.push_back(std::move(t));
    }
    if (r.remaining() != 0) {
        throw CheckpointError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
    }
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    const auto bytes = serialize(ck);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CheckpointError("cannot write checkpoint " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw CheckpointError("failed writing checkpoint " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("cannot open checkpoint " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                          std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

template <std::floating_point T>
void capture(Checkpoint& ck, std::span<const ParamRef<T>> params) {
    for (const auto& p : params) {
        NamedTensor t;
        t.name = p.name;
        t.rows = p.value->rows();
        t.cols = p.value->cols();
        t.values.assign(p.value->values().begin(), p.value->values().end());
        ck.tensors.push_back(std::move(t));
    }
}

template <std::floating_point T>
void restore(const Checkpoint& ck, std::span<const ParamRef<T>> params) {
    for (const auto& p : params) {
        const NamedTensor& t = ck.find(p.name);
        if (t.rows != p.value->rows() || t.cols != p.value->cols()) {
            throw CheckpointError("tensor '" + p.name + "' has shape " +
                                  shape_string(t.rows, t.cols) + ", model expects " +
                                  shape_string(*p.value));
        }
        auto dst = p.value->values();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = static_cast<T>(t.values[i]);
        }
    }
}

template void capture<float>(Checkpoint&, std::span<const ParamRef<float>>);
template void capture<double>(Checkpoint&, std::span<const ParamRef<double>>);
template void restore<float>(const Checkpoint&, std::span<const ParamRef<float>>);
template void restore<double>(const Checkpoint&, std::span<const ParamRef<double>>);

} // namespace jlgcn
