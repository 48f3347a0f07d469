#pragma once

// "OODM" model container:
//   magic "OODM", u32 version (=1), u32 tensor count, then per tensor
//   u16 name length, UTF-8 name, u8 dtype (0=f32, 1=i8), u8 rank,
//   rank x u32 dims, raw little-endian data, and for i8 an f32 scale
//   followed by an i32 zero point.
// All integers and floats are little-endian regardless of host.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "oodrt/nn/model.hpp"

namespace oodrt::nn {

enum class DType : std::uint8_t { f32 = 0, i8 = 1 };

struct OodmEntry {
    std::string name;
    DType dtype = DType::f32;
    Dims dims;
    std::vector<float> f32;
    std::vector<std::int8_t> i8;
    float scale = 1.0f;
    std::int32_t zero_point = 0;

    static OodmEntry from_tensor(std::string name, const Tensor& t) {
        OodmEntry e;
        e.name = std::move(name);
        e.dims = t.dims();
        e.f32 = t.values();
        return e;
    }
    static OodmEntry scalar(std::string name, float v) { return from_tensor(std::move(name), Tensor({1}, {v})); }
    static OodmEntry vector(std::string name, const std::vector<float>& v) {
        return from_tensor(std::move(name), Tensor({v.size()}, v));
    }
    Tensor tensor() const {
        if (dtype != DType::f32) throw argument_error("OODM entry '" + name + "' is not f32");
        return Tensor(dims, f32);
    }
};

inline constexpr std::uint32_t kOodmVersion = 1;

namespace detail {

inline void put_u8(std::vector<std::uint8_t>& b, std::uint8_t v) { b.push_back(v); }
inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xff));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}
    std::uint8_t u8() {
        need(1);
        return b_[pos_++];
    }
    std::uint16_t u16() {
        need(2);
        const std::uint16_t v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > b_.size()) throw io_error("OODM: truncated stream");
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_oodm(const std::vector<OodmEntry>& entries) {
    using namespace detail;
    std::vector<std::uint8_t> b{'O', 'O', 'D', 'M'};
    put_u32(b, kOodmVersion);
    put_u32(b, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        if (e.name.size() > 0xffff) throw argument_error("OODM: tensor name too long");
        if (e.dims.empty() || e.dims.size() > 255) throw argument_error("OODM: bad rank for '" + e.name + "'");
        const std::size_t n = dims_product(e.dims);
        if ((e.dtype == DType::f32 && e.f32.size() != n) || (e.dtype == DType::i8 && e.i8.size() != n))
            throw argument_error("OODM: data length mismatch for '" + e.name + "'");
        put_u16(b, static_cast<std::uint16_t>(e.name.size()));
        b.insert(b.end(), e.name.begin(), e.name.end());
        put_u8(b, static_cast<std::uint8_t>(e.dtype));
        put_u8(b, static_cast<std::uint8_t>(e.dims.size()));
        for (auto d : e.dims) put_u32(b, static_cast<std::uint32_t>(d));
        if (e.dtype == DType::f32) {
            for (float v : e.f32) put_u32(b, std::bit_cast<std::uint32_t>(v));
        } else {
            for (auto v : e.i8) put_u8(b, static_cast<std::uint8_t>(v));
            put_u32(b, std::bit_cast<std::uint32_t>(e.scale));
            put_u32(b, static_cast<std::uint32_t>(e.zero_point));
        }
    }
    return b;
}

inline std::vector<OodmEntry> decode_oodm(const std::vector<std::uint8_t>& bytes) {
    detail::Reader r(bytes);
    if (r.str(4) != "OODM") throw io_error("OODM: bad magic");
    const auto version = r.u32();
    if (version != kOodmVersion) throw io_error("OODM: unsupported version " + std::to_string(version));
    const auto count = r.u32();
    std::vector<OodmEntry> out;
    out.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        OodmEntry e;
        e.name = r.str(r.u16());
        const auto dt = r.u8();
        if (dt > 1) throw io_error("OODM: unknown dtype " + std::to_string(dt) + " for '" + e.name + "'");
        e.dtype = static_cast<DType>(dt);
        const auto rank = r.u8();
        if (rank == 0) throw io_error("OODM: zero rank for '" + e.name + "'");
        for (int i = 0; i < rank; ++i) e.dims.push_back(r.u32());
        const std::size_t n = dims_product(e.dims);
        if (e.dtype == DType::f32) {
            e.f32.resize(n);
            for (auto& v : e.f32) v = std::bit_cast<float>(r.u32());
        } else {
            e.i8.resize(n);
            for (auto& v : e.i8) v = static_cast<std::int8_t>(r.u8());
            e.scale = std::bit_cast<float>(r.u32());
            e.zero_point = static_cast<std::int32_t>(r.u32());
        }
        out.push_back(std::move(e));
    }
    if (!r.done()) throw io_error("OODM: trailing bytes");
    return out;
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw io_error("write failed for '" + path + "'");
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void save_oodm(const std::string& path, const std::vector<OodmEntry>& entries) {
    write_file_bytes(path, encode_oodm(entries));
}

inline std::vector<OodmEntry> load_oodm(const std::string& path) { return decode_oodm(read_file_bytes(path)); }

inline const OodmEntry& find_entry(const std::vector<OodmEntry>& entries, const std::string& name) {
    for (const auto& e : entries)
        if (e.name == name) return e;
    throw io_error("OODM: missing tensor '" + name + "'");
}

// Namespacing for files that hold several models.
inline std::vector<OodmEntry> with_prefix(std::vector<OodmEntry> entries, const std::string& prefix) {
    for (auto& e : entries) e.name = prefix + e.name;
    return entries;
}

// Entries whose name starts with `prefix`, with the prefix removed.
inline std::vector<OodmEntry> strip_prefix(const std::vector<OodmEntry>& entries, const std::string& prefix) {
    std::vector<OodmEntry> out;
    for (const auto& e : entries)
        if (e.name.starts_with(prefix)) {
            out.push_back(e);
            out.back().name = e.name.substr(prefix.size());
        }
    return out;
}

inline std::vector<OodmEntry> model_entries(const ModelGraph& model) {
    std::vector<OodmEntry> out;
    for (const auto& p : model.params()) out.push_back(OodmEntry::from_tensor(p.name, p.value));
    return out;
}

// Copies f32 parameters by name into an already-built graph.
inline void load_model_params(ModelGraph& model, const std::vector<OodmEntry>& entries) {
    for (auto& p : model.params()) {
        const auto& e = find_entry(entries, p.name);
        if (e.dims != p.value.dims())
            throw io_error("OODM: tensor '" + p.name + "' has dims " + dims_to_string(e.dims) + ", model expects " +
                           dims_to_string(p.value.dims()));
        p.value = e.tensor();
    }
}

}  // namespace oodrt::nn
