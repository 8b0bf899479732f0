#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "badsad/model.hpp"

namespace badsad {

// Checkpoint layout (all integers little-endian):
//   magic "BSADCKPT", u32 version
//   arch tag string (u32 length + bytes), u8 dtype (0=f32, 1=f64)
//   u32 rep_dim, u32 in_c, u32 in_h, u32 in_w, u32 hidden, f64 zero_guard
//   u64 tensor count, then per tensor:
//     u32 name length, name bytes, u32 rank, u64 extents..., raw scalars
// Encoder/decoder parameters appear in declaration order; centers, when
// present, are the named vectors centers.c / centers.c_p / centers.c_a.
namespace ckpt {

constexpr char kMagic[8] = {'B', 'S', 'A', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

inline void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint: " + path);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated checkpoint: " + path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const std::string& path) {
    const auto len = get_u32(in, path);
    std::string s(len, '\0');
    if (!in.read(s.data(), len)) throw IoError("truncated checkpoint: " + path);
    return s;
}

template <typename T>
void put_scalar(std::ostream& out, T v) {
    if constexpr (sizeof(T) == 4) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(out, bits);
    } else {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(out, bits);
    }
}

template <typename T>
T get_scalar(std::istream& in, const std::string& path) {
    T v;
    if constexpr (sizeof(T) == 4) {
        std::uint32_t bits = get_u32(in, path);
        std::memcpy(&v, &bits, 4);
    } else {
        std::uint64_t bits = get_u64(in, path);
        std::memcpy(&v, &bits, 8);
    }
    return v;
}

template <typename T>
void put_tensor(std::ostream& out, const std::string& name, const Tensor<T>& t) {
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape) put_u64(out, e);
    for (const T& v : t.data) put_scalar<T>(out, v);
}

template <typename T>
std::pair<std::string, Tensor<T>> get_tensor(std::istream& in, const std::string& path) {
    std::string name = get_string(in, path);
    const auto rank = get_u32(in, path);
    Shape shape(rank);
    for (auto& e : shape) e = get_u64(in, path);
    Tensor<T> t(shape);
    for (auto& v : t.data) v = get_scalar<T>(in, path);
    return {std::move(name), std::move(t)};
}

}  // namespace ckpt

template <typename T>
constexpr std::uint8_t dtype_code() {
    return sizeof(T) == 4 ? 0 : 1;
}

template <typename T>
void save_checkpoint(const std::string& path, const ModelState<T>& st,
                     const Centers<T>* centers = nullptr) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(ckpt::kMagic, 8);
    ckpt::put_u32(out, ckpt::kVersion);
    ckpt::put_string(out, arch_tag_name(st.arch.tag));
    out.put(static_cast<char>(dtype_code<T>()));
    ckpt::put_u32(out, static_cast<std::uint32_t>(st.arch.rep_dim));
    ckpt::put_u32(out, static_cast<std::uint32_t>(st.arch.in_c));
    ckpt::put_u32(out, static_cast<std::uint32_t>(st.arch.in_h));
    ckpt::put_u32(out, static_cast<std::uint32_t>(st.arch.in_w));
    ckpt::put_u32(out, static_cast<std::uint32_t>(st.arch.hidden));
    ckpt::put_scalar<double>(out, centers ? centers->zero_guard : 0.0);

    const std::uint64_t count =
        st.encoder.size() + st.decoder.size() + (centers ? 3u : 0u);
    ckpt::put_u64(out, count);
    for (const auto& p : st.encoder) ckpt::put_tensor<T>(out, p->name, p->value);
    for (const auto& p : st.decoder) ckpt::put_tensor<T>(out, p->name, p->value);
    if (centers) {
        ckpt::put_tensor<T>(out, "centers.c", centers->c);
        ckpt::put_tensor<T>(out, "centers.c_p", centers->c_p);
        ckpt::put_tensor<T>(out, "centers.c_a", centers->c_a);
    }
    if (!out) throw IoError("write failure on checkpoint: " + path);
}

inline std::uint8_t checkpoint_dtype(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, ckpt::kMagic, 8) != 0) {
        throw FormatError("not a checkpoint file: " + path);
    }
    ckpt::get_u32(in, path);
    ckpt::get_string(in, path);
    const int c = in.get();
    if (c < 0) throw IoError("truncated checkpoint: " + path);
    return static_cast<std::uint8_t>(c);
}

template <typename T>
struct LoadedCheckpoint {
    ModelState<T> state;
    std::optional<Centers<T>> centers;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, ckpt::kMagic, 8) != 0) {
        throw FormatError("not a checkpoint file: " + path);
    }
    const auto version = ckpt::get_u32(in, path);
    if (version != ckpt::kVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::string tag = ckpt::get_string(in, path);
    const int dt = in.get();
    if (dt < 0) throw IoError("truncated checkpoint: " + path);
    if (static_cast<std::uint8_t>(dt) != dtype_code<T>()) {
        throw FormatError("checkpoint dtype mismatch in " + path);
    }

    ArchSpec arch;
    arch.tag = arch_tag_from_name(tag);
    arch.rep_dim = static_cast<int>(ckpt::get_u32(in, path));
    arch.in_c = static_cast<int>(ckpt::get_u32(in, path));
    arch.in_h = static_cast<int>(ckpt::get_u32(in, path));
    arch.in_w = static_cast<int>(ckpt::get_u32(in, path));
    arch.hidden = static_cast<int>(ckpt::get_u32(in, path));
    const double zero_guard = ckpt::get_scalar<double>(in, path);

    LoadedCheckpoint<T> out;
    out.state.arch = arch;
    Centers<T> centers;
    centers.zero_guard = zero_guard;
    bool has_centers = false;

    const auto count = ckpt::get_u64(in, path);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto [name, tensor] = ckpt::get_tensor<T>(in, path);
        if (name == "centers.c") {
            centers.c = std::move(tensor);
            has_centers = true;
        } else if (name == "centers.c_p") {
            centers.c_p = std::move(tensor);
        } else if (name == "centers.c_a") {
            centers.c_a = std::move(tensor);
        } else if (name.rfind("enc.", 0) == 0) {
            out.state.encoder.push_back(make_param<T>(name, std::move(tensor)));
        } else if (name.rfind("dec.", 0) == 0) {
            out.state.decoder.push_back(make_param<T>(name, std::move(tensor)));
        } else {
            throw FormatError("unexpected tensor '" + name + "' in checkpoint " + path);
        }
    }
    if (has_centers) out.centers = std::move(centers);
    return out;
}

}  // namespace badsad
