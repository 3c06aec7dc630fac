#include "cgtex/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace cgtex {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    os.write(b, 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write("CGCN", 4);
    put_u32(os, kFormatVersion);
    put_u32(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff) throw ContractError("tensor name too long: " + name);
        put_u16(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        os.put(static_cast<char>(t.rank()));
        for (int e : t.shape()) put_u64(os, static_cast<std::uint64_t>(e));
        static_assert(sizeof(float) == 4);
        // f32 little-endian; this writes raw on LE hosts
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.numel() * 4));
    }
    if (!os) throw IoError("short write to " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CGCN", 4) != 0)
        throw FormatError(path + ": bad checkpoint magic");
    const std::uint32_t version = get_u32(is);
    if (version != kFormatVersion)
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = get_u32(is);
    NamedTensors out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = get_u16(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const int rank = is.get();
        if (rank < 1 || rank > 5) throw FormatError(path + ": bad tensor rank");
        std::vector<int> shape(rank);
        for (int a = 0; a < rank; ++a) shape[a] = static_cast<int>(get_u64(is));
        Tensor t{shape};
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * 4));
        if (!is) throw FormatError(path + ": truncated checkpoint");
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

}  // namespace cgtex
