#include "vcmr/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "vcmr/error.hpp"

namespace vcmr {

namespace {

constexpr std::uint32_t kMagic = 0x4E424356;  // "VCBN"
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double d) { put_u64(os, std::bit_cast<std::uint64_t>(d)); }

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError(path + ": truncated container");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError(path + ": truncated container");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is, const std::string& path) {
    return std::bit_cast<double>(get_u64(is, path));
}

}  // namespace

void write_container(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError(path + ": cannot open for writing");
    put_u32(os, kMagic);
    put_u32(os, kVersion);
    put_u64(os, tensors.size());
    for (const NamedTensor& t : tensors) {
        put_u32(os, static_cast<std::uint32_t>(t.name.size()));
        os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
        std::uint64_t n = 1;
        for (int d : t.shape) {
            put_u64(os, static_cast<std::uint64_t>(d));
            n *= static_cast<std::uint64_t>(d);
        }
        if (n != t.data.size()) throw IoError(path + ": record \"" + t.name + "\" size mismatch");
        for (double v : t.data) put_f64(os, v);
    }
    if (!os) throw IoError(path + ": write failed");
}

std::vector<NamedTensor> read_container(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(path + ": cannot open");
    if (get_u32(is, path) != kMagic) throw IoError(path + ": bad magic, not a container file");
    const std::uint32_t version = get_u32(is, path);
    if (version != kVersion)
        throw IoError(path + ": unsupported container version " + std::to_string(version));
    const std::uint64_t count = get_u64(is, path);
    std::vector<NamedTensor> out;
    out.reserve(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        NamedTensor t;
        const std::uint32_t name_len = get_u32(is, path);
        t.name.resize(name_len);
        if (!is.read(t.name.data(), name_len)) throw IoError(path + ": truncated name");
        const std::uint32_t rank = get_u32(is, path);
        std::uint64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const std::uint64_t e = get_u64(is, path);
            t.shape.push_back(static_cast<int>(e));
            n *= e;
        }
        t.data.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) t.data[i] = get_f64(is, path);
        out.push_back(std::move(t));
    }
    return out;
}

const NamedTensor& find_tensor(const std::vector<NamedTensor>& ts, const std::string& name,
                               const std::string& path) {
    for (const NamedTensor& t : ts)
        if (t.name == name) return t;
    throw IoError(path + ": missing record \"" + name + "\"");
}

}  // namespace vcmr
