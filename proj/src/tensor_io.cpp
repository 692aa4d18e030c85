#include "iilab/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "iilab/common.hpp"

namespace iilab {

namespace {

constexpr char kMagic[8] = {'I', 'I', 'T', 'N', 'S', 'R', '0', '1'};
constexpr uint64_t kMaxElements = 1ull << 30;

void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::string buf;
    buf.reserve(16 + 4 * t.rank() + 4 * t.count());
    buf.append(kMagic, sizeof(kMagic));
    put_u32(buf, static_cast<uint32_t>(t.rank()));
    for (size_t d : t.shape.dims) put_u32(buf, static_cast<uint32_t>(d));
    for (double v : t.data) put_u32(buf, std::bit_cast<uint32_t>(static_cast<float>(v)));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    f.flush();
    if (!f) throw RuntimeFailure("write failed for " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw RuntimeFailure("cannot open " + path.string());
    std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw RuntimeFailure("read failed for " + path.string());

    const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
    const size_t len = raw.size();
    const auto reject = [&path](const std::string& why) -> void {
        throw InvalidInput(path.string() + ": " + why);
    };

    if (len < sizeof(kMagic) + 4) reject("file too short for header");
    if (std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0) reject("bad magic");
    size_t off = sizeof(kMagic);
    const uint32_t rank = get_u32(p + off);
    off += 4;
    if (rank < 1 || rank > 3) reject("rank must be 1..3, got " + std::to_string(rank));
    if (len < off + 4ull * rank) reject("file too short for dims");

    std::vector<size_t> dims(rank);
    uint64_t count = 1;
    for (uint32_t i = 0; i < rank; ++i) {
        const uint32_t d = get_u32(p + off);
        off += 4;
        if (d == 0) reject("dims must be >= 1");
        dims[i] = d;
        count *= d;
        if (count > kMaxElements) reject("element count exceeds limit");
    }
    if (len != off + 4ull * count)
        reject("payload length mismatch, expected " + std::to_string(off + 4ull * count) +
               " bytes, file has " + std::to_string(len));

    Tensor t{Shape(dims)};
    for (uint64_t i = 0; i < count; ++i) {
        t.data[i] = static_cast<double>(std::bit_cast<float>(get_u32(p + off)));
        off += 4;
    }
    return t;
}

}  // namespace iilab
