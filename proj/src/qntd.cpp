#include "qmdpnet/qntd.hpp"

#include <cstring>
#include <fstream>

#include "qmdpnet/errors.hpp"

namespace qmdpnet {

namespace {
void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::vector<std::uint8_t> header(const std::vector<int>& dims) {
    std::vector<std::uint8_t> out{'Q', 'N', 'T', 'D'};
    put_u16(out, kQntdVersion);
    put_u16(out, static_cast<std::uint16_t>(dims.size()));
    for (int d : dims) {
        if (d <= 0) throw FormatError("qntd: extents must be positive");
        put_u32(out, static_cast<std::uint32_t>(d));
    }
    return out;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("qntd: cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("qntd: short write to " + path);
}
}  // namespace

std::vector<std::uint8_t> encode_qntd_f32(const std::vector<int>& dims,
                                          const std::vector<float>& data) {
    std::vector<std::uint8_t> out = header(dims);
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    if (n != data.size()) throw FormatError("qntd: data length does not match dims");
    // floats are stored little-endian; this writer assumes a little-endian host
    std::size_t base = out.size();
    out.resize(base + 4 * data.size());
    std::memcpy(out.data() + base, data.data(), 4 * data.size());
    return out;
}

std::vector<std::uint8_t> encode_qntd_u8(const std::vector<int>& dims,
                                         const std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> out = header(dims);
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    if (n != data.size()) throw FormatError("qntd: data length does not match dims");
    out.insert(out.end(), data.begin(), data.end());
    return out;
}

QntdTensor decode_qntd(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || bytes[0] != 'Q' || bytes[1] != 'N' || bytes[2] != 'T' ||
        bytes[3] != 'D')
        throw FormatError("qntd: bad magic");
    const std::uint16_t version =
        static_cast<std::uint16_t>(bytes[4] | (static_cast<std::uint16_t>(bytes[5]) << 8));
    if (version != kQntdVersion)
        throw FormatError("qntd: unsupported format version " + std::to_string(version));
    const std::uint16_t rank =
        static_cast<std::uint16_t>(bytes[6] | (static_cast<std::uint16_t>(bytes[7]) << 8));
    std::size_t pos = 8;
    QntdTensor t;
    for (int i = 0; i < rank; ++i) {
        if (pos + 4 > bytes.size()) throw FormatError("qntd: truncated header");
        std::uint32_t d = 0;
        for (int b = 0; b < 4; ++b) d |= static_cast<std::uint32_t>(bytes[pos + b]) << (8 * b);
        t.dims.push_back(static_cast<int>(d));
        pos += 4;
    }
    const std::size_t n = t.numel();
    const std::size_t payload = bytes.size() - pos;
    if (payload == 4 * n) {
        t.is_u8 = false;
        t.f32.resize(n);
        std::memcpy(t.f32.data(), bytes.data() + pos, 4 * n);
    } else if (payload == n) {
        t.is_u8 = true;
        t.u8.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
    } else {
        throw FormatError("qntd: truncated or oversized payload");
    }
    return t;
}

void write_qntd_f32(const std::string& path, const std::vector<int>& dims,
                    const std::vector<float>& data) {
    write_bytes(path, encode_qntd_f32(dims, data));
}

void write_qntd_u8(const std::string& path, const std::vector<int>& dims,
                   const std::vector<std::uint8_t>& data) {
    write_bytes(path, encode_qntd_u8(dims, data));
}

QntdTensor read_qntd(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("qntd: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_qntd(bytes);
}

}  // namespace qmdpnet
