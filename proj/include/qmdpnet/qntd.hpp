#ifndef QMDPNET_QNTD_HPP
#define QMDPNET_QNTD_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace qmdpnet {

// Binary tensor file: magic "QNTD", format version u16, rank u16, extents as
// u32, all little-endian, then the raw payload: 32-bit little-endian floats
// or unsigned 8-bit ints. The element type is implied by the payload length
// and checked against what the reader expects.
inline constexpr std::uint16_t kQntdVersion = 1;

struct QntdTensor {
    std::vector<int> dims;
    bool is_u8 = false;
    std::vector<float> f32;
    std::vector<std::uint8_t> u8;

    std::size_t numel() const {
        std::size_t n = 1;
        for (int d : dims) n *= static_cast<std::size_t>(d);
        return n;
    }
};

std::vector<std::uint8_t> encode_qntd_f32(const std::vector<int>& dims,
                                          const std::vector<float>& data);
std::vector<std::uint8_t> encode_qntd_u8(const std::vector<int>& dims,
                                         const std::vector<std::uint8_t>& data);
QntdTensor decode_qntd(const std::vector<std::uint8_t>& bytes);

void write_qntd_f32(const std::string& path, const std::vector<int>& dims,
                    const std::vector<float>& data);
void write_qntd_u8(const std::string& path, const std::vector<int>& dims,
                   const std::vector<std::uint8_t>& data);
QntdTensor read_qntd(const std::string& path);

}  // namespace qmdpnet

#endif
