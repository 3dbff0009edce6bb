#ifndef QMDPNET_PGM_HPP
#define QMDPNET_PGM_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace qmdpnet {

// 8-bit binary PGM (P5). Pixel (0,0) is the top-left image corner.
struct PgmImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major, height x width

    std::uint8_t at(int row, int col) const {
        return pixels[static_cast<std::size_t>(row * width + col)];
    }
    std::uint8_t& at(int row, int col) {
        return pixels[static_cast<std::size_t>(row * width + col)];
    }
};

PgmImage parse_pgm(const std::vector<std::uint8_t>& bytes);
PgmImage read_pgm(const std::string& path);
std::vector<std::uint8_t> encode_pgm(const PgmImage& img);
void write_pgm(const PgmImage& img, const std::string& path);

}  // namespace qmdpnet

#endif
