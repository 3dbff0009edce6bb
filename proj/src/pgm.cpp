#include "qmdpnet/pgm.hpp"

#include <fstream>
#include <sstream>

#include "qmdpnet/errors.hpp"

namespace qmdpnet {

namespace {
// Reads the next header token, skipping whitespace and '#' comments.
std::string next_header_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        char c = static_cast<char>(bytes[pos]);
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < bytes.size()) {
        char c = static_cast<char>(bytes[pos]);
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') break;
        tok.push_back(c);
        ++pos;
    }
    if (tok.empty()) throw FormatError("pgm: truncated header");
    return tok;
}

int header_int(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
    std::string tok = next_header_token(bytes, pos);
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (!end || *end != '\0' || v <= 0) throw FormatError("pgm: bad header value '" + tok + "'");
    return static_cast<int>(v);
}
}  // namespace

PgmImage parse_pgm(const std::vector<std::uint8_t>& bytes) {
    std::size_t pos = 0;
    if (next_header_token(bytes, pos) != "P5") throw FormatError("pgm: not a binary P5 file");
    PgmImage img;
    img.width = header_int(bytes, pos);
    img.height = header_int(bytes, pos);
    int maxval = header_int(bytes, pos);
    if (maxval != 255) throw FormatError("pgm: only 8-bit (maxval 255) supported");
    if (pos >= bytes.size()) throw FormatError("pgm: missing payload");
    ++pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(img.width) * img.height;
    if (bytes.size() - pos < need) throw FormatError("pgm: truncated payload");
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return img;
}

PgmImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open pgm file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_pgm(bytes);
}

std::vector<std::uint8_t> encode_pgm(const PgmImage& img) {
    std::ostringstream head;
    head << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::string h = head.str();
    std::vector<std::uint8_t> out(h.begin(), h.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

void write_pgm(const PgmImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write pgm file: " + path);
    auto bytes = encode_pgm(img);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

}  // namespace qmdpnet
