// Regenerates the data/ assets: the hallway benchmark reconstruction and
// synthetic building floor plans at the preset map dimensions.

#include <filesystem>
#include <iostream>

#include "qmdpnet/domains.hpp"
#include "qmdpnet/pgm.hpp"
#include "qmdpnet/pomdp_file.hpp"
#include "qmdpnet/rng.hpp"

using namespace qmdpnet;

namespace {

// Binary-space-partition floor plan: recursively split with one-cell walls,
// each carrying a door, so all free space stays connected.
void split(PgmImage& img, int r0, int c0, int r1, int c1, Rng& rng, int depth) {
    const int h = r1 - r0, w = c1 - c0;
    if (depth <= 0 || (h < 14 && w < 14)) return;
    const bool horizontal = h > w || (h == w && rng.next_bool(0.5));
    if (horizontal) {
        if (h < 14) return;
        const int cut = r0 + 6 + rng.next_int(h - 12);
        const int door = c0 + rng.next_int(w);
        for (int c = c0; c < c1; ++c)
            if (c != door) img.at(cut, c) = 0;
        split(img, r0, c0, cut, c1, rng, depth - 1);
        split(img, cut + 1, c0, r1, c1, rng, depth - 1);
    } else {
        if (w < 14) return;
        const int cut = c0 + 6 + rng.next_int(w - 12);
        const int door = r0 + rng.next_int(h);
        for (int r = r0; r < r1; ++r)
            if (r != door) img.at(r, cut) = 0;
        split(img, r0, c0, r1, cut, rng, depth - 1);
        split(img, r0, cut + 1, r1, c1, rng, depth - 1);
    }
}

PgmImage floorplan(int height, int width, std::uint64_t seed) {
    PgmImage img;
    img.height = height;
    img.width = width;
    img.pixels.assign(static_cast<std::size_t>(height) * width, 255);
    for (int r = 0; r < height; ++r) {
        img.at(r, 0) = 0;
        img.at(r, width - 1) = 0;
    }
    for (int c = 0; c < width; ++c) {
        img.at(0, c) = 0;
        img.at(height - 1, c) = 0;
    }
    Rng rng(seed);
    split(img, 1, 1, height - 1, width - 1, rng, 6);
    return img;
}

}  // namespace

int main(int argc, char** argv) {
    const std::string out = argc > 1 ? argv[1] : "data";
    std::filesystem::create_directories(out + "/maps");

    write_pomdp_file(hallway2_reconstruction(), out + "/hallway2.pomdp");
    std::cout << "wrote " << out << "/hallway2.pomdp\n";

    std::uint64_t seed = 0x6d617073ULL;
    for (const MapPreset& p : map_presets()) {
        PgmImage img = floorplan(p.height, p.width, seed++);
        write_pgm(img, out + "/" + p.file);
        std::cout << "wrote " << out << "/" << p.file << " (" << p.height << "x" << p.width
                  << ")\n";
    }
    return 0;
}
