#pragma once

#include "nrrs/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace nrrs {

struct PfmImage {
    int width = 0;
    int height = 0;
    std::vector<Vec3f> pixels;  // row 0 is the top image row
};

/// Writes a color PFM: header "PF\n<w> <h>\n-1\n" followed by little-endian
/// float triples in bottom-up row order, as the negative scale demands.
/// Pixel spans are top-down (row 0 at the top), matching Film.
void write_pfm(const std::string &path, int width, int height, std::span<const Vec3f> pixels);

/// Reads a color PFM written with a negative (little-endian) scale and
/// returns top-down pixels. Throws on missing files or malformed headers.
PfmImage read_pfm(const std::string &path);

/// Writes an 8-bit binary PPM preview: values clamped to [0, 1], gamma 1/2.2,
/// rounded to the nearest byte.
void write_ppm(const std::string &path, int width, int height, std::span<const Vec3f> pixels);

}  // namespace nrrs
