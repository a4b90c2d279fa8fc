#include "nrrs/imageio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace nrrs {

namespace {

void check_dims(const char *what, int width, int height, size_t pixels) {
    if (width <= 0 || height <= 0)
        fail(std::string(what) + ": non-positive dimensions");
    if (pixels != static_cast<size_t>(width) * static_cast<size_t>(height))
        fail(std::string(what) + ": pixel count does not match dimensions");
}

}  // namespace

void write_pfm(const std::string &path, int width, int height, std::span<const Vec3f> pixels) {
    check_dims("write_pfm", width, height, pixels.size());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail("write_pfm: cannot open " + path);
    out << "PF\n" << width << " " << height << "\n-1\n";
    // Negative scale means little-endian; rows are stored bottom-up.
    std::vector<float> row(static_cast<size_t>(width) * 3);
    for (int y = height - 1; y >= 0; --y) {
        for (int x = 0; x < width; ++x) {
            const Vec3f &p = pixels[static_cast<size_t>(y) * width + x];
            row[static_cast<size_t>(x) * 3 + 0] = p[0];
            row[static_cast<size_t>(x) * 3 + 1] = p[1];
            row[static_cast<size_t>(x) * 3 + 2] = p[2];
        }
        out.write(reinterpret_cast<const char *>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out)
        fail("write_pfm: write failed for " + path);
}

PfmImage read_pfm(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail("read_pfm: cannot open " + path);
    std::string magic;
    int width = 0, height = 0;
    float scale = 0.0f;
    if (!(in >> magic >> width >> height >> scale))
        fail("read_pfm: malformed header in " + path);
    if (magic != "PF")
        fail("read_pfm: " + path + " is not a color PFM (magic '" + magic + "')");
    if (width <= 0 || height <= 0 || width > (1 << 20) || height > (1 << 20))
        fail("read_pfm: implausible dimensions in " + path);
    if (!(scale < 0.0f))
        fail("read_pfm: only little-endian (negative scale) PFM is supported: " + path);
    in.get();  // the single whitespace byte terminating the header

    PfmImage img;
    img.width = width;
    img.height = height;
    img.pixels.resize(static_cast<size_t>(width) * height);
    std::vector<float> row(static_cast<size_t>(width) * 3);
    for (int y = height - 1; y >= 0; --y) {
        in.read(reinterpret_cast<char *>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in)
            fail("read_pfm: truncated payload in " + path);
        for (int x = 0; x < width; ++x)
            img.pixels[static_cast<size_t>(y) * width + x] =
                Vec3f(row[static_cast<size_t>(x) * 3 + 0], row[static_cast<size_t>(x) * 3 + 1],
                      row[static_cast<size_t>(x) * 3 + 2]);
    }
    return img;
}

void write_ppm(const std::string &path, int width, int height, std::span<const Vec3f> pixels) {
    check_dims("write_ppm", width, height, pixels.size());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail("write_ppm: cannot open " + path);
    out << "P6\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(width) * 3);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Vec3f &p = pixels[static_cast<size_t>(y) * width + x];
            for (int c = 0; c < 3; ++c) {
                float v = p[c];
                if (!(v > 0.0f))
                    v = 0.0f;
                else if (v > 1.0f)
                    v = 1.0f;
                const float g = std::pow(v, 1.0f / 2.2f);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(g * 255.0f));
            }
        }
        out.write(reinterpret_cast<const char *>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out)
        fail("write_ppm: write failed for " + path);
}

}  // namespace nrrs
