#include "nrrs/metrics.hpp"

namespace nrrs {

double relmse(std::span<const Vec3f> image, std::span<const Vec3f> reference, double eps) {
    if (image.empty())
        fail("relmse: empty image");
    if (image.size() != reference.size())
        fail("relmse: dimension mismatch: " + std::to_string(image.size()) + " vs " +
             std::to_string(reference.size()) + " pixels");
    double sum = 0.0;
    for (size_t i = 0; i < image.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            const double r = static_cast<double>(reference[i][c]);
            const double d = static_cast<double>(image[i][c]) - r;
            sum += d * d / (r * r + eps);
        }
    }
    return sum / (3.0 * static_cast<double>(image.size()));
}

}  // namespace nrrs
