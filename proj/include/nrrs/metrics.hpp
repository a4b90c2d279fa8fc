#pragma once

#include "nrrs/core.hpp"

#include <cstdint>
#include <limits>
#include <span>

namespace nrrs {

/// Per-run quality and cost summary. relmse and ray_eff_inv are NaN when the
/// run had no reference image to compare against.
struct MetricsReport {
    double relmse = std::numeric_limits<double>::quiet_NaN();
    uint64_t rays = 0;  // rendering-phase rays; the ones that formed the image
    double ray_eff_inv = std::numeric_limits<double>::quiet_NaN();
    uint32_t overflow_events = 0;
    uint64_t bias_drop_events = 0;
    double train_seconds = 0.0;
    double render_seconds = 0.0;
};

/// Mean over pixels and channels of (x - ref)^2 / (ref^2 + eps), computed in
/// double. Throws on dimension mismatch or empty inputs.
double relmse(std::span<const Vec3f> image, std::span<const Vec3f> reference, double eps = 0.01);

/// Inverse efficiency: rays * RelMSE, exactly as written. Lower is better.
inline double ray_eff_inv(uint64_t rays, double relmse_value) {
    return static_cast<double>(rays) * relmse_value;
}

}  // namespace nrrs
