#pragma once

#include "nrrs/core.hpp"
#include "nrrs/networks.hpp"

#include <span>
#include <vector>

namespace nrrs {

/// Edge-aware a-trous smoothing of a scalar image, in place. Each pass uses
/// the 5x5 B3-spline kernel with tap spacing doubling per pass; tap weights
/// are scaled by the normal agreement pow(max(dot, 0), 32). Pixels without a
/// geometric normal (near-zero length) only mix with other such pixels.
void atrous_filter(int width, int height, std::vector<float> &values,
                   std::span<const Vec3f> normal, int iterations = 2);

/// Per-pixel training error signal. Updates the temporal accumulation
/// i_acc <- 0.5 * i_acc + 0.5 * i_cur, measures the squared luminance
/// deviation of the current frame against it, optionally smooths the
/// deviation with atrous_filter (2 passes), and normalizes:
/// e = deviation / (lum(i_acc)^2 + eps). Callers disable the filter near the
/// end of training since smoothing biases the error estimate.
std::vector<PixelError> update_error_signal(int width, int height, std::vector<Vec3f> &i_acc,
                                            std::span<const Vec3f> i_cur,
                                            std::span<const Vec3f> normal, bool filter_enabled,
                                            float eps = 0.01f);

/// Mean of the e field over all pixels; the E_avg term of the average loss.
float mean_error(std::span<const PixelError> errors);

}  // namespace nrrs
