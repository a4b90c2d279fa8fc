#include "nrrs/denoise.hpp"

#include <algorithm>
#include <cmath>

namespace nrrs {

namespace {

constexpr float kB3[5] = {1.0f / 16.0f, 4.0f / 16.0f, 6.0f / 16.0f, 4.0f / 16.0f,
                          1.0f / 16.0f};

inline bool has_normal(const Vec3f &n) {
    return n.squaredNorm() > 0.25f;
}

}  // namespace

void atrous_filter(int width, int height, std::vector<float> &values,
                   std::span<const Vec3f> normal, int iterations) {
    std::vector<float> next(values.size());
    for (int it = 0; it < iterations; ++it) {
        const int step = 1 << it;
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const int idx = y * width + x;
                const Vec3f &n0 = normal[static_cast<size_t>(idx)];
                const bool center_geo = has_normal(n0);
                float sum = 0.0f;
                float wsum = 0.0f;
                for (int dy = -2; dy <= 2; ++dy) {
                    const int sy = y + dy * step;
                    if (sy < 0 || sy >= height)
                        continue;
                    for (int dx = -2; dx <= 2; ++dx) {
                        const int sx = x + dx * step;
                        if (sx < 0 || sx >= width)
                            continue;
                        const int sidx = sy * width + sx;
                        const Vec3f &ns = normal[static_cast<size_t>(sidx)];
                        const bool tap_geo = has_normal(ns);
                        float guard;
                        if (center_geo && tap_geo)
                            guard = std::pow(std::max(n0.dot(ns), 0.0f), 32.0f);
                        else if (!center_geo && !tap_geo)
                            guard = 1.0f;
                        else
                            guard = 0.0f;
                        const float w = kB3[dy + 2] * kB3[dx + 2] * guard;
                        sum += w * values[static_cast<size_t>(sidx)];
                        wsum += w;
                    }
                }
                next[static_cast<size_t>(idx)] =
                    wsum > 0.0f ? sum / wsum : values[static_cast<size_t>(idx)];
            }
        }
        values.swap(next);
    }
}

std::vector<PixelError> update_error_signal(int width, int height, std::vector<Vec3f> &i_acc,
                                            std::span<const Vec3f> i_cur,
                                            std::span<const Vec3f> normal,
                                            bool filter_enabled, float eps) {
    const size_t n = static_cast<size_t>(width) * static_cast<size_t>(height);
    std::vector<float> deviation(n);
    std::vector<float> inv_denom(n);
    for (size_t i = 0; i < n; ++i) {
        i_acc[i] = 0.5f * i_acc[i] + 0.5f * i_cur[i];
        const float d = luminance(i_cur[i]) - luminance(i_acc[i]);
        deviation[i] = d * d;
        const float a = luminance(i_acc[i]);
        inv_denom[i] = 1.0f / (a * a + eps);
    }
    if (filter_enabled)
        atrous_filter(width, height, deviation, normal, 2);

    std::vector<PixelError> errors(n);
    for (size_t i = 0; i < n; ++i)
        errors[i] = PixelError{deviation[i] * inv_denom[i], inv_denom[i]};
    return errors;
}

float mean_error(std::span<const PixelError> errors) {
    if (errors.empty())
        return 0.0f;
    double sum = 0.0;
    for (const PixelError &pe : errors)
        sum += pe.e;
    return static_cast<float>(sum / static_cast<double>(errors.size()));
}

}  // namespace nrrs
