#pragma once

#include "nrrs/core.hpp"

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace nrrs {

namespace diag {
/// Count of negative inputs clamped by box_cox. Inspected by the harness.
inline std::atomic<uint64_t> box_cox_clamps{0};
} // namespace diag

/// Rounds q to floor(q)+1 with probability frac(q), else floor(q).
/// E[result] = q exactly; Var[result] = r(1-r) with r = frac(q).
inline int stochastic_round(float q, float u) {
    if (!(q >= 0.0f) || !std::isfinite(q))
        throw std::invalid_argument("stochastic_round: q must be finite and >= 0");
    const float fl = std::floor(q);
    const float r = q - fl;
    return static_cast<int>(fl) + (u < r ? 1 : 0);
}

/// One-blob encoding of x in [0,1]: Gaussian kernel with sigma = 1/bins
/// evaluated at centers (i+0.5)/bins, normalized to sum 1.
inline void one_blob_encode(float x, int bins, float *out) {
    const float sigma = 1.0f / static_cast<float>(bins);
    const float inv_two_sigma2 = 1.0f / (2.0f * sigma * sigma);
    float sum = 0.0f;
    for (int i = 0; i < bins; ++i) {
        const float c = (static_cast<float>(i) + 0.5f) / static_cast<float>(bins);
        const float d = x - c;
        out[i] = std::exp(-d * d * inv_two_sigma2);
        sum += out[i];
    }
    const float inv = 1.0f / sum;
    for (int i = 0; i < bins; ++i)
        out[i] *= inv;
}

inline Eigen::VectorXf one_blob_encode(float x, int bins) {
    Eigen::VectorXf v(bins);
    one_blob_encode(x, bins, v.data());
    return v;
}

/// Box-Cox power transform: (x^lambda - 1)/lambda, log x at lambda = 0.
/// Negative inputs are clamped to zero and counted.
inline float box_cox(float x, float lambda = 0.5f) {
    if (x < 0.0f) {
        diag::box_cox_clamps.fetch_add(1, std::memory_order_relaxed);
        x = 0.0f;
    }
    if (lambda == 0.0f)
        return std::log(std::max(x, 1e-20f));
    return (std::pow(x, lambda) - 1.0f) / lambda;
}

/// Compresses GGX roughness into [0,1): 1 - exp(-alpha).
inline float roughness_remap(float alpha) {
    return 1.0f - std::exp(-alpha);
}

/// Modified softplus used as the RRS factor activation:
/// ln(1+e^x) for x < 0, 0.5x + ln 2 for x >= 0. C1-continuous at 0.
inline float softplus_mod(float x) {
    if (x < 0.0f)
        return std::log1p(std::exp(x));
    return 0.5f * x + 0.6931471805599453f;
}

inline float softplus_mod_grad(float x) {
    if (x < 0.0f) {
        const float e = std::exp(x);
        return e / (1.0f + e);
    }
    return 0.5f;
}

/// Inverse of softplus_mod on the x >= 0 branch; softplus_mod(inverse(1)) = 1.
inline float softplus_mod_inverse_pos(float y) {
    return 2.0f * (y - 0.6931471805599453f);
}

} // namespace nrrs
