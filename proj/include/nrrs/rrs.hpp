#pragma once

#include "nrrs/core.hpp"
#include "nrrs/encodings.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nrrs {

/// Scales factors so the expected realized path count matches the pixel budget.
/// Downscaling only: when sum(q) <= n_pixels the factors pass through, so pure
/// Russian roulette regimes are never inflated.
/// Returns F_norm = n_pixels / sum(q); factors are scaled in place iff F < 1.
/// All-zero input passes through with F_norm = 1.
double normalize_factors(std::span<float> q, uint64_t n_pixels);

/// Queue-pressure controller. q' = f_rate * alpha * q keeps the realized count
/// S' below the budget with probability bounded by bernstein_bound; alpha
/// decays by eps on every observed overflow.
struct RateControl {
    float f_rate = 0.85f;
    float alpha = 1.0f;
    float eps = 0.01f;
    bool enabled = true;
    uint64_t overflow_events = 0;

    float gain() const { return enabled ? f_rate * alpha : 1.0f; }

    void note_overflow() {
        ++overflow_events;
        alpha *= (1.0f - eps);
    }
};

/// Upper bound on P(S' >= n_pixels) when E[S'] = f * n_pixels, from the
/// Bernstein inequality: exp(-(1-f)^2 n / (2f + 2/3 (1-f))). Returns 1 for
/// f >= 1.
double bernstein_bound(double f_rate, uint64_t n_pixels);

/// Realizes integer sample counts by stochastic rounding; u[i] in [0,1).
/// Returns the total count S.
uint64_t realize_counts(std::span<const float> q, std::span<const float> u,
                        std::span<int> counts);

/// Classic throughput Russian roulette: q = min(1, luminance(w)).
inline float throughput_rr_factor(const Vec3f &weight) {
    return std::min(1.0f, luminance(weight));
}

/// ADRRS factor: expected contribution over pixel estimate,
/// lum(w * Lo_hat) / (lum(I_pixel) + eps_div), clamped to [0.05, 20].
/// eps_div guards empty estimates and is 1e-4 of the mean image luminance.
inline float adrrs_factor(const Vec3f &weight, const Vec3f &lo_hat, const Vec3f &i_pixel,
                          float eps_div) {
    const float num = luminance(weight.cwiseProduct(lo_hat));
    const float q = num / (luminance(i_pixel) + eps_div);
    return std::clamp(q, 0.05f, 20.0f);
}

enum class StrategyKind {
    Fixed,       // constant factor, no rate control (counts are deterministic)
    Throughput,  // min(1, lum(w))
    AdrrsTree,   // ADRRS with octree cache estimate
    AdrrsNn,     // ADRRS with StatNet estimate
    Nrrs,        // RRSNet on StatNet statistics
    AidNrrs,     // RRSNet on raw encoded inputs
};

struct Strategy {
    StrategyKind kind = StrategyKind::Fixed;
    float fixed_value = 1.0f;

    bool neural() const {
        return kind == StrategyKind::AdrrsNn || kind == StrategyKind::Nrrs ||
               kind == StrategyKind::AidNrrs;
    }
    bool adaptive() const { return kind != StrategyKind::Fixed; }
};

Strategy parse_strategy(const std::string &name);
std::string strategy_name(const Strategy &s);

/// Per-depth assignment; entry d-1 governs vertices at depth d. Depth-1
/// vertices always use factor 1 regardless of the entry.
using DepthAssignment = std::vector<Strategy>;

DepthAssignment uniform_assignment(const Strategy &s, int max_depth);
DepthAssignment parse_assignment(const std::string &spec, int max_depth);
std::string assignment_name(const DepthAssignment &a);

} // namespace nrrs
