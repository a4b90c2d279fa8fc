#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace nrrs {

using Vec2f = Eigen::Vector2f;
using Vec3f = Eigen::Vector3f;
using Vec3d = Eigen::Vector3d;

constexpr float kPi = 3.14159265358979323846f;
constexpr float kInvPi = 0.31830988618379067154f;
constexpr float kInf = std::numeric_limits<float>::infinity();
constexpr float kRayEps = 1e-4f;

/// Rec. 709 luminance, the scalar reduction used for all RRS factor math.
inline float luminance(const Vec3f &c) {
    return 0.2126f * c.x() + 0.7152f * c.y() + 0.0722f * c.z();
}

inline float mean_channel(const Vec3f &c) {
    return (c.x() + c.y() + c.z()) * (1.0f / 3.0f);
}

inline bool is_finite(const Vec3f &c) {
    return std::isfinite(c.x()) && std::isfinite(c.y()) && std::isfinite(c.z());
}

struct Ray {
    Vec3f o = Vec3f::Zero();
    Vec3f d = Vec3f(0, 0, 1);
    float t_max = kInf;
};

/// Builds an orthonormal basis around a unit normal (Duff et al. branchless variant).
inline void build_frame(const Vec3f &n, Vec3f &t, Vec3f &b) {
    const float sign = std::copysign(1.0f, n.z());
    const float a = -1.0f / (sign + n.z());
    const float c = n.x() * n.y() * a;
    t = Vec3f(1.0f + sign * n.x() * n.x() * a, sign * c, -sign * n.x());
    b = Vec3f(c, sign + n.y() * n.y() * a, -n.y());
}

/// Maps a unit direction to spherical coordinates normalized to [0,1]^2.
inline Vec2f dir_to_spherical01(const Vec3f &d) {
    const float theta = std::acos(std::clamp(d.z(), -1.0f, 1.0f));
    float phi = std::atan2(d.y(), d.x());
    if (phi < 0.0f)
        phi += 2.0f * kPi;
    return Vec2f(theta * kInvPi, phi * (0.5f * kInvPi));
}

[[noreturn]] inline void fail(const std::string &msg) {
    throw std::runtime_error(msg);
}

} // namespace nrrs
