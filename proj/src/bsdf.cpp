#include "nrrs/bsdf.hpp"

#include <algorithm>
#include <cmath>

namespace nrrs {

namespace {

// Large enough that (alpha^2 - 1) + 1 survives float cancellation near the
// mirror limit.
constexpr float kMinAlpha = 1e-3f;

inline float ggx_d(float cos_h, float alpha) {
    if (cos_h <= 0.0f)
        return 0.0f;
    const float a2 = alpha * alpha;
    const float d = std::max(cos_h * cos_h * (a2 - 1.0f) + 1.0f, 1e-12f);
    return a2 / (kPi * d * d);
}

inline float smith_g1(float cos_v, float alpha) {
    if (cos_v <= 0.0f)
        return 0.0f;
    const float a2 = alpha * alpha;
    return 2.0f * cos_v / (cos_v + std::sqrt(a2 + (1.0f - a2) * cos_v * cos_v));
}

inline Vec3f schlick(const Vec3f &f0, float cos_i) {
    const float m = std::clamp(1.0f - cos_i, 0.0f, 1.0f);
    const float m2 = m * m;
    return f0 + (Vec3f::Ones() - f0) * (m2 * m2 * m);
}

inline Vec3f to_world(const ShadingPoint &sp, const Vec3f &local) {
    Vec3f t, b;
    build_frame(sp.n, t, b);
    return local.x() * t + local.y() * b + local.z() * sp.n;
}

} // namespace

Vec3f bsdf_eval(const Material &m, const ShadingPoint &sp, const Vec3f &wi) {
    const float cos_o = sp.n.dot(sp.wo);
    const float cos_i = sp.n.dot(wi);
    if (cos_o <= 0.0f || cos_i <= 0.0f)
        return Vec3f::Zero();
    switch (m.kind) {
    case MaterialKind::Diffuse:
        return m.albedo * kInvPi;
    case MaterialKind::Conductor: {
        const Vec3f h = (sp.wo + wi).normalized();
        const float alpha = std::max(m.roughness, kMinAlpha);
        const float d = ggx_d(sp.n.dot(h), alpha);
        const float g = smith_g1(cos_o, alpha) * smith_g1(cos_i, alpha);
        const Vec3f f = schlick(m.albedo, sp.wo.dot(h));
        return f * (d * g / (4.0f * cos_o * cos_i));
    }
    }
    return Vec3f::Zero();
}

float bsdf_pdf(const Material &m, const ShadingPoint &sp, const Vec3f &wi) {
    const float cos_o = sp.n.dot(sp.wo);
    const float cos_i = sp.n.dot(wi);
    if (cos_o <= 0.0f || cos_i <= 0.0f)
        return 0.0f;
    switch (m.kind) {
    case MaterialKind::Diffuse:
        return cos_i * kInvPi;
    case MaterialKind::Conductor: {
        const Vec3f h = (sp.wo + wi).normalized();
        const float cos_h = sp.n.dot(h);
        const float alpha = std::max(m.roughness, kMinAlpha);
        const float d = ggx_d(cos_h, alpha);
        const float dot_oh = sp.wo.dot(h);
        if (dot_oh <= 0.0f)
            return 0.0f;
        return d * cos_h / (4.0f * dot_oh);
    }
    }
    return 0.0f;
}

BsdfSample bsdf_sample(const Material &m, const ShadingPoint &sp, float u1, float u2) {
    BsdfSample s;
    const float cos_o = sp.n.dot(sp.wo);
    if (cos_o <= 0.0f)
        return s;
    switch (m.kind) {
    case MaterialKind::Diffuse: {
        // Cosine-weighted hemisphere (Malley); f*cos/pdf collapses to albedo.
        const float r = std::sqrt(u1);
        const float phi = 2.0f * kPi * u2;
        const Vec3f local(r * std::cos(phi), r * std::sin(phi),
                          std::sqrt(std::max(0.0f, 1.0f - u1)));
        s.wi = to_world(sp, local);
        const float cos_i = sp.n.dot(s.wi);
        if (cos_i <= 0.0f)
            return s;
        s.pdf = cos_i * kInvPi;
        s.throughput = m.albedo;
        s.valid = true;
        return s;
    }
    case MaterialKind::Conductor: {
        const float alpha = std::max(m.roughness, kMinAlpha);
        // Sample the GGX NDF for the half vector.
        const float tan2 = alpha * alpha * u1 / std::max(1.0f - u1, 1e-12f);
        const float cos_h = 1.0f / std::sqrt(1.0f + tan2);
        const float sin_h = std::sqrt(std::max(0.0f, 1.0f - cos_h * cos_h));
        const float phi = 2.0f * kPi * u2;
        const Vec3f h = to_world(sp, Vec3f(sin_h * std::cos(phi), sin_h * std::sin(phi), cos_h));
        const float dot_oh = sp.wo.dot(h);
        if (dot_oh <= 0.0f)
            return s;
        s.wi = 2.0f * dot_oh * h - sp.wo;
        const float cos_i = sp.n.dot(s.wi);
        if (cos_i <= 0.0f)
            return s;
        s.pdf = ggx_d(sp.n.dot(h), alpha) * sp.n.dot(h) / (4.0f * dot_oh);
        if (!(s.pdf > 0.0f) || !std::isfinite(s.pdf))
            return s;
        const float g = smith_g1(cos_o, alpha) * smith_g1(cos_i, alpha);
        const Vec3f f = schlick(m.albedo, dot_oh);
        // f_r * cos_i / pdf with the shared D(h) cos_h factor cancelled.
        s.throughput = f * (g * dot_oh / (cos_o * sp.n.dot(h)));
        s.valid = true;
        return s;
    }
    }
    return s;
}

} // namespace nrrs
