#pragma once

#include "nrrs/core.hpp"
#include "nrrs/rng.hpp"

namespace nrrs {

enum class MaterialKind { Diffuse, Conductor };

struct Material {
    MaterialKind kind = MaterialKind::Diffuse;
    Vec3f albedo = Vec3f::Constant(0.5f);  // diffuse reflectance or conductor F0
    float roughness = 0.5f;                // GGX alpha, conductor only
    Vec3f emission = Vec3f::Zero();

    bool emissive() const { return emission.maxCoeff() > 0.0f; }
    bool scattering() const {
        return kind == MaterialKind::Conductor || albedo.maxCoeff() > 0.0f;
    }
};

/// Local shading frame; wo/wi live in world space, n is the shading normal.
struct ShadingPoint {
    Vec3f p = Vec3f::Zero();
    Vec3f n = Vec3f(0, 0, 1);
    Vec3f wo = Vec3f(0, 0, 1);
};

struct BsdfSample {
    Vec3f wi = Vec3f(0, 0, 1);
    Vec3f throughput = Vec3f::Zero();  // f * cos / pdf
    float pdf = 0.0f;
    bool valid = false;
};

/// f_r(wo, wi); zero for directions below the surface.
Vec3f bsdf_eval(const Material &m, const ShadingPoint &sp, const Vec3f &wi);

/// Solid-angle density of bsdf_sample for direction wi.
float bsdf_pdf(const Material &m, const ShadingPoint &sp, const Vec3f &wi);

/// Importance-samples the BSDF lobe. Cosine-weighted for diffuse (throughput
/// equals albedo exactly), GGX NDF sampling for conductors.
BsdfSample bsdf_sample(const Material &m, const ShadingPoint &sp, float u1, float u2);

} // namespace nrrs
