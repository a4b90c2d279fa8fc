#pragma once

#include "nrrs/bsdf.hpp"
#include "nrrs/geometry.hpp"
#include "nrrs/rng.hpp"

#include <string>
#include <vector>

namespace nrrs {

struct Camera {
    Vec3f position = Vec3f(0, 0, 0);
    Vec3f look_at = Vec3f(0, 0, -1);
    Vec3f up = Vec3f(0, 1, 0);
    float vfov_deg = 40.0f;

    /// Primary ray through film coordinates (u,v) in [0,1)^2, v down.
    Ray generate_ray(float u, float v, float aspect) const;
};

struct LightSample {
    Vec3f p = Vec3f::Zero();
    Vec3f n = Vec3f(0, 0, 1);
    Vec3f emission = Vec3f::Zero();
    float pdf_area = 0.0f;  // 1 / (light count * triangle area)
    uint32_t tri = ~0u;
    bool valid = false;
};

struct SurfaceInteraction {
    Vec3f p = Vec3f::Zero();
    Vec3f n_s = Vec3f(0, 0, 1);  // shading normal
    Vec3f n_g = Vec3f(0, 0, 1);  // geometric normal
    Vec3f wo = Vec3f(0, 0, 1);
    uint32_t tri = ~0u;
    uint32_t material = 0;
};

class Scene {
public:
    TriMesh mesh;
    std::vector<Material> materials;
    Camera camera;
    Vec3f env_emission = Vec3f::Zero();

    void finalize();

    Hit intersect(const Ray &ray) const { return m_bvh.intersect(mesh, ray); }
    bool occluded(const Ray &ray) const { return m_bvh.occluded(mesh, ray); }

    SurfaceInteraction interaction(const Ray &ray, const Hit &hit) const;
    const Material &material_of(uint32_t tri) const {
        return materials[mesh.material_ids[tri]];
    }

    uint32_t light_count() const { return static_cast<uint32_t>(m_lights.size()); }

    /// Uniform light pick, uniform area point. pdf_area = 1/(count * area).
    LightSample sample_light(float u_pick, float u1, float u2) const;

    /// Area pdf of sampling a point on triangle tri via sample_light; zero for
    /// non-emissive triangles. Used for MIS on BSDF-sampled light hits.
    float light_pdf_area(uint32_t tri) const;

    /// Scene-space point mapped into [0,1]^3 for positional encodings.
    Vec3f normalize_position(const Vec3f &p) const;

    const AABB &bounds() const { return m_bounds; }

private:
    Bvh m_bvh;
    AABB m_bounds;
    std::vector<uint32_t> m_lights;             // emissive triangle ids
    std::vector<float> m_light_areas;
    std::vector<int32_t> m_light_index_of_tri;  // -1 when not a light
    Vec3f m_norm_offset = Vec3f::Zero();
    float m_norm_scale = 1.0f;
};

/// Wavefront OBJ subset: v, vn, f (triangulates fans). All faces take the
/// given material id.
void load_obj(const std::string &path, uint32_t material_id, TriMesh &out);

/// Text scene description, one directive per line (see README). Supports
/// builtin: names as well as description files.
Scene load_scene(const std::string &name_or_path);

Scene make_cornell_scene();
Scene make_furnace_scene(float albedo = 0.7f, float emission = 0.5f);
Scene make_caustic_scene();

/// Appends a rectangle (two triangles) spanning corner + e1 + e2.
void add_quad(TriMesh &mesh, const Vec3f &corner, const Vec3f &e1, const Vec3f &e2,
              uint32_t material_id);

} // namespace nrrs
