#pragma once

#include "nrrs/core.hpp"

#include <cstdint>
#include <vector>

namespace nrrs {

struct AABB {
    Vec3f lo = Vec3f::Constant(kInf);
    Vec3f hi = Vec3f::Constant(-kInf);

    void grow(const Vec3f &p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    void grow(const AABB &b) {
        lo = lo.cwiseMin(b.lo);
        hi = hi.cwiseMax(b.hi);
    }
    Vec3f center() const { return 0.5f * (lo + hi); }
    Vec3f extent() const { return hi - lo; }
    bool valid() const { return (lo.array() <= hi.array()).all(); }
};

struct Hit {
    float t = kInf;
    uint32_t tri = ~0u;
    float u = 0.0f, v = 0.0f;

    bool valid() const { return tri != ~0u; }
};

/// Indexed triangle soup. Normals are optional per-vertex shading normals.
struct TriMesh {
    std::vector<Vec3f> positions;
    std::vector<Vec3f> normals;
    std::vector<uint32_t> indices;       // 3 per triangle
    std::vector<uint32_t> material_ids;  // 1 per triangle

    uint32_t triangle_count() const { return static_cast<uint32_t>(indices.size() / 3); }
    Vec3f vertex(uint32_t tri, int k) const { return positions[indices[3 * tri + k]]; }
    AABB triangle_bounds(uint32_t tri) const;
    float triangle_area(uint32_t tri) const;
    Vec3f face_normal(uint32_t tri) const;
    Vec3f shading_normal(uint32_t tri, float u, float v) const;
    Vec3f point_at(uint32_t tri, float u, float v) const;
};

/// Moeller-Trumbore; hits strictly inside (t_min, ray.t_max).
bool intersect_triangle(const TriMesh &mesh, uint32_t tri, const Ray &ray, float t_min, Hit &hit);

/// Median-split BVH over mesh triangles.
class Bvh {
public:
    void build(const TriMesh &mesh);

    /// Closest hit; throws on degenerate ray direction.
    Hit intersect(const TriMesh &mesh, const Ray &ray) const;

    /// Any hit in (t_min, ray.t_max); used for shadow rays.
    bool occluded(const TriMesh &mesh, const Ray &ray) const;

    /// Reference linear scan, used as the traversal oracle in tests.
    static Hit intersect_brute_force(const TriMesh &mesh, const Ray &ray);

    const AABB &bounds() const { return m_bounds; }
    bool empty() const { return m_nodes.empty(); }

private:
    struct Node {
        AABB bounds;
        uint32_t offset = 0;  // left child for inner, first primitive for leaf
        uint16_t count = 0;   // 0 for inner nodes
        uint8_t axis = 0;
    };

    uint32_t build_recursive(const TriMesh &mesh, uint32_t begin, uint32_t end,
                             std::vector<Vec3f> &centers);

    std::vector<Node> m_nodes;
    std::vector<uint32_t> m_prims;
    AABB m_bounds;
};

} // namespace nrrs
