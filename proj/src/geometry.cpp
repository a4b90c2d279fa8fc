#include "nrrs/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace nrrs {

AABB TriMesh::triangle_bounds(uint32_t tri) const {
    AABB b;
    b.grow(vertex(tri, 0));
    b.grow(vertex(tri, 1));
    b.grow(vertex(tri, 2));
    return b;
}

float TriMesh::triangle_area(uint32_t tri) const {
    const Vec3f e1 = vertex(tri, 1) - vertex(tri, 0);
    const Vec3f e2 = vertex(tri, 2) - vertex(tri, 0);
    return 0.5f * e1.cross(e2).norm();
}

Vec3f TriMesh::face_normal(uint32_t tri) const {
    const Vec3f e1 = vertex(tri, 1) - vertex(tri, 0);
    const Vec3f e2 = vertex(tri, 2) - vertex(tri, 0);
    const Vec3f n = e1.cross(e2);
    const float len = n.norm();
    return len > 0.0f ? Vec3f(n / len) : Vec3f(0, 0, 1);
}

Vec3f TriMesh::shading_normal(uint32_t tri, float u, float v) const {
    if (normals.empty())
        return face_normal(tri);
    const Vec3f n = (1.0f - u - v) * normals[indices[3 * tri + 0]] +
                    u * normals[indices[3 * tri + 1]] +
                    v * normals[indices[3 * tri + 2]];
    const float len = n.norm();
    return len > 1e-6f ? Vec3f(n / len) : face_normal(tri);
}

Vec3f TriMesh::point_at(uint32_t tri, float u, float v) const {
    return (1.0f - u - v) * vertex(tri, 0) + u * vertex(tri, 1) + v * vertex(tri, 2);
}

bool intersect_triangle(const TriMesh &mesh, uint32_t tri, const Ray &ray, float t_min, Hit &hit) {
    const Vec3f p0 = mesh.vertex(tri, 0);
    const Vec3f e1 = mesh.vertex(tri, 1) - p0;
    const Vec3f e2 = mesh.vertex(tri, 2) - p0;
    const Vec3f pv = ray.d.cross(e2);
    const float det = e1.dot(pv);
    if (std::fabs(det) < 1e-12f)
        return false;
    const float inv_det = 1.0f / det;
    const Vec3f tv = ray.o - p0;
    const float u = tv.dot(pv) * inv_det;
    if (u < 0.0f || u > 1.0f)
        return false;
    const Vec3f qv = tv.cross(e1);
    const float v = ray.d.dot(qv) * inv_det;
    if (v < 0.0f || u + v > 1.0f)
        return false;
    const float t = e2.dot(qv) * inv_det;
    if (t <= t_min || t >= hit.t || t >= ray.t_max)
        return false;
    hit.t = t;
    hit.tri = tri;
    hit.u = u;
    hit.v = v;
    return true;
}

namespace {

inline bool intersect_aabb(const AABB &b, const Vec3f &o, const Vec3f &inv_d, float t_max) {
    float t0 = 0.0f, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        const float lo = (b.lo[a] - o[a]) * inv_d[a];
        const float hi = (b.hi[a] - o[a]) * inv_d[a];
        t0 = std::max(t0, std::min(lo, hi));
        t1 = std::min(t1, std::max(lo, hi));
    }
    return t0 <= t1;
}

constexpr uint32_t kLeafSize = 4;

} // namespace

uint32_t Bvh::build_recursive(const TriMesh &mesh, uint32_t begin, uint32_t end,
                              std::vector<Vec3f> &centers) {
    const uint32_t node_id = static_cast<uint32_t>(m_nodes.size());
    m_nodes.emplace_back();

    AABB bounds;
    for (uint32_t i = begin; i < end; ++i)
        bounds.grow(mesh.triangle_bounds(m_prims[i]));
    m_nodes[node_id].bounds = bounds;

    const uint32_t count = end - begin;
    if (count <= kLeafSize) {
        m_nodes[node_id].offset = begin;
        m_nodes[node_id].count = static_cast<uint16_t>(count);
        return node_id;
    }

    const Vec3f extent = bounds.extent();
    int axis = 0;
    if (extent.y() > extent.x())
        axis = 1;
    if (extent.z() > extent[axis])
        axis = 2;

    const uint32_t mid = begin + count / 2;
    std::nth_element(m_prims.begin() + begin, m_prims.begin() + mid, m_prims.begin() + end,
                     [&](uint32_t a, uint32_t b) { return centers[a][axis] < centers[b][axis]; });

    m_nodes[node_id].axis = static_cast<uint8_t>(axis);
    const uint32_t left = build_recursive(mesh, begin, mid, centers);
    const uint32_t right = build_recursive(mesh, mid, end, centers);
    (void)left;
    m_nodes[node_id].offset = right;
    m_nodes[node_id].count = 0;
    return node_id;
}

void Bvh::build(const TriMesh &mesh) {
    m_nodes.clear();
    m_prims.clear();
    const uint32_t n = mesh.triangle_count();
    if (n == 0) {
        m_bounds = AABB{};
        return;
    }
    m_prims.resize(n);
    std::vector<Vec3f> centers(n);
    for (uint32_t i = 0; i < n; ++i) {
        m_prims[i] = i;
        centers[i] = mesh.triangle_bounds(i).center();
    }
    m_nodes.reserve(2 * n);
    build_recursive(mesh, 0, n, centers);
    m_bounds = m_nodes[0].bounds;
}

Hit Bvh::intersect(const TriMesh &mesh, const Ray &ray) const {
    if (ray.d.squaredNorm() == 0.0f || !is_finite(ray.d))
        fail("Bvh::intersect: degenerate ray direction");
    Hit hit;
    if (m_nodes.empty())
        return hit;
    const Vec3f inv_d = ray.d.cwiseInverse();

    uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node &node = m_nodes[stack[--sp]];
        if (!intersect_aabb(node.bounds, ray.o, inv_d, std::min(hit.t, ray.t_max)))
            continue;
        if (node.count > 0) {
            for (uint32_t i = 0; i < node.count; ++i)
                intersect_triangle(mesh, m_prims[node.offset + i], ray, kRayEps, hit);
        } else {
            // Near child first by split-axis direction sign.
            const uint32_t left = static_cast<uint32_t>(&node - m_nodes.data()) + 1;
            const uint32_t right = node.offset;
            if (inv_d[node.axis] >= 0.0f) {
                stack[sp++] = right;
                stack[sp++] = left;
            } else {
                stack[sp++] = left;
                stack[sp++] = right;
            }
        }
    }
    return hit;
}

bool Bvh::occluded(const TriMesh &mesh, const Ray &ray) const {
    if (m_nodes.empty())
        return false;
    const Vec3f inv_d = ray.d.cwiseInverse();
    uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node &node = m_nodes[stack[--sp]];
        if (!intersect_aabb(node.bounds, ray.o, inv_d, ray.t_max))
            continue;
        if (node.count > 0) {
            for (uint32_t i = 0; i < node.count; ++i) {
                Hit h;
                h.t = ray.t_max;
                if (intersect_triangle(mesh, m_prims[node.offset + i], ray, kRayEps, h))
                    return true;
            }
        } else {
            stack[sp++] = node.offset;
            stack[sp++] = static_cast<uint32_t>(&node - m_nodes.data()) + 1;
        }
    }
    return false;
}

Hit Bvh::intersect_brute_force(const TriMesh &mesh, const Ray &ray) {
    Hit hit;
    for (uint32_t tri = 0; tri < mesh.triangle_count(); ++tri)
        intersect_triangle(mesh, tri, ray, kRayEps, hit);
    return hit;
}

} // namespace nrrs
