#pragma once

#include "nrrs/core.hpp"
#include "nrrs/geometry.hpp"

#include <cstdint>
#include <vector>

namespace nrrs {

/// Spatial radiance statistics cache for the octree ADRRS baseline. Every node
/// along the root-to-leaf path keeps streaming (Welford) mean and second
/// moment of the inserted RGB values; leaves split after a fixed insert count.
class OctreeCache {
public:
    struct Stats {
        uint64_t count = 0;
        Vec3f mean = Vec3f::Zero();
        Vec3f second_moment = Vec3f::Zero();
    };

    OctreeCache() = default;
    OctreeCache(const AABB &bounds, uint32_t subdivide_threshold = 512, int max_depth = 12);

    /// Inserts a sample; points outside the root bounds are clamped onto it.
    void insert(const Vec3f &p, const Vec3f &value);

    /// Stats of the deepest populated node containing p. Returns a zero-count
    /// prior when the cache is empty.
    Stats query(const Vec3f &p) const;

    /// Merges another cache built over the same bounds; counts add exactly and
    /// means combine weighted by count.
    void merge(const OctreeCache &other);

    uint64_t total_count() const { return m_nodes.empty() ? 0 : m_nodes[0].count; }
    size_t node_count() const { return m_nodes.size(); }
    const AABB &bounds() const { return m_bounds; }

private:
    struct Node {
        uint64_t count = 0;
        Vec3d mean = Vec3d::Zero();
        Vec3d m2 = Vec3d::Zero();  // running mean of squares
        int32_t first_child = -1;  // 8 consecutive children when >= 0
    };

    /// Child octant; boundaries go to the lower-index child (strict >).
    static int child_index(const Vec3f &p, const Vec3f &center) {
        return (p.x() > center.x() ? 1 : 0) | (p.y() > center.y() ? 2 : 0) |
               (p.z() > center.z() ? 4 : 0);
    }

    void merge_node(int32_t dst, const OctreeCache &other, int32_t src);

    std::vector<Node> m_nodes;
    AABB m_bounds;
    uint32_t m_threshold = 512;
    int m_max_depth = 12;
};

} // namespace nrrs
