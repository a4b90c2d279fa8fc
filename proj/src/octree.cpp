#include "nrrs/octree.hpp"

namespace nrrs {

OctreeCache::OctreeCache(const AABB &bounds, uint32_t subdivide_threshold, int max_depth)
    : m_bounds(bounds), m_threshold(subdivide_threshold), m_max_depth(max_depth) {
    if (!bounds.valid())
        fail("OctreeCache: invalid bounds");
    m_nodes.emplace_back();
}

void OctreeCache::insert(const Vec3f &p, const Vec3f &value) {
    if (m_nodes.empty())
        fail("OctreeCache: insert into default-constructed cache");
    const Vec3f q = p.cwiseMax(m_bounds.lo).cwiseMin(m_bounds.hi);
    const Vec3d x = value.cast<double>();
    const Vec3d x2 = x.cwiseProduct(x);

    Vec3f lo = m_bounds.lo, hi = m_bounds.hi;
    int32_t node_id = 0;
    for (int depth = 0;; ++depth) {
        Node &node = m_nodes[node_id];
        const uint64_t n = ++node.count;
        node.mean += (x - node.mean) / static_cast<double>(n);
        node.m2 += (x2 - node.m2) / static_cast<double>(n);

        if (node.first_child < 0) {
            if (node.count > m_threshold && depth < m_max_depth) {
                const int32_t first = static_cast<int32_t>(m_nodes.size());
                // Note: resize may reallocate; re-fetch the node afterwards.
                m_nodes.resize(m_nodes.size() + 8);
                m_nodes[node_id].first_child = first;
            } else {
                return;
            }
        }
        const Vec3f center = 0.5f * (lo + hi);
        const int child = child_index(q, center);
        node_id = m_nodes[node_id].first_child + child;
        for (int a = 0; a < 3; ++a) {
            if (child & (1 << a))
                lo[a] = center[a];
            else
                hi[a] = center[a];
        }
    }
}

OctreeCache::Stats OctreeCache::query(const Vec3f &p) const {
    Stats out;
    if (m_nodes.empty() || m_nodes[0].count == 0)
        return out;
    const Vec3f q = p.cwiseMax(m_bounds.lo).cwiseMin(m_bounds.hi);
    Vec3f lo = m_bounds.lo, hi = m_bounds.hi;
    int32_t node_id = 0;
    int32_t best = 0;
    for (;;) {
        const Node &node = m_nodes[node_id];
        if (node.count == 0)
            break;
        best = node_id;
        if (node.first_child < 0)
            break;
        const Vec3f center = 0.5f * (lo + hi);
        const int child = child_index(q, center);
        node_id = node.first_child + child;
        for (int a = 0; a < 3; ++a) {
            if (child & (1 << a))
                lo[a] = center[a];
            else
                hi[a] = center[a];
        }
    }
    const Node &node = m_nodes[best];
    out.count = node.count;
    out.mean = node.mean.cast<float>();
    out.second_moment = node.m2.cast<float>();
    return out;
}

void OctreeCache::merge_node(int32_t dst, const OctreeCache &other, int32_t src) {
    {
        Node &d = m_nodes[dst];
        const Node &s = other.m_nodes[src];
        const uint64_t n = d.count + s.count;
        if (n > 0) {
            const double ws = static_cast<double>(s.count) / static_cast<double>(n);
            d.mean += (s.mean - d.mean) * ws;
            d.m2 += (s.m2 - d.m2) * ws;
            d.count = n;
        }
    }
    const int32_t src_child = other.m_nodes[src].first_child;
    if (src_child < 0)
        return;
    if (m_nodes[dst].first_child < 0) {
        const int32_t first = static_cast<int32_t>(m_nodes.size());
        m_nodes.resize(m_nodes.size() + 8);
        m_nodes[dst].first_child = first;
    }
    for (int c = 0; c < 8; ++c)
        merge_node(m_nodes[dst].first_child + c, other, src_child + c);
}

void OctreeCache::merge(const OctreeCache &other) {
    if (m_nodes.empty() || other.m_nodes.empty())
        fail("OctreeCache: merge with default-constructed cache");
    merge_node(0, other, 0);
}

} // namespace nrrs
