#include "nrrs/hashgrid.hpp"

#include <algorithm>
#include <cmath>

namespace nrrs {

namespace {
// NGP-style spatial hash primes; the x coordinate stays unscaled.
constexpr uint32_t kPrimeY = 2654435761u;
constexpr uint32_t kPrimeZ = 805459861u;
} // namespace

HashGrid::HashGrid(const HashGridSpec &spec) : m_spec(spec) {
    m_theta = Eigen::VectorXf::Zero(static_cast<int64_t>(spec.levels) * spec.table_size() *
                                    spec.features);
    m_dense.resize(spec.levels);
    for (int l = 0; l < spec.levels; ++l) {
        const uint64_t verts = static_cast<uint64_t>(spec.resolution(l) + 1) *
                               (spec.resolution(l) + 1) * (spec.resolution(l) + 1);
        m_dense[l] = verts <= spec.table_size();
    }
}

void HashGrid::init(RngStream &rng) {
    for (int64_t i = 0; i < m_theta.size(); ++i)
        m_theta[i] = (rng.next_float() * 2.0f - 1.0f) * 1e-4f;
}

uint32_t HashGrid::vertex_index(int level, uint32_t x, uint32_t y, uint32_t z) const {
    if (m_dense[level]) {
        const uint32_t n = static_cast<uint32_t>(m_spec.resolution(level)) + 1;
        return (x * n + y) * n + z;
    }
    return (x ^ (y * kPrimeY) ^ (z * kPrimeZ)) & (m_spec.table_size() - 1);
}

void HashGrid::encode(const Eigen::Matrix3Xf &points01, Eigen::Ref<Eigen::MatrixXf> out,
                      Workspace *ws) const {
    const int n = static_cast<int>(points01.cols());
    const int F = m_spec.features;
    const int L = m_spec.levels;
    if (out.rows() != L * F || out.cols() != n)
        fail("HashGrid::encode: output shape mismatch");
    if (ws) {
        ws->indices.resize(static_cast<size_t>(n) * L * 8);
        ws->weights.resize(static_cast<size_t>(n) * L * 8);
        ws->n = n;
    }
    if (F > 4)
        fail("HashGrid::encode: at most 4 features per level");
    const uint32_t stride = m_spec.table_size() * F;
    for (int i = 0; i < n; ++i) {
        for (int l = 0; l < L; ++l) {
            const int res = m_spec.resolution(l);
            float fx = std::clamp(points01(0, i), 0.0f, 1.0f) * res;
            float fy = std::clamp(points01(1, i), 0.0f, 1.0f) * res;
            float fz = std::clamp(points01(2, i), 0.0f, 1.0f) * res;
            uint32_t cx = std::min(static_cast<uint32_t>(fx), static_cast<uint32_t>(res - 1));
            uint32_t cy = std::min(static_cast<uint32_t>(fy), static_cast<uint32_t>(res - 1));
            uint32_t cz = std::min(static_cast<uint32_t>(fz), static_cast<uint32_t>(res - 1));
            const float tx = fx - cx, ty = fy - cy, tz = fz - cz;
            float acc[4] = {0.0f, 0.0f, 0.0f, 0.0f};
            for (int c = 0; c < 8; ++c) {
                const uint32_t ox = (c & 1), oy = (c >> 1) & 1, oz = (c >> 2) & 1;
                const float w = (ox ? tx : 1.0f - tx) * (oy ? ty : 1.0f - ty) *
                                (oz ? tz : 1.0f - tz);
                const uint32_t idx = vertex_index(l, cx + ox, cy + oy, cz + oz);
                const uint32_t base = static_cast<uint32_t>(l) * stride + idx * F;
                for (int f = 0; f < F; ++f)
                    acc[f] += w * m_theta[base + f];
                if (ws) {
                    const size_t slot = ((static_cast<size_t>(i) * L) + l) * 8 + c;
                    ws->indices[slot] = base;
                    ws->weights[slot] = w;
                }
            }
            for (int f = 0; f < F; ++f)
                out(l * F + f, i) = acc[f];
        }
    }
}

void HashGrid::encode_backward(const Workspace &ws, const Eigen::MatrixXf &d_out,
                               Eigen::VectorXf &grad) const {
    const int F = m_spec.features;
    const int L = m_spec.levels;
    if (grad.size() != m_theta.size())
        fail("HashGrid::encode_backward: grad size mismatch");
    if (d_out.rows() != L * F || d_out.cols() != ws.n)
        fail("HashGrid::encode_backward: d_out shape mismatch");
    for (int i = 0; i < ws.n; ++i) {
        for (int l = 0; l < L; ++l) {
            for (int c = 0; c < 8; ++c) {
                const size_t slot = ((static_cast<size_t>(i) * L) + l) * 8 + c;
                const uint32_t base = ws.indices[slot];
                const float w = ws.weights[slot];
                for (int f = 0; f < F; ++f)
                    grad[base + f] += w * d_out(l * F + f, i);
            }
        }
    }
}

} // namespace nrrs
