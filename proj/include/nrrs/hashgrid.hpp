#pragma once

#include "nrrs/core.hpp"
#include "nrrs/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace nrrs {

struct HashGridSpec {
    int levels = 8;
    int features = 2;
    int base_resolution = 16;  // doubles per level
    int log2_table_size = 15;

    int output_dim() const { return levels * features; }
    int resolution(int level) const { return base_resolution << level; }
    uint32_t table_size() const { return 1u << log2_table_size; }
};

/// Multiresolution trainable feature grid over [0,1]^3 with trilinear
/// interpolation. Levels whose dense vertex count fits the table are indexed
/// directly; finer levels use spatial hashing.
class HashGrid {
public:
    struct Workspace {
        std::vector<uint32_t> indices;  // n * levels * 8
        std::vector<float> weights;     // n * levels * 8
        int n = 0;
    };

    explicit HashGrid(const HashGridSpec &spec = {});

    /// Features initialized uniform in [-1e-4, 1e-4].
    void init(RngStream &rng);

    /// points01: 3 x n matrix of positions in [0,1]^3.
    /// out: output_dim x n; ws (optional) retains interpolation data for backward.
    void encode(const Eigen::Matrix3Xf &points01, Eigen::Ref<Eigen::MatrixXf> out,
                Workspace *ws = nullptr) const;

    /// Accumulates d(loss)/d(theta) for the encoded batch into grad.
    void encode_backward(const Workspace &ws, const Eigen::MatrixXf &d_out,
                         Eigen::VectorXf &grad) const;

    const HashGridSpec &spec() const { return m_spec; }
    Eigen::VectorXf &theta() { return m_theta; }
    const Eigen::VectorXf &theta() const { return m_theta; }
    int param_count() const { return static_cast<int>(m_theta.size()); }

private:
    uint32_t vertex_index(int level, uint32_t x, uint32_t y, uint32_t z) const;

    HashGridSpec m_spec;
    Eigen::VectorXf m_theta;
    std::vector<bool> m_dense;  // per level
};

} // namespace nrrs
