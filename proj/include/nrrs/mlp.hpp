#pragma once

#include "nrrs/core.hpp"
#include "nrrs/rng.hpp"

#include <Eigen/Core>

#include <vector>

namespace nrrs {

struct MlpSpec {
    int in = 32;
    int out = 1;
    int hidden = 32;
    int hidden_layers = 3;
    float leaky_slope = 0.01f;
};

/// Fully connected net: hidden_layers linear layers with leaky-ReLU, plus a
/// linear output head. Parameters live in one flat vector (layer maps are
/// created on demand) so optimizer, EMA, and checkpoints stay trivial.
/// Batches are column-major: one sample per column.
class Mlp {
public:
    struct Workspace {
        Eigen::MatrixXf input;
        std::vector<Eigen::MatrixXf> pre;   // pre-activations per hidden layer
        std::vector<Eigen::MatrixXf> post;  // activations per hidden layer
    };

    explicit Mlp(const MlpSpec &spec = {});

    /// He-style uniform init for hidden layers; the output head starts at zero
    /// so a fresh net is the constant-zero function.
    void init(RngStream &rng);

    void forward(const Eigen::MatrixXf &x, Eigen::MatrixXf &y, Workspace *ws = nullptr) const;

    /// Accumulates parameter gradients into grad (size param_count) given
    /// d(loss)/d(output); optionally returns d(loss)/d(input).
    void backward(const Workspace &ws, const Eigen::MatrixXf &d_y, Eigen::VectorXf &grad,
                  Eigen::MatrixXf *d_x = nullptr) const;

    int param_count() const { return m_param_count; }
    int layer_count() const { return m_spec.hidden_layers + 1; }
    const MlpSpec &spec() const { return m_spec; }
    Eigen::VectorXf &theta() { return m_theta; }
    const Eigen::VectorXf &theta() const { return m_theta; }

    /// Offset of the output head's parameters within theta.
    int head_offset() const { return m_offsets[m_spec.hidden_layers]; }
    /// Writes the output head bias (weights untouched).
    void set_head_bias(const Eigen::VectorXf &bias);

private:
    int layer_in(int layer) const { return layer == 0 ? m_spec.in : m_spec.hidden; }
    int layer_out(int layer) const {
        return layer == m_spec.hidden_layers ? m_spec.out : m_spec.hidden;
    }
    Eigen::Map<Eigen::MatrixXf> weight(Eigen::VectorXf &t, int layer) const;
    Eigen::Map<const Eigen::MatrixXf> weight(const Eigen::VectorXf &t, int layer) const;
    Eigen::Map<Eigen::VectorXf> bias(Eigen::VectorXf &t, int layer) const;
    Eigen::Map<const Eigen::VectorXf> bias(const Eigen::VectorXf &t, int layer) const;

    MlpSpec m_spec;
    Eigen::VectorXf m_theta;
    std::vector<int> m_offsets;  // per layer, into m_theta
    int m_param_count = 0;
};

} // namespace nrrs
