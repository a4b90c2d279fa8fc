#include "nrrs/mlp.hpp"

#include <cmath>

namespace nrrs {

Mlp::Mlp(const MlpSpec &spec) : m_spec(spec) {
    m_offsets.resize(layer_count());
    int offset = 0;
    for (int l = 0; l < layer_count(); ++l) {
        m_offsets[l] = offset;
        offset += layer_out(l) * layer_in(l) + layer_out(l);
    }
    m_param_count = offset;
    m_theta = Eigen::VectorXf::Zero(m_param_count);
}

Eigen::Map<Eigen::MatrixXf> Mlp::weight(Eigen::VectorXf &t, int layer) const {
    return {t.data() + m_offsets[layer], layer_out(layer), layer_in(layer)};
}

Eigen::Map<const Eigen::MatrixXf> Mlp::weight(const Eigen::VectorXf &t, int layer) const {
    return {t.data() + m_offsets[layer], layer_out(layer), layer_in(layer)};
}

Eigen::Map<Eigen::VectorXf> Mlp::bias(Eigen::VectorXf &t, int layer) const {
    return {t.data() + m_offsets[layer] + layer_out(layer) * layer_in(layer), layer_out(layer)};
}

Eigen::Map<const Eigen::VectorXf> Mlp::bias(const Eigen::VectorXf &t, int layer) const {
    return {t.data() + m_offsets[layer] + layer_out(layer) * layer_in(layer), layer_out(layer)};
}

void Mlp::init(RngStream &rng) {
    m_theta.setZero();
    // Hidden layers only; the zero head keeps fresh outputs at exactly zero.
    for (int l = 0; l < m_spec.hidden_layers; ++l) {
        auto w = weight(m_theta, l);
        const float bound = std::sqrt(6.0f / static_cast<float>(layer_in(l)));
        for (int c = 0; c < w.cols(); ++c)
            for (int r = 0; r < w.rows(); ++r)
                w(r, c) = (rng.next_float() * 2.0f - 1.0f) * bound;
    }
}

void Mlp::set_head_bias(const Eigen::VectorXf &bias_value) {
    if (bias_value.size() != m_spec.out)
        fail("Mlp::set_head_bias: size mismatch");
    bias(m_theta, m_spec.hidden_layers) = bias_value;
}

void Mlp::forward(const Eigen::MatrixXf &x, Eigen::MatrixXf &y, Workspace *ws) const {
    if (x.rows() != m_spec.in)
        fail("Mlp::forward: input dim mismatch");
    const float slope = m_spec.leaky_slope;
    if (ws) {
        ws->input = x;
        ws->pre.resize(m_spec.hidden_layers);
        ws->post.resize(m_spec.hidden_layers);
    }
    Eigen::MatrixXf a = x;
    for (int l = 0; l < m_spec.hidden_layers; ++l) {
        Eigen::MatrixXf z = (weight(m_theta, l) * a).colwise() + bias(m_theta, l);
        if (ws)
            ws->pre[l] = z;
        a = z.cwiseMax(z * slope);
        if (ws)
            ws->post[l] = a;
    }
    y = (weight(m_theta, m_spec.hidden_layers) * a).colwise() +
        bias(m_theta, m_spec.hidden_layers);
}

void Mlp::backward(const Workspace &ws, const Eigen::MatrixXf &d_y, Eigen::VectorXf &grad,
                   Eigen::MatrixXf *d_x) const {
    if (grad.size() != m_param_count)
        fail("Mlp::backward: grad size mismatch");
    const float slope = m_spec.leaky_slope;
    const int head = m_spec.hidden_layers;

    Eigen::MatrixXf delta = d_y;
    {
        auto gw = weight(grad, head);
        auto gb = bias(grad, head);
        gw.noalias() += delta * ws.post[head - 1].transpose();
        gb.noalias() += delta.rowwise().sum();
    }
    Eigen::MatrixXf d_a = weight(m_theta, head).transpose() * delta;

    for (int l = head - 1; l >= 0; --l) {
        // d/dz of leaky-ReLU, branching on the stored pre-activation sign.
        delta = d_a;
        {
            float *dp = delta.data();
            const float *zp = ws.pre[l].data();
            const Eigen::Index count = delta.size();
            for (Eigen::Index i = 0; i < count; ++i)
                if (zp[i] <= 0.0f)
                    dp[i] *= slope;
        }
        auto gw = weight(grad, l);
        auto gb = bias(grad, l);
        const Eigen::MatrixXf &below = l == 0 ? ws.input : ws.post[l - 1];
        gw.noalias() += delta * below.transpose();
        gb.noalias() += delta.rowwise().sum();
        if (l > 0 || d_x)
            d_a = weight(m_theta, l).transpose() * delta;
    }
    if (d_x)
        *d_x = d_a;
}

} // namespace nrrs
