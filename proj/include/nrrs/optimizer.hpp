#pragma once

#include "nrrs/core.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace nrrs {

/// Adam with bias correction over one flat parameter vector.
class Adam {
public:
    explicit Adam(float lr = 1e-3f, float beta1 = 0.9f, float beta2 = 0.999f,
                  float eps = 1e-8f)
        : m_lr(lr), m_beta1(beta1), m_beta2(beta2), m_eps(eps) {}

    void reset(int64_t size) {
        m_m = Eigen::VectorXf::Zero(size);
        m_v = Eigen::VectorXf::Zero(size);
        m_t = 0;
    }

    void step(Eigen::VectorXf &theta, const Eigen::VectorXf &grad) {
        if (m_m.size() != theta.size())
            reset(theta.size());
        ++m_t;
        m_m = m_beta1 * m_m + (1.0f - m_beta1) * grad;
        m_v = m_beta2 * m_v + (1.0f - m_beta2) * grad.cwiseProduct(grad);
        const float c1 = 1.0f / (1.0f - std::pow(m_beta1, static_cast<float>(m_t)));
        const float c2 = 1.0f / (1.0f - std::pow(m_beta2, static_cast<float>(m_t)));
        theta.array() -=
            m_lr * (m_m.array() * c1) / ((m_v.array() * c2).sqrt() + m_eps);
    }

    float learning_rate() const { return m_lr; }
    void set_learning_rate(float lr) { m_lr = lr; }
    int64_t steps() const { return m_t; }

    Eigen::VectorXf &moment1() { return m_m; }
    Eigen::VectorXf &moment2() { return m_v; }
    int64_t &step_counter() { return m_t; }

private:
    float m_lr, m_beta1, m_beta2, m_eps;
    Eigen::VectorXf m_m, m_v;
    int64_t m_t = 0;
};

/// Exponential moving average of parameters; the inference-side weights.
/// shadow = decay * shadow + (1 - decay) * theta, a convex combination of the
/// parameter history.
class EmaTracker {
public:
    explicit EmaTracker(float decay = 0.99f) : m_decay(decay) {}

    void reset(const Eigen::VectorXf &theta) { m_shadow = theta; }

    void update(const Eigen::VectorXf &theta) {
        if (m_shadow.size() != theta.size()) {
            m_shadow = theta;
            return;
        }
        m_shadow = m_decay * m_shadow + (1.0f - m_decay) * theta;
    }

    const Eigen::VectorXf &shadow() const { return m_shadow; }
    Eigen::VectorXf &shadow() { return m_shadow; }
    float decay() const { return m_decay; }

private:
    float m_decay;
    Eigen::VectorXf m_shadow;
};

} // namespace nrrs
