#include "nrrs/networks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace nrrs {

namespace {

constexpr char kCheckpointMagic[8] = {'N', 'R', 'R', 'S', 'C', 'K', '0', '1'};
constexpr uint32_t kCheckpointVersion = 1;
constexpr float kMinLossScale = 1.0f / 65536.0f;
constexpr uint32_t kScaleGrowthStreak = 256;

MlpSpec stat_mlp_spec(const NeuralRrsConfig &cfg) {
    MlpSpec m;
    m.in = cfg.grid.output_dim() + kStatTailDim;
    m.out = 6;
    return m;
}

HashGridSpec rrs_grid_spec(const NeuralRrsConfig &cfg) {
    if (cfg.variant == RrsVariant::Aid)
        return cfg.grid;
    HashGridSpec empty;
    empty.levels = 0;
    empty.features = 0;
    empty.base_resolution = 1;
    empty.log2_table_size = 0;
    return empty;
}

MlpSpec rrs_mlp_spec(const NeuralRrsConfig &cfg) {
    MlpSpec m;
    m.in = cfg.variant == RrsVariant::Nrrs ? kNrrsInputDim
                                           : cfg.grid.output_dim() + kAidTailDim;
    m.out = 1;
    return m;
}

uint64_t hash_pre_signs(const Mlp::Workspace &ws) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto &z : ws.pre)
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            h ^= (z.data()[i] > 0.0f) ? 0x9eu : 0x31u;
            h *= 0x100000001b3ull;
        }
    return h;
}

float min_pre_magnitude(const Mlp::Workspace &ws) {
    float m = std::numeric_limits<float>::infinity();
    for (const auto &z : ws.pre)
        for (Eigen::Index i = 0; i < z.size(); ++i)
            m = std::min(m, std::abs(z.data()[i]));
    return m;
}

void positions_of(std::span<const TrainSample> batch, Eigen::Matrix3Xf &pts) {
    pts.resize(3, static_cast<Eigen::Index>(batch.size()));
    for (size_t i = 0; i < batch.size(); ++i)
        pts.col(static_cast<Eigen::Index>(i)) = batch[i].position;
}

void write_bytes(std::ofstream &os, const void *p, size_t n) {
    os.write(static_cast<const char *>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream &is, void *p, size_t n) {
    is.read(static_cast<char *>(p), static_cast<std::streamsize>(n));
    if (!is)
        throw std::runtime_error("checkpoint: truncated file");
}

void write_vec(std::ofstream &os, const Eigen::VectorXf &v) {
    const uint64_t n = static_cast<uint64_t>(v.size());
    write_bytes(os, &n, sizeof(n));
    if (n)
        write_bytes(os, v.data(), n * sizeof(float));
}

void read_vec_into(std::ifstream &is, Eigen::VectorXf &v, int64_t expected) {
    uint64_t n = 0;
    read_bytes(is, &n, sizeof(n));
    if (static_cast<int64_t>(n) != expected)
        throw std::runtime_error("checkpoint: parameter block size mismatch");
    v.resize(static_cast<Eigen::Index>(n));
    if (n)
        read_bytes(is, v.data(), n * sizeof(float));
}

template <typename T>
void write_pod(std::ofstream &os, const T &v) {
    write_bytes(os, &v, sizeof(T));
}

template <typename T>
T read_pod(std::ifstream &is) {
    T v{};
    read_bytes(is, &v, sizeof(T));
    return v;
}

}  // namespace

RelL2 relative_l2(float pred, float target, float eps) {
    const float d = pred - target;
    const float inv = 1.0f / (target * target + eps);
    return RelL2{d * d * inv, 2.0f * d * inv};
}

float grad_pixelvar_wrt_rr(const Vec3f &weight, const Vec3f &h_sample, float p_rr) {
    if (!(p_rr > 0.0f))
        throw std::invalid_argument("grad_pixelvar_wrt_rr: p_rr must be positive");
    const float w = luminance(weight);
    const float h = luminance(h_sample);
    return -(w * w) * (h * h) / (p_rr * p_rr);
}

float grad_pixelvar_wrt_split(const Vec3f &weight, float h_variance_lum, float n_s) {
    if (!(n_s > 0.0f))
        throw std::invalid_argument("grad_pixelvar_wrt_split: n_s must be positive");
    const float w = luminance(weight);
    return -(w * w) * h_variance_lum / (n_s * n_s);
}

void build_stat_tail(const Vec2f &wo01, float roughness, float *out) {
    one_blob_encode(wo01.x(), 4, out);
    one_blob_encode(wo01.y(), 4, out + 4);
    one_blob_encode(roughness_remap(roughness), 8, out + 8);
}

void build_nrrs_input(const RadianceStats &stats, const Vec3f &t_x, const Vec3f &i_pixel,
                      float roughness, float *out) {
    for (int c = 0; c < 3; ++c)
        out[c] = box_cox(stats.mean[c]);
    for (int c = 0; c < 3; ++c)
        out[3 + c] = box_cox(stats.second_moment[c]);
    for (int c = 0; c < 3; ++c)
        out[6 + c] = box_cox(t_x[c]);
    out[9] = box_cox(i_pixel.mean());
    out[10] = roughness_remap(roughness);
}

void build_aid_tail(const Vec2f &wo01, const Vec3f &t_x, const Vec3f &i_pixel,
                    float roughness, float *out) {
    one_blob_encode(wo01.x(), 4, out);
    one_blob_encode(wo01.y(), 4, out + 4);
    for (int c = 0; c < 3; ++c)
        out[8 + c] = box_cox(t_x[c]);
    out[11] = box_cox(i_pixel.mean());
    one_blob_encode(roughness_remap(roughness), 4, out + 12);
}

NeuralRrs::NeuralRrs(const NeuralRrsConfig &cfg)
    : m_cfg(cfg),
      m_stat_grid(cfg.grid),
      m_stat_mlp(stat_mlp_spec(cfg)),
      m_rrs_grid(rrs_grid_spec(cfg)),
      m_rrs_mlp(rrs_mlp_spec(cfg)),
      m_adam_stat_grid(cfg.lr_stat),
      m_adam_stat_mlp(cfg.lr_stat),
      m_adam_rrs_grid(cfg.lr_rrs),
      m_adam_rrs_mlp(cfg.lr_rrs),
      m_ema_stat_grid(cfg.ema_decay),
      m_ema_stat_mlp(cfg.ema_decay),
      m_ema_rrs_grid(cfg.ema_decay),
      m_ema_rrs_mlp(cfg.ema_decay),
      m_snap_stat_grid(cfg.grid),
      m_snap_stat_mlp(stat_mlp_spec(cfg)),
      m_snap_rrs_grid(rrs_grid_spec(cfg)),
      m_snap_rrs_mlp(rrs_mlp_spec(cfg)) {
    RngStream r_stat_grid(cfg.seed, 0);
    RngStream r_stat_mlp(cfg.seed, 1);
    RngStream r_rrs_grid(cfg.seed, 2);
    RngStream r_rrs_mlp(cfg.seed, 3);
    m_stat_grid.init(r_stat_grid);
    m_stat_mlp.init(r_stat_mlp);
    m_rrs_grid.init(r_rrs_grid);
    m_rrs_mlp.init(r_rrs_mlp);

    // A fresh factor net is the constant 1: the head weights are zero, so
    // only the bias feeds the activation.
    Eigen::VectorXf bias(1);
    bias[0] = softplus_mod_inverse_pos(1.0f);
    m_rrs_mlp.set_head_bias(bias);

    m_ema_stat_grid.reset(m_stat_grid.theta());
    m_ema_stat_mlp.reset(m_stat_mlp.theta());
    m_ema_rrs_grid.reset(m_rrs_grid.theta());
    m_ema_rrs_mlp.reset(m_rrs_mlp.theta());
    publish();
}

void NeuralRrs::publish() {
    m_snap_stat_grid.theta() = m_ema_stat_grid.shadow();
    m_snap_stat_mlp.theta() = m_ema_stat_mlp.shadow();
    m_snap_rrs_grid.theta() = m_ema_rrs_grid.shadow();
    m_snap_rrs_mlp.theta() = m_ema_rrs_mlp.shadow();
}

void NeuralRrs::encode_stat_inputs(std::span<const TrainSample> batch, Eigen::MatrixXf &x,
                                   HashGrid::Workspace *ws, const HashGrid &grid) const {
    const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
    const int gd = grid.spec().output_dim();
    x.resize(gd + kStatTailDim, n);
    Eigen::Matrix3Xf pts;
    positions_of(batch, pts);
    grid.encode(pts, x.topRows(gd), ws);
    for (Eigen::Index i = 0; i < n; ++i)
        build_stat_tail(batch[static_cast<size_t>(i)].omega_o,
                        batch[static_cast<size_t>(i)].roughness, x.col(i).data() + gd);
}

void NeuralRrs::snapshot_stats_batch(std::span<const TrainSample> batch,
                                     Eigen::MatrixXf &y) const {
    Eigen::MatrixXf x;
    encode_stat_inputs(batch, x, nullptr, m_snap_stat_grid);
    m_snap_stat_mlp.forward(x, y);
}

void NeuralRrs::encode_rrs_inputs(std::span<const TrainSample> batch,
                                  const Eigen::MatrixXf &snap_stats, Eigen::MatrixXf &x,
                                  HashGrid::Workspace *ws, const HashGrid &grid) const {
    const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
    if (m_cfg.variant == RrsVariant::Nrrs) {
        x.resize(kNrrsInputDim, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const TrainSample &s = batch[static_cast<size_t>(i)];
            RadianceStats st;
            st.mean = snap_stats.col(i).head<3>();
            st.second_moment = snap_stats.col(i).segment<3>(3);
            build_nrrs_input(st, s.t_x, s.i_pixel, s.roughness, x.col(i).data());
        }
        return;
    }
    const int gd = grid.spec().output_dim();
    x.resize(gd + kAidTailDim, n);
    Eigen::Matrix3Xf pts;
    positions_of(batch, pts);
    grid.encode(pts, x.topRows(gd), ws);
    for (Eigen::Index i = 0; i < n; ++i) {
        const TrainSample &s = batch[static_cast<size_t>(i)];
        build_aid_tail(s.omega_o, s.t_x, s.i_pixel, s.roughness, x.col(i).data() + gd);
    }
}

RadianceStats NeuralRrs::predict_stats(const Vec3f &p01, const Vec2f &wo01,
                                       float roughness) const {
    TrainSample s;
    s.position = p01;
    s.omega_o = wo01;
    s.roughness = roughness;
    Eigen::MatrixXf y;
    snapshot_stats_batch(std::span<const TrainSample>(&s, 1), y);
    RadianceStats st;
    st.mean = y.col(0).head<3>();
    st.second_moment = y.col(0).segment<3>(3);
    return st;
}

float NeuralRrs::predict_q(const Vec3f &p01, const Vec2f &wo01, float roughness,
                           const Vec3f &t_x, const Vec3f &i_pixel) const {
    TrainSample s;
    s.position = p01;
    s.omega_o = wo01;
    s.roughness = roughness;
    s.t_x = t_x;
    s.i_pixel = i_pixel;
    const std::span<const TrainSample> one(&s, 1);
    Eigen::MatrixXf stats;
    snapshot_stats_batch(one, stats);
    Eigen::MatrixXf x, y;
    encode_rrs_inputs(one, stats, x, nullptr, m_snap_rrs_grid);
    m_snap_rrs_mlp.forward(x, y);
    return softplus_mod(y(0, 0));
}

float NeuralRrs::debug_q_live(const TrainSample &s) const {
    const std::span<const TrainSample> one(&s, 1);
    Eigen::MatrixXf stats;
    snapshot_stats_batch(one, stats);
    Eigen::MatrixXf x, y;
    encode_rrs_inputs(one, stats, x, nullptr, m_rrs_grid);
    m_rrs_mlp.forward(x, y);
    return softplus_mod(y(0, 0));
}

float NeuralRrs::debug_q_backward(const TrainSample &s, Eigen::VectorXf &g_mlp,
                                  Eigen::VectorXf &g_grid, float *min_abs_pre) const {
    const std::span<const TrainSample> one(&s, 1);
    Eigen::MatrixXf stats;
    snapshot_stats_batch(one, stats);
    Eigen::MatrixXf x, y;
    HashGrid::Workspace gws;
    encode_rrs_inputs(one, stats, x, &gws, m_rrs_grid);
    Mlp::Workspace ws;
    m_rrs_mlp.forward(x, y, &ws);
    const float z = y(0, 0);
    if (min_abs_pre)
        *min_abs_pre = min_pre_magnitude(ws);

    g_mlp = Eigen::VectorXf::Zero(m_rrs_mlp.param_count());
    g_grid = Eigen::VectorXf::Zero(m_rrs_grid.param_count());
    Eigen::MatrixXf d_y(1, 1);
    d_y(0, 0) = softplus_mod_grad(z);
    Eigen::MatrixXf d_x;
    m_rrs_mlp.backward(ws, d_y, g_mlp, &d_x);
    if (m_cfg.variant == RrsVariant::Aid && m_rrs_grid.param_count() > 0)
        m_rrs_grid.encode_backward(gws, d_x.topRows(m_rrs_grid.spec().output_dim()), g_grid);
    return softplus_mod(z);
}

uint64_t NeuralRrs::debug_stat_signs(std::span<const TrainSample> batch) const {
    Eigen::MatrixXf x, y;
    encode_stat_inputs(batch, x, nullptr, m_stat_grid);
    Mlp::Workspace ws;
    m_stat_mlp.forward(x, y, &ws);
    return hash_pre_signs(ws);
}

uint64_t NeuralRrs::debug_rrs_signs(std::span<const TrainSample> batch) const {
    Eigen::MatrixXf stats;
    snapshot_stats_batch(batch, stats);
    Eigen::MatrixXf x, y;
    encode_rrs_inputs(batch, stats, x, nullptr, m_rrs_grid);
    Mlp::Workspace ws;
    m_rrs_mlp.forward(x, y, &ws);
    return hash_pre_signs(ws);
}

// Shared statistics loss: relative L2 of both heads against the one-sample
// radiance targets, averaged over the batch. d_scale multiplies the output
// gradient (loss scaling); gradients are computed only when grads != null.
double NeuralRrs::debug_stat_loss(std::span<const TrainSample> batch) const {
    return stat_loss_impl(batch, 0.0f, nullptr, nullptr);
}

double NeuralRrs::debug_stat_loss_backward(std::span<const TrainSample> batch,
                                           Eigen::VectorXf &g_mlp,
                                           Eigen::VectorXf &g_grid) const {
    return stat_loss_impl(batch, 1.0f, &g_mlp, &g_grid);
}

double NeuralRrs::stat_loss_impl(std::span<const TrainSample> batch, float d_scale,
                                 Eigen::VectorXf *g_mlp, Eigen::VectorXf *g_grid) const {
    const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) {
        if (g_mlp)
            *g_mlp = Eigen::VectorXf::Zero(m_stat_mlp.param_count());
        if (g_grid)
            *g_grid = Eigen::VectorXf::Zero(m_stat_grid.param_count());
        return 0.0;
    }

    Eigen::MatrixXf x, y;
    HashGrid::Workspace gws;
    encode_stat_inputs(batch, x, g_mlp ? &gws : nullptr, m_stat_grid);
    Mlp::Workspace ws;
    m_stat_mlp.forward(x, y, g_mlp ? &ws : nullptr);

    Eigen::MatrixXf d_y;
    if (g_mlp)
        d_y.setZero(6, n);
    const float inv_n = 1.0f / static_cast<float>(n);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3f &lo = batch[static_cast<size_t>(i)].lo_sample;
        for (int c = 0; c < 3; ++c) {
            const RelL2 rm = relative_l2(y(c, i), lo[c], m_cfg.eps);
            const RelL2 r2 = relative_l2(y(3 + c, i), lo[c] * lo[c], m_cfg.eps);
            loss += static_cast<double>(rm.value) + static_cast<double>(r2.value);
            if (g_mlp) {
                d_y(c, i) = rm.d_pred * inv_n * d_scale;
                d_y(3 + c, i) = r2.d_pred * inv_n * d_scale;
            }
        }
    }
    loss *= inv_n;

    if (g_mlp) {
        *g_mlp = Eigen::VectorXf::Zero(m_stat_mlp.param_count());
        *g_grid = Eigen::VectorXf::Zero(m_stat_grid.param_count());
        Eigen::MatrixXf d_x;
        m_stat_mlp.backward(ws, d_y, *g_mlp, &d_x);
        m_stat_grid.encode_backward(gws, d_x.topRows(m_stat_grid.spec().output_dim()),
                                    *g_grid);
    }
    return loss;
}

double NeuralRrs::debug_rrs_loss(std::span<const TrainSample> batch,
                                 std::span<const PixelError> errors, float e_avg,
                                 TrainPhase phase) const {
    RrsLossParts parts;
    rrs_loss_impl(batch, errors, e_avg, phase, 0.0f, nullptr, nullptr, &parts, nullptr);
    return parts.total_value;
}

double NeuralRrs::debug_rrs_loss_backward(std::span<const TrainSample> batch,
                                          std::span<const PixelError> errors, float e_avg,
                                          TrainPhase phase, Eigen::VectorXf &g_mlp,
                                          Eigen::VectorXf &g_grid) const {
    RrsLossParts parts;
    rrs_loss_impl(batch, errors, e_avg, phase, 1.0f, &g_mlp, &g_grid, &parts, nullptr);
    return parts.total_value;
}

// Factor loss over one batch. Warmup regresses the factor to 1 with relative
// L2; the full phase combines the two variance-derived error terms (via the
// transfer gradients, which have no matching scalar objective) with the
// recorded-factor regression. Loss parts are reported unweighted; the
// gradient carries the gamma weights.
void NeuralRrs::rrs_loss_impl(std::span<const TrainSample> batch,
                              std::span<const PixelError> errors, float e_avg,
                              TrainPhase phase, float d_scale, Eigen::VectorXf *g_mlp,
                              Eigen::VectorXf *g_grid, RrsLossParts *parts,
                              uint32_t *skipped_samples) const {
    const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
    if (g_mlp) {
        *g_mlp = Eigen::VectorXf::Zero(m_rrs_mlp.param_count());
        *g_grid = Eigen::VectorXf::Zero(m_rrs_grid.param_count());
    }
    if (n == 0)
        return;

    Eigen::MatrixXf stats;
    snapshot_stats_batch(batch, stats);
    Eigen::MatrixXf x, y;
    HashGrid::Workspace gws;
    encode_rrs_inputs(batch, stats, x, g_mlp ? &gws : nullptr, m_rrs_grid);
    Mlp::Workspace ws;
    m_rrs_mlp.forward(x, y, g_mlp ? &ws : nullptr);

    Eigen::MatrixXf d_y;
    if (g_mlp)
        d_y.setZero(1, n);
    const float inv_n = 1.0f / static_cast<float>(n);

    for (Eigen::Index i = 0; i < n; ++i) {
        const TrainSample &s = batch[static_cast<size_t>(i)];
        const float z = y(0, i);
        const float q = softplus_mod(z);
        float d_q = 0.0f;

        if (phase == TrainPhase::Warmup) {
            const RelL2 r = relative_l2(q, 1.0f, m_cfg.eps);
            parts->rrs += r.value;
            d_q = r.d_pred * inv_n;
        } else {
            // Variance-derived terms need the pixel's error record.
            const size_t px = s.pixel;
            const float inv_k = s.k_i > 0.0f ? 1.0f / s.k_i : 1.0f;
            if (px < errors.size()) {
                const PixelError &pe = errors[px];
                float gvar = 0.0f;
                if (s.q_real < 1.0f) {
                    // Roulette regime. Factors realized as 0 terminate the
                    // path outright; the factor cannot influence them.
                    if (s.q_real > 0.0f)
                        gvar = grad_pixelvar_wrt_rr(s.t_x, s.lo_sample, s.q_real);
                } else {
                    RadianceStats st;
                    st.mean = stats.col(i).head<3>();
                    st.second_moment = stats.col(i).segment<3>(3);
                    gvar = grad_pixelvar_wrt_split(s.t_x, st.variance_lum(), s.q_real);
                }
                const float de_dq = pe.inv_denom * gvar * inv_k;
                parts->min += pe.e * inv_k;
                const float dev = pe.e - e_avg;
                parts->avg += dev * dev * inv_k;
                d_q += (m_cfg.gamma_min * de_dq +
                        m_cfg.gamma_avg * 2.0f * dev * de_dq) * inv_n;
            } else if (skipped_samples) {
                ++*skipped_samples;
            }
            const float dq_gap = q - s.q_norm;
            parts->rrs += dq_gap * dq_gap;
            d_q += m_cfg.gamma_rrs * 2.0f * dq_gap * inv_n;
        }
        if (g_mlp)
            d_y(0, i) = d_q * softplus_mod_grad(z) * d_scale;
    }
    parts->min *= inv_n;
    parts->avg *= inv_n;
    parts->rrs *= inv_n;
    parts->total_value = phase == TrainPhase::Warmup
                             ? parts->rrs
                             : m_cfg.gamma_min * parts->min + m_cfg.gamma_avg * parts->avg +
                                   m_cfg.gamma_rrs * parts->rrs;

    if (g_mlp) {
        Eigen::MatrixXf d_x;
        m_rrs_mlp.backward(ws, d_y, *g_mlp, &d_x);
        if (m_cfg.variant == RrsVariant::Aid && m_rrs_grid.param_count() > 0)
            m_rrs_grid.encode_backward(gws, d_x.topRows(m_rrs_grid.spec().output_dim()),
                                       *g_grid);
    }
}

bool NeuralRrs::apply_step(Adam &adam_grid, Adam &adam_mlp, HashGrid *grid, Mlp &mlp,
                           Eigen::VectorXf &grad_grid, Eigen::VectorXf &grad_mlp,
                           EmaTracker &ema_grid, EmaTracker &ema_mlp, float &scale,
                           uint32_t &good_streak, TrainFrameStats &out) {
    const bool finite = grad_mlp.allFinite() && grad_grid.allFinite();
    if (!finite) {
        scale = std::max(scale * 0.5f, kMinLossScale);
        good_streak = 0;
        ++out.skipped_steps;
        return false;
    }
    const float inv_scale = 1.0f / scale;
    grad_mlp *= inv_scale;
    adam_mlp.step(mlp.theta(), grad_mlp);
    ema_mlp.update(mlp.theta());
    if (grid && grid->param_count() > 0) {
        grad_grid *= inv_scale;
        adam_grid.step(grid->theta(), grad_grid);
        ema_grid.update(grid->theta());
    }
    if (++good_streak >= kScaleGrowthStreak) {
        scale = std::min(scale * 2.0f, 1.0f);
        good_streak = 0;
    }
    return true;
}

void NeuralRrs::step_statnet(std::span<const TrainSample> batch, TrainFrameStats &out) {
    if (batch.empty())
        return;
    Eigen::VectorXf g_mlp, g_grid;
    const double loss = stat_loss_impl(batch, m_scale_stat, &g_mlp, &g_grid);
    const bool loss_ok = std::isfinite(loss);
    if (loss_ok &&
        apply_step(m_adam_stat_grid, m_adam_stat_mlp, &m_stat_grid, m_stat_mlp, g_grid,
                   g_mlp, m_ema_stat_grid, m_ema_stat_mlp, m_scale_stat, m_streak_stat,
                   out)) {
        ++m_stat_steps;
        out.loss_stat += loss;
    } else if (!loss_ok) {
        m_scale_stat = std::max(m_scale_stat * 0.5f, kMinLossScale);
        m_streak_stat = 0;
        ++out.skipped_steps;
    }
    out.statnet_steps = m_stat_steps;
    out.loss_scale_stat = m_scale_stat;
}

void NeuralRrs::step_rrsnet(std::span<const TrainSample> batch,
                            std::span<const PixelError> errors, float e_avg,
                            TrainPhase phase, TrainFrameStats &out) {
    if (batch.empty())
        return;
    Eigen::VectorXf g_mlp, g_grid;
    RrsLossParts parts;
    rrs_loss_impl(batch, errors, e_avg, phase, m_scale_rrs, &g_mlp, &g_grid, &parts,
                  &out.skipped_samples);
    const bool loss_ok = std::isfinite(parts.total_value);
    if (loss_ok &&
        apply_step(m_adam_rrs_grid, m_adam_rrs_mlp, &m_rrs_grid, m_rrs_mlp, g_grid, g_mlp,
                   m_ema_rrs_grid, m_ema_rrs_mlp, m_scale_rrs, m_streak_rrs, out)) {
        ++m_rrs_steps;
        out.loss_min += parts.min;
        out.loss_avg += parts.avg;
        out.loss_rrs += parts.rrs;
    } else if (!loss_ok) {
        m_scale_rrs = std::max(m_scale_rrs * 0.5f, kMinLossScale);
        m_streak_rrs = 0;
        ++out.skipped_steps;
    }
    out.rrsnet_steps = m_rrs_steps;
    out.loss_scale_rrs = m_scale_rrs;
}

TrainFrameStats NeuralRrs::train_frame(std::span<const TrainSample> samples,
                                       std::span<const PixelError> errors, float e_avg,
                                       TrainPhase phase) {
    TrainFrameStats out;
    if (samples.empty())
        return out;
    const size_t chunk_size = static_cast<size_t>(std::max(m_cfg.batch, 1));
    size_t chunks = 0;
    for (size_t off = 0; off < samples.size(); off += chunk_size) {
        const size_t len = std::min(chunk_size, samples.size() - off);
        const auto chunk = samples.subspan(off, len);
        step_statnet(chunk, out);
        step_rrsnet(chunk, errors, e_avg, phase, out);
        ++chunks;
    }
    const double inv = 1.0 / static_cast<double>(chunks);
    out.loss_stat *= inv;
    out.loss_min *= inv;
    out.loss_avg *= inv;
    out.loss_rrs *= inv;

    CurveRow row;
    row.step = static_cast<uint64_t>(m_curve.size()) + 1;
    row.l_stat = static_cast<float>(out.loss_stat);
    row.l_min = static_cast<float>(out.loss_min);
    row.l_avg = static_cast<float>(out.loss_avg);
    row.l_rrs = static_cast<float>(out.loss_rrs);
    m_curve.push_back(row);
    return out;
}

void NeuralRrs::save_checkpoint(const std::string &path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    write_bytes(os, kCheckpointMagic, sizeof(kCheckpointMagic));
    write_pod(os, kCheckpointVersion);
    write_pod(os, static_cast<uint32_t>(m_cfg.variant));
    write_pod(os, static_cast<int32_t>(m_cfg.grid.levels));
    write_pod(os, static_cast<int32_t>(m_cfg.grid.features));
    write_pod(os, static_cast<int32_t>(m_cfg.grid.base_resolution));
    write_pod(os, static_cast<int32_t>(m_cfg.grid.log2_table_size));
    write_pod(os, static_cast<int32_t>(stat_input_dim()));
    write_pod(os, static_cast<int32_t>(rrs_input_dim()));

    write_vec(os, m_stat_grid.theta());
    write_vec(os, m_stat_mlp.theta());
    write_vec(os, m_rrs_grid.theta());
    write_vec(os, m_rrs_mlp.theta());
    write_vec(os, m_ema_stat_grid.shadow());
    write_vec(os, m_ema_stat_mlp.shadow());
    write_vec(os, m_ema_rrs_grid.shadow());
    write_vec(os, m_ema_rrs_mlp.shadow());
    write_vec(os, m_snap_stat_grid.theta());
    write_vec(os, m_snap_stat_mlp.theta());
    write_vec(os, m_snap_rrs_grid.theta());
    write_vec(os, m_snap_rrs_mlp.theta());

    const Adam *adams[4] = {&m_adam_stat_grid, &m_adam_stat_mlp, &m_adam_rrs_grid,
                            &m_adam_rrs_mlp};
    for (const Adam *a : adams) {
        write_vec(os, const_cast<Adam *>(a)->moment1());
        write_vec(os, const_cast<Adam *>(a)->moment2());
        write_pod(os, static_cast<int64_t>(const_cast<Adam *>(a)->step_counter()));
    }
    write_pod(os, m_scale_stat);
    write_pod(os, m_scale_rrs);
    write_pod(os, m_streak_stat);
    write_pod(os, m_streak_rrs);
    write_pod(os, m_stat_steps);
    write_pod(os, m_rrs_steps);
    if (!os)
        throw std::runtime_error("checkpoint: write failed: " + path);
}

void NeuralRrs::load_checkpoint(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("checkpoint: cannot open for reading: " + path);
    char magic[8];
    read_bytes(is, magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    if (read_pod<uint32_t>(is) != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version");
    if (read_pod<uint32_t>(is) != static_cast<uint32_t>(m_cfg.variant))
        throw std::runtime_error("checkpoint: variant mismatch");
    const int32_t spec_fields[4] = {
        static_cast<int32_t>(m_cfg.grid.levels), static_cast<int32_t>(m_cfg.grid.features),
        static_cast<int32_t>(m_cfg.grid.base_resolution),
        static_cast<int32_t>(m_cfg.grid.log2_table_size)};
    for (int32_t expected : spec_fields)
        if (read_pod<int32_t>(is) != expected)
            throw std::runtime_error("checkpoint: grid spec mismatch");
    if (read_pod<int32_t>(is) != static_cast<int32_t>(stat_input_dim()) ||
        read_pod<int32_t>(is) != static_cast<int32_t>(rrs_input_dim()))
        throw std::runtime_error("checkpoint: input layout mismatch");

    read_vec_into(is, m_stat_grid.theta(), m_stat_grid.param_count());
    read_vec_into(is, m_stat_mlp.theta(), m_stat_mlp.param_count());
    read_vec_into(is, m_rrs_grid.theta(), m_rrs_grid.param_count());
    read_vec_into(is, m_rrs_mlp.theta(), m_rrs_mlp.param_count());
    read_vec_into(is, m_ema_stat_grid.shadow(), m_stat_grid.param_count());
    read_vec_into(is, m_ema_stat_mlp.shadow(), m_stat_mlp.param_count());
    read_vec_into(is, m_ema_rrs_grid.shadow(), m_rrs_grid.param_count());
    read_vec_into(is, m_ema_rrs_mlp.shadow(), m_rrs_mlp.param_count());
    read_vec_into(is, m_snap_stat_grid.theta(), m_stat_grid.param_count());
    read_vec_into(is, m_snap_stat_mlp.theta(), m_stat_mlp.param_count());
    read_vec_into(is, m_snap_rrs_grid.theta(), m_rrs_grid.param_count());
    read_vec_into(is, m_snap_rrs_mlp.theta(), m_rrs_mlp.param_count());

    Adam *adams[4] = {&m_adam_stat_grid, &m_adam_stat_mlp, &m_adam_rrs_grid,
                      &m_adam_rrs_mlp};
    const int64_t sizes[4] = {m_stat_grid.param_count(), m_stat_mlp.param_count(),
                              m_rrs_grid.param_count(), m_rrs_mlp.param_count()};
    for (int a = 0; a < 4; ++a) {
        read_vec_into(is, adams[a]->moment1(), sizes[a]);
        read_vec_into(is, adams[a]->moment2(), sizes[a]);
        adams[a]->step_counter() = read_pod<int64_t>(is);
    }
    m_scale_stat = read_pod<float>(is);
    m_scale_rrs = read_pod<float>(is);
    m_streak_stat = read_pod<uint32_t>(is);
    m_streak_rrs = read_pod<uint32_t>(is);
    m_stat_steps = read_pod<uint64_t>(is);
    m_rrs_steps = read_pod<uint64_t>(is);
}

}  // namespace nrrs
