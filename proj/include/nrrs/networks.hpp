#pragma once

#include "nrrs/core.hpp"
#include "nrrs/encodings.hpp"
#include "nrrs/hashgrid.hpp"
#include "nrrs/mlp.hpp"
#include "nrrs/optimizer.hpp"
#include "nrrs/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nrrs {

/// One path vertex recorded during tracing for online training.
struct TrainSample {
    Vec3f position = Vec3f::Zero();   // scene-normalized, in [0,1]^3
    Vec2f omega_o = Vec2f::Zero();    // spherical coordinates scaled to [0,1]^2
    float roughness = 0.0f;           // raw microfacet alpha at the vertex
    Vec3f t_x = Vec3f::Zero();        // path weight w = g/p carried into the vertex
    Vec3f i_pixel = Vec3f::Zero();    // accumulated estimate of the vertex's pixel
    Vec3f lo_sample = Vec3f::Zero();  // one-sample local radiance estimate
    float q_norm = 1.0f;              // factor after normalization
    float q_real = 1.0f;              // factor actually used for stochastic rounding
    uint32_t pixel = 0;
    float k_i = 1.0f;                 // training samples landing in this pixel
    uint16_t depth = 1;
};

/// Relative squared error (a - b)^2 / (b^2 + eps). The denominator is treated
/// as a constant: d_pred is the only gradient path, the target contributes none.
struct RelL2 {
    float value = 0.0f;
    float d_pred = 0.0f;
};
RelL2 relative_l2(float pred, float target, float eps = 0.01f);

/// One-sample estimate of d Var<I> / d p_rr for a Russian-roulette vertex:
/// -lum(weight)^2 * lum(h_sample)^2 / p_rr^2. Throws if p_rr <= 0.
float grad_pixelvar_wrt_rr(const Vec3f &weight, const Vec3f &h_sample, float p_rr);

/// Splitting counterpart using a cached variance of the local estimate:
/// -lum(weight)^2 * h_variance_lum / n_s^2. Stochastic-rounding variance is
/// ignored. Throws if n_s <= 0.
float grad_pixelvar_wrt_split(const Vec3f &weight, float h_variance_lum, float n_s);

/// Radiance statistics head: per-channel mean and raw second moment.
struct RadianceStats {
    Vec3f mean = Vec3f::Zero();
    Vec3f second_moment = Vec3f::Zero();

    Vec3f variance() const {
        return (second_moment - mean.cwiseProduct(mean)).cwiseMax(0.0f);
    }
    float variance_lum() const { return luminance(variance()); }
};

// Fixed (non-trainable) input encodings. Layout is load-bearing for
// checkpoints, so the builders are free functions with pinned dimensions.

/// StatNet tail after the position grid: one-blob(4) per spherical coordinate
/// of omega_o, then one-blob(8) of the remapped roughness.
inline constexpr int kStatTailDim = 16;
void build_stat_tail(const Vec2f &wo01, float roughness, float *out);

/// NRRS-variant RRSNet input: Box-Cox(0.5) of stat mean (3), stat second
/// moment (3), t_x (3), channel mean of i_pixel (1), then remapped roughness.
inline constexpr int kNrrsInputDim = 11;
void build_nrrs_input(const RadianceStats &stats, const Vec3f &t_x, const Vec3f &i_pixel,
                      float roughness, float *out);

/// AID-variant RRSNet tail after its own position grid: one-blob(4) per
/// spherical coordinate (8), Box-Cox t_x (3), Box-Cox channel mean of
/// i_pixel (1), one-blob(4) of remapped roughness (4).
inline constexpr int kAidTailDim = 16;
void build_aid_tail(const Vec2f &wo01, const Vec3f &t_x, const Vec3f &i_pixel,
                    float roughness, float *out);

enum class RrsVariant { Nrrs, Aid };
enum class TrainPhase { Warmup, Full };

/// Per-pixel error signal for the full-phase loss. e is the (optionally
/// filtered) relative variance E_i; inv_denom = 1 / (lum(i_acc)^2 + eps) is
/// d E_i / d Var needed to push gradients back through the error.
struct PixelError {
    float e = 0.0f;
    float inv_denom = 0.0f;
};

struct NeuralRrsConfig {
    RrsVariant variant = RrsVariant::Nrrs;
    HashGridSpec grid;  // StatNet position grid; the AID RRSNet clones the spec
    float lr_stat = 0.005f;
    float lr_rrs = 0.0003f;
    int batch = 1 << 16;
    float ema_decay = 0.99f;
    float gamma_avg = 0.01f;
    float gamma_min = 0.05f;
    float gamma_rrs = 0.01f;
    float eps = 0.01f;  // shared by relative L2 and the error denominators
    uint64_t seed = 0x9e3779b97f4a7c15ull;
};

/// Aggregated result of one train_frame call. Losses are batch means.
struct TrainFrameStats {
    uint64_t statnet_steps = 0;  // optimizer step counters after the frame
    uint64_t rrsnet_steps = 0;
    double loss_stat = 0.0;
    double loss_min = 0.0;
    double loss_avg = 0.0;
    double loss_rrs = 0.0;
    uint32_t skipped_steps = 0;    // optimizer steps dropped on non-finite gradients
    uint32_t skipped_samples = 0;  // samples without a usable pixel error
    float loss_scale_stat = 1.0f;
    float loss_scale_rrs = 1.0f;
};

/// StatNet plus RRSNet (either variant) with their optimizers, EMA shadows,
/// and published inference snapshots. Training mutates the live weights; all
/// predict_* methods read only the snapshot, so they stay const and safe to
/// call from worker threads while a frame is traced.
class NeuralRrs {
public:
    explicit NeuralRrs(const NeuralRrsConfig &cfg = {});

    const NeuralRrsConfig &config() const { return m_cfg; }

    // Inference on the published EMA snapshot.
    RadianceStats predict_stats(const Vec3f &p01, const Vec2f &wo01, float roughness) const;
    float predict_q(const Vec3f &p01, const Vec2f &wo01, float roughness, const Vec3f &t_x,
                    const Vec3f &i_pixel) const;

    /// Runs one optimizer step per batch-sized chunk of samples: StatNet on
    /// its radiance targets in both phases, RRSNet on the 1.0 regression
    /// (warmup) or the three-part loss (full). errors is indexed by pixel id
    /// and may be empty in warmup. Appends one training-curve row.
    TrainFrameStats train_frame(std::span<const TrainSample> samples,
                                std::span<const PixelError> errors, float e_avg,
                                TrainPhase phase);

    /// Copies the EMA shadows into the inference snapshot. Call between
    /// frames; the constructor publishes the initial weights.
    void publish();

    // Single optimizer steps, used by train_frame and exercised directly by
    // tests (e.g. to show RRSNet gradients never reach StatNet).
    void step_statnet(std::span<const TrainSample> batch, TrainFrameStats &out);
    void step_rrsnet(std::span<const TrainSample> batch, std::span<const PixelError> errors,
                     float e_avg, TrainPhase phase, TrainFrameStats &out);

    struct CurveRow {
        uint64_t step = 0;
        float l_stat = 0.0f;
        float l_min = 0.0f;
        float l_avg = 0.0f;
        float l_rrs = 0.0f;
    };
    const std::vector<CurveRow> &curve() const { return m_curve; }

    // Versioned binary checkpoint of weights, EMA shadows, and optimizer
    // state. Layout documented in the README. Throws on mismatch.
    void save_checkpoint(const std::string &path) const;
    void load_checkpoint(const std::string &path);

    // Introspection for tests and tools. "Live" means the training weights.
    const HashGrid &stat_grid() const { return m_stat_grid; }
    const Mlp &stat_mlp() const { return m_stat_mlp; }
    const HashGrid &rrs_grid() const { return m_rrs_grid; }
    const Mlp &rrs_mlp() const { return m_rrs_mlp; }
    HashGrid &stat_grid_mutable() { return m_stat_grid; }
    Mlp &stat_mlp_mutable() { return m_stat_mlp; }
    HashGrid &rrs_grid_mutable() { return m_rrs_grid; }
    Mlp &rrs_mlp_mutable() { return m_rrs_mlp; }
    float loss_scale_stat() const { return m_scale_stat; }
    float loss_scale_rrs() const { return m_scale_rrs; }
    uint64_t statnet_steps() const { return m_stat_steps; }
    uint64_t rrsnet_steps() const { return m_rrs_steps; }

    /// RRSNet factor evaluated with the live training weights (tests only;
    /// rendering always goes through predict_q).
    float debug_q_live(const TrainSample &s) const;

    // Test hooks evaluating the exact training losses and gradients at the
    // live weights without stepping the optimizer. Gradient vectors are
    // resized and overwritten. min_abs_pre (when non-null) receives the
    // smallest hidden pre-activation magnitude, so finite-difference checks
    // can reject inputs sitting on a leaky-ReLU kink.
    double debug_stat_loss(std::span<const TrainSample> batch) const;
    double debug_stat_loss_backward(std::span<const TrainSample> batch, Eigen::VectorXf &g_mlp,
                                    Eigen::VectorXf &g_grid) const;
    double debug_rrs_loss(std::span<const TrainSample> batch, std::span<const PixelError> errors,
                          float e_avg, TrainPhase phase) const;
    double debug_rrs_loss_backward(std::span<const TrainSample> batch,
                                   std::span<const PixelError> errors, float e_avg,
                                   TrainPhase phase, Eigen::VectorXf &g_mlp,
                                   Eigen::VectorXf &g_grid) const;
    float debug_q_backward(const TrainSample &s, Eigen::VectorXf &g_mlp, Eigen::VectorXf &g_grid,
                           float *min_abs_pre = nullptr) const;

    // Hash of the hidden pre-activation signs over a batch. Finite-difference
    // tests compare the hash at theta +/- h to reject steps that cross a
    // leaky-ReLU kink, where central differences are invalid.
    uint64_t debug_stat_signs(std::span<const TrainSample> batch) const;
    uint64_t debug_rrs_signs(std::span<const TrainSample> batch) const;

    int stat_input_dim() const { return m_cfg.grid.output_dim() + kStatTailDim; }
    int rrs_input_dim() const {
        return m_cfg.variant == RrsVariant::Nrrs ? kNrrsInputDim
                                                 : m_cfg.grid.output_dim() + kAidTailDim;
    }

private:
    /// Unweighted component values of one factor-loss evaluation; total_value
    /// applies the configured gamma weights (warmup: the regression alone).
    struct RrsLossParts {
        double min = 0.0;
        double avg = 0.0;
        double rrs = 0.0;
        double total_value = 0.0;
    };

    double stat_loss_impl(std::span<const TrainSample> batch, float d_scale,
                          Eigen::VectorXf *g_mlp, Eigen::VectorXf *g_grid) const;
    void rrs_loss_impl(std::span<const TrainSample> batch, std::span<const PixelError> errors,
                       float e_avg, TrainPhase phase, float d_scale, Eigen::VectorXf *g_mlp,
                       Eigen::VectorXf *g_grid, RrsLossParts *parts,
                       uint32_t *skipped_samples) const;

    void encode_stat_inputs(std::span<const TrainSample> batch, Eigen::MatrixXf &x,
                            HashGrid::Workspace *ws, const HashGrid &grid) const;
    void encode_rrs_inputs(std::span<const TrainSample> batch,
                           const Eigen::MatrixXf &snap_stats, Eigen::MatrixXf &x,
                           HashGrid::Workspace *ws, const HashGrid &grid) const;
    void snapshot_stats_batch(std::span<const TrainSample> batch, Eigen::MatrixXf &y) const;
    bool apply_step(Adam &adam_grid, Adam &adam_mlp, HashGrid *grid, Mlp &mlp,
                    Eigen::VectorXf &grad_grid, Eigen::VectorXf &grad_mlp,
                    EmaTracker &ema_grid, EmaTracker &ema_mlp, float &scale,
                    uint32_t &good_streak, TrainFrameStats &out);

    NeuralRrsConfig m_cfg;

    HashGrid m_stat_grid;
    Mlp m_stat_mlp;
    HashGrid m_rrs_grid;  // unused (empty spec) for the NRRS variant
    Mlp m_rrs_mlp;

    Adam m_adam_stat_grid, m_adam_stat_mlp;
    Adam m_adam_rrs_grid, m_adam_rrs_mlp;
    EmaTracker m_ema_stat_grid, m_ema_stat_mlp;
    EmaTracker m_ema_rrs_grid, m_ema_rrs_mlp;

    HashGrid m_snap_stat_grid;
    Mlp m_snap_stat_mlp;
    HashGrid m_snap_rrs_grid;
    Mlp m_snap_rrs_mlp;

    float m_scale_stat = 1.0f;
    float m_scale_rrs = 1.0f;
    uint32_t m_streak_stat = 0;
    uint32_t m_streak_rrs = 0;
    uint64_t m_stat_steps = 0;
    uint64_t m_rrs_steps = 0;

    std::vector<CurveRow> m_curve;
};

}  // namespace nrrs
