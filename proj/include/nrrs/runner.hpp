#pragma once

#include "nrrs/config.hpp"
#include "nrrs/metrics.hpp"
#include "nrrs/mixdepth.hpp"
#include "nrrs/networks.hpp"
#include "nrrs/scene.hpp"

#include <span>
#include <string>
#include <vector>

namespace nrrs {

/// Outcome of one training-plus-rendering run.
struct RunResult {
    MetricsReport report;
    std::vector<Vec3f> image;  // mean of the rendering-phase frames only
    int width = 0;
    int height = 0;
    int train_frames = 0;
    int render_frames = 0;
    uint64_t rays_train = 0;
    uint64_t camera_rays = 0;  // rendering-phase stage counters
    uint64_t scatter_rays = 0;
    uint64_t shadow_rays = 0;
    uint64_t nonfinite_drops = 0;
    uint64_t octree_samples = 0;  // spatial-cache population after training
    std::vector<NeuralRrs::CurveRow> curve;  // one row per training frame
};

/// Runs one method: an adaptive training phase (skipped for non-adaptive
/// assignments), film reset, then the rendering phase. Rendering frames use
/// frame indices train_iters + r for every method, so equal-seed runs share
/// primary rays. With an empty reference the error metrics stay NaN.
RunResult run_method(const RunConfig &cfg, const Scene &scene,
                     std::span<const Vec3f> reference = {});

/// Full single-method run that also writes artifacts: the image as PFM and
/// PPM, metrics.csv, timing.csv, and the training curve when one exists. A
/// reference at cfg.reference (default out_dir/reference.pfm) is loaded if
/// present; without one the error metrics stay NaN.
RunResult run_render(const RunConfig &cfg);

struct CompareRow {
    std::string method;     // strategy spec as given
    std::string file_stem;  // sanitized name used for output files
    RunResult result;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    std::vector<Vec3f> reference;
    bool reference_generated = false;
    uint64_t bias_drop_events = 0;  // total across all runs and phases
};

/// Runs every method with identical seeds and budgets against a shared
/// reference (loaded from disk, or generated with reference_iters of plain
/// path tracing and saved). Writes per-method PFM/PPM images, metrics.csv,
/// timing.csv, and training_curve_<method>.csv files into cfg.out_dir.
CompareResult run_comparison(const RunConfig &base, std::span<const std::string> methods);

struct SearchDriverResult {
    SearchResult search;
    uint64_t bias_drop_events = 0;
    std::string log_path;
};

/// Trains once with cfg.strategy, then searches per-depth assignments over
/// cfg.candidates with frozen networks. Probes render one frame each with a
/// fixed frame index; scores follow cfg.score_time unless cfg.deterministic
/// forces RelMSE-only. Writes the probe log to out_dir/search_log.csv.
SearchDriverResult run_search(const RunConfig &cfg);

/// Training phase only: trains cfg.strategy, writes training_curve.csv and,
/// when configured, the checkpoint_out file. The result carries no image.
RunResult run_train(const RunConfig &cfg);

/// Renders a plain path-traced reference with reference_iters frames and
/// writes it to cfg.reference (default out_dir/reference.pfm) plus a PPM.
RunResult run_reference(const RunConfig &cfg);

}  // namespace nrrs
