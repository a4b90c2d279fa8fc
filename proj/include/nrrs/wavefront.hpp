#pragma once

#include "nrrs/networks.hpp"
#include "nrrs/octree.hpp"
#include "nrrs/rrs.hpp"
#include "nrrs/scene.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nrrs {

/// One work-queue entry: a ray in flight toward its depth-d vertex. weight is
/// the prefix path's g/p with every RRS compensation already folded in, so a
/// hit's film contribution is weight * (local radiance term).
struct PathState {
    Ray ray;
    Vec3f weight = Vec3f::Ones();
    uint64_t path_key = 0;
    float prev_bsdf_pdf = -1.0f;  // solid-angle pdf of the spawning BSDF sample; < 0 for camera rays
    float rrs_product = 1.0f;     // product of RRS factors applied along the prefix
    uint32_t pixel = 0;
    int32_t parent_vertex = -1;   // index into the previous depth's vertex records; -1 for camera rays
    uint16_t depth = 1;           // 1 = camera ray; a ray at depth d creates a depth-d vertex
};

/// Queue slack rule: capacity = n_pixels + ceil(n_pixels / 8).
uint32_t queue_capacity_for(uint32_t n_pixels);

/// Fixed-capacity dense queue. Growth past capacity is impossible by
/// construction; overflow is an observable spawn-planning event, never an
/// allocation.
class WorkQueue {
public:
    explicit WorkQueue(uint32_t capacity) : m_capacity(capacity) {
        m_entries.reserve(capacity);
    }

    uint32_t capacity() const { return m_capacity; }
    uint32_t size() const { return static_cast<uint32_t>(m_entries.size()); }
    bool empty() const { return m_entries.empty(); }

    /// Appends one entry; returns false (and changes nothing) when full.
    bool push(const PathState &s) {
        if (size() >= m_capacity)
            return false;
        m_entries.push_back(s);
        return true;
    }

    /// Sets the entry count so workers can fill fixed slots. Throws past
    /// capacity.
    void resize(uint32_t n) {
        if (n > m_capacity)
            fail("WorkQueue::resize beyond capacity");
        m_entries.resize(n);
    }

    void clear() { m_entries.clear(); }

    PathState &operator[](uint32_t i) { return m_entries[i]; }
    const PathState &operator[](uint32_t i) const { return m_entries[i]; }

    std::span<PathState> entries() { return m_entries; }
    std::span<const PathState> entries() const { return m_entries; }

private:
    uint32_t m_capacity = 0;
    std::vector<PathState> m_entries;
};

/// Per-pixel accumulation buffers. sum/samples hold the unbiased estimate in
/// double precision; i_cur is the latest frame; i_acc is the 0.5/0.5
/// exponential accumulator driving the training error signal and the ADRRS
/// pixel estimate (it survives reset_accumulation on purpose); normal holds
/// the latest frame's primary-hit shading normals for the edge-aware filter.
struct Film {
    int width = 0;
    int height = 0;
    std::vector<Vec3d> sum;
    std::vector<uint32_t> samples;
    std::vector<Vec3f> i_cur;
    std::vector<Vec3f> i_acc;
    std::vector<Vec3f> normal;

    Film() = default;
    Film(int w, int h);

    uint32_t pixel_count() const { return static_cast<uint32_t>(sum.size()); }

    Vec3f mean(uint32_t pixel) const {
        if (samples[pixel] == 0)
            return Vec3f::Zero();
        return (sum[pixel] / static_cast<double>(samples[pixel])).cast<float>();
    }
    std::vector<Vec3f> mean_image() const;

    /// Folds one frame into the estimate: sum += frame, samples += 1, and
    /// i_cur is overwritten with the frame.
    void add_frame(std::span<const Vec3d> frame);

    /// i_acc = 0.5 i_acc + 0.5 i_cur. Rendering-phase counterpart of
    /// update_error_signal's accumulator update.
    void roll_acc();

    /// Clears sum/samples/i_cur (e.g. when the training phase ends so its
    /// samples never reach the final image); i_acc and normals persist.
    void reset_accumulation();
};

/// Index partition of an intersected queue: every entry lands in exactly one
/// bucket. light = pure emitters (no scattering lobe); surface = everything
/// with a lobe, emissive or not.
struct DispatchResult {
    std::vector<uint32_t> surface;
    std::vector<uint32_t> light;
    std::vector<uint32_t> miss;
};

DispatchResult dispatch(const Scene &scene, const WorkQueue &queue, std::span<const Hit> hits);

/// Deterministic child-slot layout: entry i gets slots [offset[i],
/// offset[i] + counts[i]) clipped to capacity; children past the clip are
/// dropped from the tail and counted.
struct SpawnPlan {
    std::vector<uint32_t> offset;
    uint32_t spawned = 0;
    uint64_t dropped = 0;
};

SpawnPlan plan_spawns(std::span<const int> counts, uint32_t capacity);

/// One next-event-estimation sample at a surface vertex. contribution is the
/// unoccluded, MIS-unweighted integrand estimate
/// f * cos_v * |cos_l| * Le / (dist^2 * pdf_area); the caller applies the
/// power-2 MIS weight from the two pdfs and tests shadow_ray for visibility.
/// Lights are two-sided (the builtin meshes wind faces outward).
struct NeeSample {
    LightSample light;
    Vec3f contribution = Vec3f::Zero();
    Ray shadow_ray;
    float pdf_light_sa = 0.0f;  // area pdf converted to solid angle at the vertex
    float pdf_bsdf = 0.0f;      // BSDF pdf of the sampled direction
    bool valid = false;
};

NeeSample sample_nee(const Scene &scene, const SurfaceInteraction &si, float u_pick, float u1,
                     float u2);

/// Caches consulted by adaptive strategies. octree is indexed by normalized
/// [0,1]^3 positions; nets supplies both StatNet estimates (adrrs-nn) and
/// RRSNet factors (nrrs, aid-nrrs).
struct StrategyContext {
    const OctreeCache *octree = nullptr;
    const NeuralRrs *nets = nullptr;
};

/// Raw strategy factor for one shading event (before normalization). Throws
/// when the strategy needs a cache the context does not carry.
float strategy_factor(const Strategy &st, const StrategyContext &ctx, const Vec3f &weight,
                      const Vec3f &p01, const Vec2f &wo01, float roughness, const Vec3f &i_pixel,
                      float eps_div);

struct TraceConfig {
    int max_depth = 6;         // B: vertices live at depths 1..B
    uint64_t seed = 0;
    uint32_t frame_index = 0;  // decorrelates frames through the path keys
    int threads = 0;           // 0 = NRRS_THREADS or hardware concurrency
    bool collect_training = false;
    uint32_t queue_capacity = 0;    // 0 = queue_capacity_for(n_pixels)
    float adrrs_eps_scale = 1e-4f;  // eps_div = scale * mean luminance of i_acc
};

struct FrameReport {
    uint64_t camera_rays = 0;
    uint64_t scatter_rays = 0;
    uint64_t shadow_rays = 0;
    uint32_t overflow_events = 0;   // spawn stages whose realized total exceeded capacity
    uint64_t bias_drop_events = 0;  // children dropped at the capacity clip
    uint64_t nonfinite_drops = 0;   // children or samples dropped for non-finite values
    uint64_t train_samples = 0;
    std::vector<uint32_t> depth_counts;  // rays traced per depth, entry d-1 for depth d

    uint64_t total_rays() const { return camera_rays + scatter_rays + shadow_rays; }
};

/// Traces one 1-sample-per-pixel frame through the staged pipeline
/// (raygen, intersect, dispatch, RRS, scatter/NEE, accumulate) and folds it
/// into the film. assignment must have exactly max_depth entries; entry d-1
/// is used at vertices of depth d (depth-1 vertices are forced to factor 1,
/// the last entry is inert because depth-B vertices are terminal). rc
/// persists across frames: its gain scales the normalized factors and its
/// alpha decays on every overflow event. When collect_training is set, one
/// TrainSample per decision vertex is appended to train_out with the local
/// radiance target reconstructed by a reverse pass over the vertex tree.
/// Accumulation is deterministic: identical seeds give bit-identical films
/// for any thread count.
FrameReport trace_frame(const Scene &scene, const DepthAssignment &assignment,
                        const StrategyContext &ctx, const TraceConfig &cfg, RateControl &rc,
                        Film &film, std::vector<TrainSample> *train_out = nullptr);

}  // namespace nrrs
