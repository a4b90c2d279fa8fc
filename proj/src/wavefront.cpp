#include "nrrs/wavefront.hpp"

#include "nrrs/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace nrrs {

namespace {

/// Balance between two competing sampling pdfs, power heuristic with beta = 2.
/// Squares are taken in double so extreme pdfs never overflow the ratio.
float mis_power2(float a, float b) {
    const double a2 = static_cast<double>(a) * static_cast<double>(a);
    const double b2 = static_cast<double>(b) * static_cast<double>(b);
    if (a2 + b2 <= 0.0)
        return 0.0f;
    return static_cast<float>(a2 / (a2 + b2));
}

/// Emission collected when a ray hits triangle tri at distance dist,
/// MIS-weighted against next-event estimation when the light was sampleable.
/// prev_pdf < 0 marks camera rays, which have no competing technique.
/// Emitters are two-sided, hence the absolute cosine.
Vec3f hit_emission(const Scene &scene, const Ray &ray, uint32_t tri, float dist, float prev_pdf) {
    const Material &mat = scene.material_of(tri);
    if (!mat.emissive())
        return Vec3f::Zero();
    float mis = 1.0f;
    if (prev_pdf >= 0.0f) {
        const float pdf_area = scene.light_pdf_area(tri);
        if (pdf_area > 0.0f) {
            const float cos_l = std::abs(scene.mesh.face_normal(tri).dot(ray.d));
            const float pdf_sa = pdf_area * dist * dist / std::max(cos_l, 1e-8f);
            mis = mis_power2(prev_pdf, pdf_sa);
        }
    }
    return mat.emission * mis;
}

/// Everything trace_frame keeps per surface vertex: the shading data needed to
/// spawn children, the RRS bookkeeping, and the running suffix contribution s
/// (this vertex's own film terms plus, after the reverse pass, its subtree's).
struct VertexRec {
    Vec3f p = Vec3f::Zero();
    Vec3f n_s = Vec3f(0, 0, 1);
    Vec3f wo = Vec3f(0, 0, 1);
    Vec3f weight = Vec3f::Ones();
    Vec3f p01 = Vec3f::Zero();
    Vec2f wo01 = Vec2f::Zero();
    float roughness = 1.0f;
    uint32_t material = 0;
    uint32_t pixel = 0;
    int32_t parent = -1;
    uint64_t path_key = 0;
    float rrs_product = 1.0f;
    float q_norm = 1.0f;
    float q_real = 1.0f;
    bool decided = false;
    Vec3d emit = Vec3d::Zero();
    Vec3d nee = Vec3d::Zero();
    Vec3d s = Vec3d::Zero();
};

/// Caches required by the strategies actually consulted (entries for depths
/// 2..B-1; the first entry is forced to 1 and the last is terminal). Checked
/// up front so worker threads never throw.
void check_context(const DepthAssignment &assignment, const StrategyContext &ctx, int max_depth) {
    for (int d = 2; d < max_depth; ++d) {
        const Strategy &st = assignment[static_cast<size_t>(d) - 1];
        if (st.kind == StrategyKind::AdrrsTree && ctx.octree == nullptr)
            fail("trace_frame: adrrs-tree strategy needs an octree cache");
        if (st.neural() && ctx.nets == nullptr)
            fail("trace_frame: neural strategy needs networks");
    }
}

}  // namespace

uint32_t queue_capacity_for(uint32_t n_pixels) {
    return n_pixels + (n_pixels + 7u) / 8u;
}

Film::Film(int w, int h) : width(w), height(h) {
    if (w <= 0 || h <= 0)
        fail("Film: dimensions must be positive");
    const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h);
    sum.assign(n, Vec3d::Zero());
    samples.assign(n, 0u);
    i_cur.assign(n, Vec3f::Zero());
    i_acc.assign(n, Vec3f::Zero());
    normal.assign(n, Vec3f::Zero());
}

std::vector<Vec3f> Film::mean_image() const {
    std::vector<Vec3f> img(pixel_count());
    for (uint32_t i = 0; i < pixel_count(); ++i)
        img[i] = mean(i);
    return img;
}

void Film::add_frame(std::span<const Vec3d> frame) {
    if (frame.size() != sum.size())
        fail("Film::add_frame: frame size mismatch");
    for (size_t i = 0; i < frame.size(); ++i) {
        sum[i] += frame[i];
        samples[i] += 1;
        i_cur[i] = frame[i].cast<float>();
    }
}

void Film::roll_acc() {
    for (size_t i = 0; i < i_acc.size(); ++i)
        i_acc[i] = 0.5f * i_acc[i] + 0.5f * i_cur[i];
}

void Film::reset_accumulation() {
    std::fill(sum.begin(), sum.end(), Vec3d::Zero());
    std::fill(samples.begin(), samples.end(), 0u);
    std::fill(i_cur.begin(), i_cur.end(), Vec3f::Zero());
}

DispatchResult dispatch(const Scene &scene, const WorkQueue &queue, std::span<const Hit> hits) {
    if (hits.size() != queue.size())
        fail("dispatch: hit count does not match the queue");
    DispatchResult out;
    out.surface.reserve(queue.size());
    for (uint32_t i = 0; i < queue.size(); ++i) {
        if (!hits[i].valid())
            out.miss.push_back(i);
        else if (scene.material_of(hits[i].tri).scattering())
            out.surface.push_back(i);
        else
            out.light.push_back(i);
    }
    return out;
}

SpawnPlan plan_spawns(std::span<const int> counts, uint32_t capacity) {
    SpawnPlan plan;
    plan.offset.resize(counts.size());
    uint64_t cum = 0;
    for (size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] < 0)
            fail("plan_spawns: negative count");
        plan.offset[i] = static_cast<uint32_t>(std::min<uint64_t>(cum, capacity));
        cum += static_cast<uint64_t>(counts[i]);
    }
    plan.spawned = static_cast<uint32_t>(std::min<uint64_t>(cum, capacity));
    plan.dropped = cum - plan.spawned;
    return plan;
}

NeeSample sample_nee(const Scene &scene, const SurfaceInteraction &si, float u_pick, float u1,
                     float u2) {
    NeeSample out;
    out.light = scene.sample_light(u_pick, u1, u2);
    if (!out.light.valid || out.light.pdf_area <= 0.0f)
        return out;
    Vec3f wl = out.light.p - si.p;
    const float dist2 = wl.squaredNorm();
    if (!(dist2 > 1e-12f))
        return out;
    const float dist = std::sqrt(dist2);
    wl /= dist;
    const float cos_l = std::abs(out.light.n.dot(wl));
    if (cos_l <= 1e-7f)
        return out;
    const Material &mat = scene.materials[si.material];
    const ShadingPoint sp{si.p, si.n_s, si.wo};
    const Vec3f f = bsdf_eval(mat, sp, wl);
    const float cos_v = si.n_s.dot(wl);
    if (cos_v <= 0.0f || f.maxCoeff() <= 0.0f || out.light.emission.maxCoeff() <= 0.0f)
        return out;
    const float scale = cos_v * cos_l / (dist2 * out.light.pdf_area);
    out.contribution = f.cwiseProduct(out.light.emission) * scale;
    out.pdf_light_sa = out.light.pdf_area * dist2 / std::max(cos_l, 1e-8f);
    out.pdf_bsdf = bsdf_pdf(mat, sp, wl);
    out.shadow_ray = Ray{si.p, wl, dist * (1.0f - 1e-3f)};
    out.valid = true;
    return out;
}

float strategy_factor(const Strategy &st, const StrategyContext &ctx, const Vec3f &weight,
                      const Vec3f &p01, const Vec2f &wo01, float roughness, const Vec3f &i_pixel,
                      float eps_div) {
    // A zero divisor guard: with an empty accumulated image both the numerator
    // and denominator of the ADRRS ratio can be zero, which would clamp NaN.
    const float eps = std::max(eps_div, 1e-8f);
    switch (st.kind) {
    case StrategyKind::Fixed:
        return st.fixed_value;
    case StrategyKind::Throughput:
        return throughput_rr_factor(weight);
    case StrategyKind::AdrrsTree: {
        if (ctx.octree == nullptr)
            fail("strategy_factor: adrrs-tree needs an octree cache");
        return adrrs_factor(weight, ctx.octree->query(p01).mean, i_pixel, eps);
    }
    case StrategyKind::AdrrsNn: {
        if (ctx.nets == nullptr)
            fail("strategy_factor: adrrs-nn needs networks");
        return adrrs_factor(weight, ctx.nets->predict_stats(p01, wo01, roughness).mean, i_pixel,
                            eps);
    }
    case StrategyKind::Nrrs:
    case StrategyKind::AidNrrs:
        if (ctx.nets == nullptr)
            fail("strategy_factor: neural RRS needs networks");
        return ctx.nets->predict_q(p01, wo01, roughness, weight, i_pixel);
    }
    fail("strategy_factor: unknown strategy kind");
}

FrameReport trace_frame(const Scene &scene, const DepthAssignment &assignment,
                        const StrategyContext &ctx, const TraceConfig &cfg, RateControl &rc,
                        Film &film, std::vector<TrainSample> *train_out) {
    const int max_depth = cfg.max_depth;
    if (max_depth < 1)
        fail("trace_frame: max_depth must be at least 1");
    if (assignment.size() != static_cast<size_t>(max_depth))
        fail("trace_frame: assignment must have one entry per depth");
    const uint32_t n_pixels = film.pixel_count();
    if (n_pixels == 0)
        fail("trace_frame: film has no pixels");
    const uint32_t capacity =
        cfg.queue_capacity != 0 ? cfg.queue_capacity : queue_capacity_for(n_pixels);
    if (capacity < n_pixels)
        fail("trace_frame: queue capacity below the pixel count");
    check_context(assignment, ctx, max_depth);
    const int threads = resolve_thread_count(cfg.threads);

    FrameReport report;
    report.depth_counts.assign(static_cast<size_t>(max_depth), 0u);

    // ADRRS division guard, scaled to the accumulated image brightness.
    double lum_acc = 0.0;
    for (const Vec3f &c : film.i_acc)
        lum_acc += static_cast<double>(luminance(c));
    const float eps_div =
        cfg.adrrs_eps_scale * static_cast<float>(lum_acc / static_cast<double>(n_pixels));

    std::vector<Vec3d> frame(n_pixels, Vec3d::Zero());
    std::vector<Vec3f> normals(n_pixels, Vec3f::Zero());
    std::atomic<uint64_t> shadow_rays{0};
    std::atomic<uint64_t> nonfinite{0};

    WorkQueue queue(capacity);
    WorkQueue next(capacity);
    queue.resize(n_pixels);
    parallel_for_blocks(n_pixels, threads, [&](size_t, size_t begin, size_t end) {
        for (size_t p = begin; p < end; ++p) {
            PathState s;
            s.pixel = static_cast<uint32_t>(p);
            s.path_key = root_path_key(s.pixel, cfg.frame_index);
            RngStream jitter = path_stream(cfg.seed, s.path_key, 1, Draw::CameraJitter);
            const uint32_t x = s.pixel % static_cast<uint32_t>(film.width);
            const uint32_t y = s.pixel / static_cast<uint32_t>(film.width);
            const float u =
                (static_cast<float>(x) + jitter.next_float()) / static_cast<float>(film.width);
            const float v =
                (static_cast<float>(y) + jitter.next_float()) / static_cast<float>(film.height);
            s.ray = scene.camera.generate_ray(
                u, v, static_cast<float>(film.width) / static_cast<float>(film.height));
            queue[s.pixel] = s;
        }
    });
    report.camera_rays = n_pixels;

    // Vertex records per depth, kept until the reverse pass.
    std::vector<std::vector<VertexRec>> verts(static_cast<size_t>(max_depth) + 1);
    std::vector<Hit> hits;

    for (int depth = 1; depth <= max_depth; ++depth) {
        if (queue.empty())
            break;
        const uint32_t n = queue.size();
        report.depth_counts[static_cast<size_t>(depth) - 1] = n;
        if (depth >= 2)
            report.scatter_rays += n;

        hits.assign(n, Hit{});
        parallel_for_blocks(n, threads, [&](size_t, size_t begin, size_t end) {
            for (size_t i = begin; i < end; ++i)
                hits[i] = scene.intersect(queue[static_cast<uint32_t>(i)].ray);
        });

        const DispatchResult parts = dispatch(scene, queue, hits);
        std::vector<VertexRec> &vd = verts[static_cast<size_t>(depth)];
        std::vector<VertexRec> *up = depth >= 2 ? &verts[static_cast<size_t>(depth) - 1] : nullptr;

        // Escaped rays: environment emission, never light-sampled, weight 1.
        for (const uint32_t i : parts.miss) {
            const PathState &s = queue[i];
            if (scene.env_emission.maxCoeff() > 0.0f) {
                const Vec3d term = s.weight.cwiseProduct(scene.env_emission).cast<double>();
                frame[s.pixel] += term;
                if (up != nullptr && s.parent_vertex >= 0)
                    (*up)[static_cast<size_t>(s.parent_vertex)].s += term;
            }
        }
        // Pure emitter hits: collect emission, the path ends here.
        for (const uint32_t i : parts.light) {
            const PathState &s = queue[i];
            if (depth == 1) {
                Vec3f nl = scene.mesh.face_normal(hits[i].tri);
                if (nl.dot(s.ray.d) > 0.0f)
                    nl = -nl;
                normals[s.pixel] = nl;
            }
            const Vec3f emitted =
                hit_emission(scene, s.ray, hits[i].tri, hits[i].t, s.prev_bsdf_pdf);
            if (emitted.maxCoeff() > 0.0f) {
                const Vec3d term = s.weight.cwiseProduct(emitted).cast<double>();
                frame[s.pixel] += term;
                if (up != nullptr && s.parent_vertex >= 0)
                    (*up)[static_cast<size_t>(s.parent_vertex)].s += term;
            }
        }

        // Surface vertices: record shading data and collect own emission.
        const uint32_t ns = static_cast<uint32_t>(parts.surface.size());
        vd.assign(ns, VertexRec{});
        parallel_for_blocks(ns, threads, [&](size_t, size_t begin, size_t end) {
            for (size_t j = begin; j < end; ++j) {
                const uint32_t i = parts.surface[j];
                const PathState &s = queue[i];
                const SurfaceInteraction si = scene.interaction(s.ray, hits[i]);
                VertexRec &v = vd[j];
                v.p = si.p;
                v.n_s = si.n_s;
                v.wo = si.wo;
                v.weight = s.weight;
                v.material = si.material;
                v.pixel = s.pixel;
                v.parent = s.parent_vertex;
                v.path_key = s.path_key;
                v.rrs_product = s.rrs_product;
                v.p01 = scene.normalize_position(si.p);
                v.wo01 = dir_to_spherical01(si.wo);
                const Material &mat = scene.materials[si.material];
                v.roughness = mat.kind == MaterialKind::Conductor ? mat.roughness : 1.0f;
                const Vec3f emitted =
                    hit_emission(scene, s.ray, hits[i].tri, hits[i].t, s.prev_bsdf_pdf);
                if (emitted.maxCoeff() > 0.0f)
                    v.emit = s.weight.cwiseProduct(emitted).cast<double>();
                if (depth == 1)
                    normals[s.pixel] = si.n_s;  // unique pixels at depth 1
            }
        });
        for (uint32_t j = 0; j < ns; ++j) {
            vd[j].s = vd[j].emit;
            frame[vd[j].pixel] += vd[j].emit;
        }

        if (depth == max_depth) {
            queue.clear();  // terminal vertices: emission only, no decisions
            break;
        }

        // RRS decision: raw factors (depth 1 is pinned to 1), then in-place
        // normalization against the pixel budget, then the rate-control gain
        // for adaptive strategies.
        const Strategy &strat = assignment[static_cast<size_t>(depth) - 1];
        std::vector<float> qs(ns, 0.0f);
        parallel_for_blocks(ns, threads, [&](size_t, size_t begin, size_t end) {
            for (size_t j = begin; j < end; ++j) {
                VertexRec &v = vd[j];
                float q = 0.0f;
                bool decided = false;
                if (depth == 1) {
                    q = 1.0f;
                    decided = true;
                } else if (luminance(v.weight) > 0.0f) {
                    q = strategy_factor(strat, ctx, v.weight, v.p01, v.wo01, v.roughness,
                                        film.i_acc[v.pixel], eps_div);
                    decided = true;
                }
                if (!std::isfinite(q) || q < 0.0f) {
                    q = 0.0f;
                    decided = false;
                    nonfinite.fetch_add(1, std::memory_order_relaxed);
                }
                v.decided = decided;
                qs[j] = q;
            }
        });
        normalize_factors(qs, n_pixels);
        const float gain = (depth >= 2 && strat.adaptive()) ? rc.gain() : 1.0f;

        std::vector<float> q_real(ns);
        std::vector<float> us(ns);
        for (uint32_t j = 0; j < ns; ++j) {
            q_real[j] = qs[j] * gain;
            us[j] = path_stream(cfg.seed, vd[j].path_key, static_cast<uint32_t>(depth),
                                Draw::RrsRound)
                        .next_float();
            vd[j].q_norm = qs[j];
            vd[j].q_real = q_real[j];
        }
        std::vector<int> counts(ns);
        realize_counts(q_real, us, counts);

        const SpawnPlan plan = plan_spawns(counts, capacity);
        if (plan.dropped > 0) {
            rc.note_overflow();
            report.overflow_events += 1;
            report.bias_drop_events += plan.dropped;
        }

        // Children fill fixed slots; capacity-clipped tails never sample.
        // Every child slot does its own next-event estimation, so invalid
        // BSDF samples still gather direct light.
        next.resize(plan.spawned);
        std::vector<uint8_t> slot_used(plan.spawned, 0u);
        parallel_for_blocks(ns, threads, [&](size_t, size_t begin, size_t end) {
            for (size_t j = begin; j < end; ++j) {
                VertexRec &v = vd[j];
                const uint32_t off = plan.offset[j];
                const uint32_t kept = static_cast<uint32_t>(std::min<uint64_t>(
                    static_cast<uint64_t>(counts[j]), plan.spawned - std::min(plan.spawned, off)));
                if (kept == 0)
                    continue;
                const Material &mat = scene.materials[v.material];
                const ShadingPoint sp{v.p, v.n_s, v.wo};
                SurfaceInteraction si;
                si.p = v.p;
                si.n_s = v.n_s;
                si.wo = v.wo;
                si.material = v.material;
                const float qr = v.q_real;
                uint64_t local_shadow = 0;
                for (uint32_t c = 0; c < kept; ++c) {
                    const uint64_t child_key = child_path_key(v.path_key, c);
                    const float pick =
                        path_stream(cfg.seed, child_key, static_cast<uint32_t>(depth),
                                    Draw::LightPick)
                            .next_float();
                    RngStream point_rng = path_stream(cfg.seed, child_key,
                                                      static_cast<uint32_t>(depth),
                                                      Draw::LightPoint);
                    const float l1 = point_rng.next_float();
                    const float l2 = point_rng.next_float();
                    const NeeSample nee = sample_nee(scene, si, pick, l1, l2);
                    if (nee.valid) {
                        ++local_shadow;
                        if (!scene.occluded(nee.shadow_ray)) {
                            const float mis = mis_power2(nee.pdf_light_sa, nee.pdf_bsdf);
                            const Vec3f w_over_q = v.weight / qr;
                            v.nee += w_over_q.cwiseProduct(nee.contribution * mis).cast<double>();
                        }
                    }

                    RngStream bsdf_rng = path_stream(cfg.seed, child_key,
                                                     static_cast<uint32_t>(depth), Draw::Bsdf);
                    const float b1 = bsdf_rng.next_float();
                    const float b2 = bsdf_rng.next_float();
                    const BsdfSample bs = bsdf_sample(mat, sp, b1, b2);
                    if (!bs.valid)
                        continue;
                    PathState child;
                    child.ray = Ray{v.p, bs.wi, kInf};
                    child.weight = v.weight.cwiseProduct(bs.throughput) / qr;
                    if (!is_finite(child.weight)) {
                        nonfinite.fetch_add(1, std::memory_order_relaxed);
                        continue;
                    }
                    child.path_key = child_key;
                    child.prev_bsdf_pdf = bs.pdf;
                    child.rrs_product = v.rrs_product * qr;
                    child.pixel = v.pixel;
                    child.parent_vertex = static_cast<int32_t>(j);
                    child.depth = static_cast<uint16_t>(depth + 1);
                    next[off + c] = child;
                    slot_used[off + c] = 1u;
                }
                if (local_shadow > 0)
                    shadow_rays.fetch_add(local_shadow, std::memory_order_relaxed);
            }
        });
        // Direct-light terms fold in vertex order, after the emission stage.
        for (uint32_t j = 0; j < ns; ++j) {
            frame[vd[j].pixel] += vd[j].nee;
            vd[j].s += vd[j].nee;
        }
        // Order-preserving compaction of the filled slots.
        uint32_t write = 0;
        for (uint32_t slot = 0; slot < plan.spawned; ++slot) {
            if (!slot_used[slot])
                continue;
            if (write != slot)
                next[write] = next[slot];
            ++write;
        }
        next.resize(write);
        std::swap(queue, next);
        next.clear();
    }

    // Reverse pass: cascade subtree contributions into the parents so every
    // vertex's s becomes the film contribution of its whole suffix.
    for (int d = max_depth; d >= 2; --d)
        for (const VertexRec &v : verts[static_cast<size_t>(d)])
            if (v.parent >= 0)
                verts[static_cast<size_t>(d) - 1][static_cast<size_t>(v.parent)].s += v.s;

    // Local radiance targets: the suffix estimate re-expressed at the vertex
    // by dividing out the prefix weight per channel (0/0 reads as 0).
    if (cfg.collect_training && train_out != nullptr) {
        const size_t start = train_out->size();
        for (int d = 1; d < max_depth; ++d) {
            for (const VertexRec &v : verts[static_cast<size_t>(d)]) {
                if (!v.decided)
                    continue;
                Vec3f lo;
                for (int c = 0; c < 3; ++c)
                    lo[c] = v.weight[c] > 0.0f ? static_cast<float>(v.s[c] / v.weight[c]) : 0.0f;
                if (!is_finite(lo)) {
                    nonfinite.fetch_add(1, std::memory_order_relaxed);
                    continue;
                }
                TrainSample ts;
                ts.position = v.p01;
                ts.omega_o = v.wo01;
                ts.roughness = v.roughness;
                ts.t_x = v.weight;
                ts.i_pixel = film.i_acc[v.pixel];
                ts.lo_sample = lo;
                ts.q_norm = v.q_norm;
                ts.q_real = v.q_real;
                ts.pixel = v.pixel;
                ts.depth = static_cast<uint16_t>(d);
                train_out->push_back(ts);
            }
        }
        std::vector<uint32_t> per_pixel(n_pixels, 0u);
        for (size_t i = start; i < train_out->size(); ++i)
            per_pixel[(*train_out)[i].pixel] += 1;
        for (size_t i = start; i < train_out->size(); ++i)
            (*train_out)[i].k_i = static_cast<float>(per_pixel[(*train_out)[i].pixel]);
        report.train_samples = train_out->size() - start;
    }

    report.shadow_rays = shadow_rays.load();
    report.nonfinite_drops = nonfinite.load();
    film.add_frame(frame);
    film.normal = std::move(normals);
    return report;
}

}  // namespace nrrs
