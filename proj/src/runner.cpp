#include "nrrs/runner.hpp"

#include "nrrs/denoise.hpp"
#include "nrrs/imageio.hpp"
#include "nrrs/octree.hpp"
#include "nrrs/wavefront.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nrrs {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_float(float v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// Accepts the builtin scene names with or without the "builtin:" prefix.
Scene resolve_scene(const std::string &name) {
    if (name == "cornell" || name == "furnace" || name == "caustic")
        return load_scene("builtin:" + name);
    return load_scene(name);
}

bool uses_nets(const DepthAssignment &a) {
    return std::any_of(a.begin(), a.end(), [](const Strategy &s) {
        return s.neural() || s.kind == StrategyKind::AdrrsNn;
    });
}

bool uses_octree(const DepthAssignment &a) {
    return std::any_of(a.begin(), a.end(),
                       [](const Strategy &s) { return s.kind == StrategyKind::AdrrsTree; });
}

bool uses_aid(const DepthAssignment &a) {
    return std::any_of(a.begin(), a.end(),
                       [](const Strategy &s) { return s.kind == StrategyKind::AidNrrs; });
}

// One method's mutable state: the film with its pixel-estimate accumulator,
// rate control, and whichever predictors the assignment (plus any search
// candidates) needs. ctx points into the optionals, so instances never move.
struct MethodState {
    DepthAssignment assignment;
    Film film;
    RateControl rc;
    std::optional<OctreeCache> octree;
    std::optional<NeuralRrs> nets;
    StrategyContext ctx;
    bool wants_nets = false;
    bool wants_octree = false;
};

void prepare_method(MethodState &st, const RunConfig &cfg, const std::string &strategy_spec,
                    std::span<const Strategy> extra = {}) {
    st.assignment = parse_assignment_spec(strategy_spec, cfg.max_depth);
    DepthAssignment all = st.assignment;
    all.insert(all.end(), extra.begin(), extra.end());

    st.film = Film(cfg.width, cfg.height);
    st.rc.enabled = cfg.rate_control;
    st.rc.f_rate = cfg.f_rate;
    st.wants_nets = uses_nets(all);
    st.wants_octree = uses_octree(all);
    if (st.wants_octree) {
        st.octree.emplace(AABB{Vec3f::Zero(), Vec3f::Ones()});
        st.ctx.octree = &*st.octree;
    }
    if (st.wants_nets) {
        NeuralRrsConfig ncfg;
        ncfg.variant = uses_aid(all) ? RrsVariant::Aid : RrsVariant::Nrrs;
        ncfg.lr_stat = cfg.lr_stat;
        ncfg.lr_rrs = cfg.lr_rrs;
        ncfg.seed ^= cfg.seed;  // deterministic per run seed
        st.nets.emplace(ncfg);
        if (!cfg.checkpoint_in.empty())
            st.nets->load_checkpoint(cfg.checkpoint_in);
        st.ctx.nets = &*st.nets;
    }
}

TraceConfig make_trace_config(const RunConfig &cfg, uint32_t frame_index, bool collect) {
    TraceConfig tc;
    tc.max_depth = cfg.max_depth;
    tc.seed = cfg.seed;
    tc.frame_index = frame_index;
    tc.threads = cfg.threads;
    tc.collect_training = collect;
    tc.queue_capacity = cfg.queue_capacity;
    return tc;
}

void absorb_events(RunResult &out, const FrameReport &rep) {
    out.report.overflow_events += rep.overflow_events;
    out.report.bias_drop_events += rep.bias_drop_events;
    out.nonfinite_drops += rep.nonfinite_drops;
}

// Online training loop: trace with sample collection, refresh the error
// signal (which also rolls the pixel-estimate accumulator), feed the
// networks and the spatial cache, and finally drop the training frames from
// the film so they never reach the final image.
void train_phase(MethodState &st, const RunConfig &cfg, const Scene &scene, RunResult &out) {
    if (!(st.wants_nets || st.wants_octree) || cfg.train_iters < 1)
        return;
    const int total = cfg.train_iters;
    const int warmup =
        st.wants_nets
            ? std::clamp(static_cast<int>(std::lround(static_cast<double>(cfg.warmup_fraction) *
                                                      total)),
                         0, total)
            : 0;
    // The error filter smooths the variance estimate early on but biases it,
    // so the final 10% of training iterations run unfiltered.
    const int filter_off_from = total - (total + 9) / 10;
    std::vector<TrainSample> samples;
    for (int t = 0; t < total; ++t) {
        samples.clear();
        const TraceConfig tc = make_trace_config(cfg, static_cast<uint32_t>(t), true);
        const FrameReport rep = trace_frame(scene, st.assignment, st.ctx, tc, st.rc, st.film,
                                            &samples);
        out.rays_train += rep.total_rays();
        absorb_events(out, rep);

        const bool filter_on = t < filter_off_from;
        const std::vector<PixelError> errors = update_error_signal(
            cfg.width, cfg.height, st.film.i_acc, st.film.i_cur, st.film.normal, filter_on);
        if (st.wants_nets) {
            const float e_avg = mean_error(errors);
            st.nets->train_frame(samples, errors, e_avg,
                                 t < warmup ? TrainPhase::Warmup : TrainPhase::Full);
            st.nets->publish();
        }
        if (st.wants_octree)
            for (const TrainSample &s : samples)
                st.octree->insert(s.position, s.lo_sample);
        ++out.train_frames;
    }
    st.film.reset_accumulation();
    if (st.wants_octree)
        out.octree_samples = st.octree->total_count();
    if (st.wants_nets)
        out.curve = st.nets->curve();
}

// Measurement loop with frozen predictors. Frame indices continue at
// train_iters regardless of whether training ran, so every method sees the
// same primary rays under a shared seed.
void render_phase(MethodState &st, const RunConfig &cfg, const Scene &scene, RunResult &out) {
    uint64_t rays = 0;
    for (int r = 0; cfg.render_iters < 1 || r < cfg.render_iters; ++r) {
        const TraceConfig tc =
            make_trace_config(cfg, static_cast<uint32_t>(cfg.train_iters + r), false);
        const FrameReport rep = trace_frame(scene, st.assignment, st.ctx, tc, st.rc, st.film,
                                            nullptr);
        st.film.roll_acc();
        rays += rep.total_rays();
        out.camera_rays += rep.camera_rays;
        out.scatter_rays += rep.scatter_rays;
        out.shadow_rays += rep.shadow_rays;
        absorb_events(out, rep);
        ++out.render_frames;
        if (cfg.ray_cap > 0 && rays >= cfg.ray_cap)
            break;
    }
    out.report.rays = rays;
}

void write_curve_csv(const std::string &path, std::span<const NeuralRrs::CurveRow> curve) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail("write_curve_csv: cannot open " + path);
    out << "step,L_StatNet,L_min,L_avg,L_rrs\n";
    for (const auto &row : curve)
        out << row.step << ',' << fmt_float(row.l_stat) << ',' << fmt_float(row.l_min) << ','
            << fmt_float(row.l_avg) << ',' << fmt_float(row.l_rrs) << '\n';
    if (!out)
        fail("write_curve_csv: write failed for " + path);
}

void write_metrics_csv(const std::string &path, std::span<const CompareRow> rows,
                       bool deterministic) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail("write_metrics_csv: cannot open " + path);
    out << "method,relmse,rays,ray_eff_inv,overflow_events,bias_drop_events,train_seconds,"
           "render_seconds\n";
    for (const CompareRow &row : rows) {
        const MetricsReport &m = row.result.report;
        out << '"' << row.method << '"' << ',' << fmt_double(m.relmse) << ',' << m.rays << ','
            << fmt_double(m.ray_eff_inv) << ',' << m.overflow_events << ',' << m.bias_drop_events
            << ',' << fmt_double(deterministic ? 0.0 : m.train_seconds) << ','
            << fmt_double(deterministic ? 0.0 : m.render_seconds) << '\n';
    }
    if (!out)
        fail("write_metrics_csv: write failed for " + path);
}

void write_timing_csv(const std::string &path, std::span<const CompareRow> rows,
                      bool deterministic) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        fail("write_timing_csv: cannot open " + path);
    out << "method,phase,seconds,frames,rays\n";
    for (const CompareRow &row : rows) {
        const RunResult &r = row.result;
        out << '"' << row.method << '"' << ",train,"
            << fmt_double(deterministic ? 0.0 : r.report.train_seconds) << ',' << r.train_frames
            << ',' << r.rays_train << '\n';
        out << '"' << row.method << '"' << ",render,"
            << fmt_double(deterministic ? 0.0 : r.report.render_seconds) << ','
            << r.render_frames << ',' << r.report.rays << '\n';
    }
    if (!out)
        fail("write_timing_csv: write failed for " + path);
}

fs::path reference_path_for(const RunConfig &cfg) {
    return cfg.reference.empty() ? fs::path(cfg.out_dir) / "reference.pfm"
                                 : fs::path(cfg.reference);
}

// Loads the shared reference if present (dimensions must match), otherwise
// renders one with plain path tracing at the larger reference budget and a
// shifted seed so reference noise is independent of the measured runs.
std::vector<Vec3f> ensure_reference(const RunConfig &base, const Scene &scene, bool &generated,
                                    uint64_t &bias_drops) {
    fs::create_directories(base.out_dir);
    const fs::path path = reference_path_for(base);
    if (fs::exists(path)) {
        PfmImage img = read_pfm(path.string());
        if (img.width != base.width || img.height != base.height)
            fail("reference " + path.string() + " is " + std::to_string(img.width) + "x" +
                 std::to_string(img.height) + " but the run is " + std::to_string(base.width) +
                 "x" + std::to_string(base.height));
        generated = false;
        return std::move(img.pixels);
    }

    RunConfig rcfg = base;
    rcfg.strategy = "fixed:1";
    rcfg.render_iters = base.reference_iters;
    rcfg.ray_cap = 0;
    rcfg.seed = base.seed + 1;
    rcfg.checkpoint_in.clear();
    std::fprintf(stderr,
                 "[nrrs] no reference at %s; generating with %d plain path-tracing frames\n",
                 path.string().c_str(), base.reference_iters);
    RunResult rr = run_method(rcfg, scene);
    bias_drops += rr.report.bias_drop_events;
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    write_pfm(path.string(), base.width, base.height, rr.image);
    fs::path ppm = path;
    ppm.replace_extension(".ppm");
    write_ppm(ppm.string(), base.width, base.height, rr.image);
    generated = true;
    return std::move(rr.image);
}

std::vector<Strategy> parse_candidates(const std::string &spec) {
    std::vector<Strategy> out;
    size_t start = 0;
    while (start <= spec.size()) {
        size_t end = spec.find(',', start);
        const std::string token =
            spec.substr(start, end == std::string::npos ? std::string::npos : end - start);
        if (!token.empty())
            out.push_back(parse_strategy(token));
        if (end == std::string::npos)
            break;
        start = end + 1;
    }
    if (out.empty())
        fail("search: empty candidate list");
    return out;
}

}  // namespace

RunResult run_method(const RunConfig &cfg, const Scene &scene, std::span<const Vec3f> reference) {
    validate_config(cfg);
    RunResult out;
    out.width = cfg.width;
    out.height = cfg.height;
    if (!reference.empty() &&
        reference.size() != static_cast<size_t>(cfg.width) * static_cast<size_t>(cfg.height))
        fail("run_method: reference dimensions do not match the run resolution");

    MethodState st;
    prepare_method(st, cfg, cfg.strategy);

    auto t0 = Clock::now();
    train_phase(st, cfg, scene, out);
    out.report.train_seconds = seconds_since(t0);

    t0 = Clock::now();
    render_phase(st, cfg, scene, out);
    out.report.render_seconds = seconds_since(t0);

    out.image = st.film.mean_image();
    if (!reference.empty()) {
        out.report.relmse = relmse(out.image, reference);
        out.report.ray_eff_inv = ray_eff_inv(out.report.rays, out.report.relmse);
    }
    return out;
}

RunResult run_render(const RunConfig &cfg) {
    validate_config(cfg);
    const Scene scene = resolve_scene(cfg.scene);

    std::vector<Vec3f> reference;
    const fs::path rp = reference_path_for(cfg);
    if (fs::exists(rp)) {
        PfmImage img = read_pfm(rp.string());
        if (img.width != cfg.width || img.height != cfg.height)
            fail("reference " + rp.string() + " does not match the run resolution");
        reference = std::move(img.pixels);
    }

    RunResult rr = run_method(cfg, scene, reference);

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    const std::string stem = sanitize_method_name(cfg.strategy);
    write_pfm((dir / (stem + ".pfm")).string(), rr.width, rr.height, rr.image);
    write_ppm((dir / (stem + ".ppm")).string(), rr.width, rr.height, rr.image);
    if (!rr.curve.empty())
        write_curve_csv((dir / ("training_curve_" + stem + ".csv")).string(), rr.curve);

    std::vector<CompareRow> rows;
    rows.push_back(CompareRow{cfg.strategy, stem, std::move(rr)});
    write_metrics_csv((dir / "metrics.csv").string(), rows, cfg.deterministic);
    write_timing_csv((dir / "timing.csv").string(), rows, cfg.deterministic);
    return std::move(rows.front().result);
}

CompareResult run_comparison(const RunConfig &base, std::span<const std::string> methods) {
    validate_config(base);
    if (methods.empty())
        fail("run_comparison: no methods given");
    const Scene scene = resolve_scene(base.scene);

    CompareResult cr;
    cr.reference = ensure_reference(base, scene, cr.reference_generated, cr.bias_drop_events);

    const fs::path dir(base.out_dir);
    std::set<std::string> stems;
    for (const std::string &spec : methods) {
        RunConfig mc = base;
        mc.strategy = spec;
        RunResult rr = run_method(mc, scene, cr.reference);
        cr.bias_drop_events += rr.report.bias_drop_events;

        std::string stem = sanitize_method_name(spec);
        for (int suffix = 2; !stems.insert(stem).second; ++suffix)
            stem = sanitize_method_name(spec) + "_" + std::to_string(suffix);
        write_pfm((dir / (stem + ".pfm")).string(), rr.width, rr.height, rr.image);
        write_ppm((dir / (stem + ".ppm")).string(), rr.width, rr.height, rr.image);
        if (!rr.curve.empty())
            write_curve_csv((dir / ("training_curve_" + stem + ".csv")).string(), rr.curve);
        cr.rows.push_back(CompareRow{spec, stem, std::move(rr)});
    }

    write_metrics_csv((dir / "metrics.csv").string(), cr.rows, base.deterministic);
    write_timing_csv((dir / "timing.csv").string(), cr.rows, base.deterministic);
    return cr;
}

SearchDriverResult run_search(const RunConfig &cfg) {
    validate_config(cfg);
    const Scene scene = resolve_scene(cfg.scene);
    const std::vector<Strategy> candidates = parse_candidates(cfg.candidates);

    SearchDriverResult out;
    bool generated = false;
    const std::vector<Vec3f> reference =
        ensure_reference(cfg, scene, generated, out.bias_drop_events);

    MethodState st;
    prepare_method(st, cfg, cfg.strategy, candidates);
    RunResult train_result;
    train_phase(st, cfg, scene, train_result);
    out.bias_drop_events += train_result.report.bias_drop_events;

    // Probes render one frame at a fixed post-training frame index with a
    // fresh film seeded by the trained pixel estimates, so score differences
    // come from the assignment, not from RNG or accumulator drift.
    ProbeFn probe = [&](const DepthAssignment &assignment) -> ProbeOutcome {
        Film pf(cfg.width, cfg.height);
        pf.i_acc = st.film.i_acc;
        pf.normal = st.film.normal;
        RateControl prc;
        prc.enabled = cfg.rate_control;
        prc.f_rate = cfg.f_rate;
        const TraceConfig tc =
            make_trace_config(cfg, static_cast<uint32_t>(cfg.train_iters), false);
        const auto t0 = Clock::now();
        const FrameReport rep = trace_frame(scene, assignment, st.ctx, tc, prc, pf, nullptr);
        const double dt = seconds_since(t0);
        out.bias_drop_events += rep.bias_drop_events;
        ProbeOutcome po;
        po.relmse = relmse(pf.mean_image(), reference);
        po.rays = rep.total_rays();
        po.seconds = cfg.deterministic ? 0.0 : dt;
        return po;
    };

    SearchOptions so;
    so.max_depth = cfg.max_depth;
    so.segment_depth = cfg.segment_depth;
    so.brute_cap = cfg.brute_cap;
    so.score = (cfg.deterministic || !cfg.score_time) ? ScoreMode::RelMseOnly
                                                      : ScoreMode::RelMseTime;
    fs::create_directories(cfg.out_dir);
    so.log_path = (fs::path(cfg.out_dir) / "search_log.csv").string();
    out.log_path = so.log_path;

    bool brute = false;
    if (cfg.search_mode == "brute") {
        brute = true;
    } else if (cfg.search_mode == "heuristic") {
        brute = false;
    } else {
        const double combos =
            std::pow(static_cast<double>(candidates.size()), static_cast<double>(cfg.max_depth));
        brute = combos <= static_cast<double>(cfg.brute_cap);
    }
    out.search = brute ? brute_force_search(candidates, probe, so)
                       : heuristic_search(candidates, probe, so);

    if (st.wants_nets && !cfg.checkpoint_out.empty())
        st.nets->save_checkpoint(cfg.checkpoint_out);
    return out;
}

RunResult run_train(const RunConfig &cfg) {
    validate_config(cfg);
    const Scene scene = resolve_scene(cfg.scene);
    MethodState st;
    prepare_method(st, cfg, cfg.strategy);
    if (!(st.wants_nets || st.wants_octree))
        fail("train: strategy '" + cfg.strategy + "' has nothing to train");

    RunResult out;
    out.width = cfg.width;
    out.height = cfg.height;
    const auto t0 = Clock::now();
    train_phase(st, cfg, scene, out);
    out.report.train_seconds = seconds_since(t0);

    fs::create_directories(cfg.out_dir);
    if (!out.curve.empty())
        write_curve_csv((fs::path(cfg.out_dir) / "training_curve.csv").string(), out.curve);
    if (st.wants_nets) {
        const std::string path = cfg.checkpoint_out.empty()
                                     ? (fs::path(cfg.out_dir) / "nrrs.ckpt").string()
                                     : cfg.checkpoint_out;
        st.nets->save_checkpoint(path);
        std::fprintf(stderr, "[nrrs] checkpoint saved to %s\n", path.c_str());
    }
    return out;
}

RunResult run_reference(const RunConfig &cfg) {
    RunConfig rcfg = cfg;
    rcfg.strategy = "fixed:1";
    rcfg.render_iters = cfg.reference_iters;
    rcfg.ray_cap = 0;
    rcfg.checkpoint_in.clear();
    validate_config(rcfg);
    const Scene scene = resolve_scene(rcfg.scene);

    RunResult rr = run_method(rcfg, scene);
    fs::create_directories(cfg.out_dir);
    const fs::path path = reference_path_for(cfg);
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    write_pfm(path.string(), rr.width, rr.height, rr.image);
    fs::path ppm = path;
    ppm.replace_extension(".ppm");
    write_ppm(ppm.string(), rr.width, rr.height, rr.image);
    std::fprintf(stderr, "[nrrs] reference written to %s (%d frames)\n", path.string().c_str(),
                 cfg.reference_iters);
    return rr;
}

}  // namespace nrrs
