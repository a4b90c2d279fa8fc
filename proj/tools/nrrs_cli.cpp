// Command-line benchmark harness for the wavefront RRS path tracer.
//
// Subcommands: render, train, search, compare, reference, selftest. Every
// RunConfig field has a flag of the same hyphenated name; a key=value file
// given with --config is applied first, explicit flags override it. Thread
// count can also come from the NRRS_THREADS environment variable when
// --threads is 0. Exit codes: 0 success without bias drops, 1 error, 2 the
// run finished but dropped child paths at a full queue (biased output).
#include "nrrs/config.hpp"
#include "nrrs/imageio.hpp"
#include "nrrs/metrics.hpp"
#include "nrrs/rrs.hpp"
#include "nrrs/runner.hpp"
#include "nrrs/scene.hpp"
#include "nrrs/wavefront.hpp"

#include <CLI11.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace {

using namespace nrrs;

// The config file must be applied before flag binding so that explicit
// flags override it, so --config is located with a manual pre-scan.
std::string find_config_argument(int argc, char **argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc)
            return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0)
            return arg.substr(9);
    }
    return {};
}

void add_run_flags(CLI::App *sub, RunConfig &cfg, std::string &config_path) {
    sub->add_option("--config", config_path,
                    "key=value config file applied before any flags");
    sub->add_option("--scene", cfg.scene,
                    "builtin scene (cornell, furnace, caustic) or scene file path");
    sub->add_option("--strategy", cfg.strategy,
                    "RRS strategy: one name, or a comma list with one entry per depth "
                    "(fixed[:v], throughput, adrrs-tree, adrrs-nn, nrrs, aid-nrrs)");
    sub->add_option("--max-depth", cfg.max_depth, "maximum path depth B");
    sub->add_option("--width", cfg.width, "image width in pixels");
    sub->add_option("--height", cfg.height, "image height in pixels");
    sub->add_option("--seed", cfg.seed, "RNG seed shared by all phases");
    sub->add_option("--train-iters", cfg.train_iters, "training-phase frames");
    sub->add_option("--warmup-fraction", cfg.warmup_fraction,
                    "leading fraction of training frames run in warmup");
    sub->add_option("--lr-stat", cfg.lr_stat, "StatNet Adam learning rate");
    sub->add_option("--lr-rrs", cfg.lr_rrs, "RRSNet Adam learning rate");
    sub->add_option("--render-iters", cfg.render_iters,
                    "rendering-phase frames (0 = use the ray cap alone)");
    sub->add_option("--ray-cap", cfg.ray_cap,
                    "stop rendering once this many rays were traced (0 = off)");
    sub->add_option("--f-rate", cfg.f_rate, "rate-control safety factor");
    sub->add_flag("--rate-control,!--no-rate-control", cfg.rate_control,
                  "enable queue rate control");
    sub->add_option("--queue-capacity", cfg.queue_capacity,
                    "work-queue capacity override (0 = Npx + ceil(Npx/8))");
    sub->add_option("--threads", cfg.threads,
                    "worker threads (0 = NRRS_THREADS or hardware concurrency)");
    sub->add_option("--out-dir", cfg.out_dir, "output directory");
    sub->add_option("--reference", cfg.reference,
                    "reference PFM path (default <out-dir>/reference.pfm)");
    sub->add_option("--reference-iters", cfg.reference_iters,
                    "frames used when a missing reference must be generated");
    sub->add_option("--checkpoint-in", cfg.checkpoint_in, "load network weights before running");
    sub->add_option("--checkpoint-out", cfg.checkpoint_out, "save network weights after training");
    sub->add_flag("--deterministic", cfg.deterministic,
                  "zero wall times in CSVs and score probes by RelMSE only");
    sub->add_option("--candidates", cfg.candidates,
                    "comma list of candidate strategies for the search");
    sub->add_option("--segment-depth", cfg.segment_depth, "heuristic segment width T_d");
    sub->add_option("--brute-cap", cfg.brute_cap, "maximum combinations for brute force");
    sub->add_option("--search-mode", cfg.search_mode, "auto, brute, or heuristic");
    sub->add_flag("--score-time,!--no-score-time", cfg.score_time,
                  "probe score is RelMSE times seconds (otherwise RelMSE alone)");
}

void print_report(const char *label, const RunResult &r) {
    std::printf("%s: relmse=%.6g rays=%" PRIu64 " ray_eff_inv=%.6g overflow=%u bias_drops=%" PRIu64
                " train=%.2fs render=%.2fs\n",
                label, r.report.relmse, r.report.rays, r.report.ray_eff_inv,
                r.report.overflow_events, r.report.bias_drop_events, r.report.train_seconds,
                r.report.render_seconds);
}

int run_selftest() {
    int failures = 0;
    auto check = [&](bool ok, const char *what) {
        std::printf("selftest %-42s %s\n", what, ok ? "ok" : "FAILED");
        if (!ok)
            ++failures;
    };

    check(queue_capacity_for(64) == 72, "queue capacity 64 -> 72");

    {
        const float q = 1.3f;
        double sum = 0.0;
        const int n = 200000;
        for (int i = 0; i < n; ++i) {
            RngStream rng(123, static_cast<uint64_t>(i));
            sum += stochastic_round(q, rng.next_float());
        }
        const double mean = sum / n;
        const double se = std::sqrt(0.3 * 0.7 / n);
        check(std::abs(mean - q) < 4.0 * se, "stochastic rounding unbiased");
    }

    {
        std::vector<float> qs(1000);
        for (size_t i = 0; i < qs.size(); ++i) {
            RngStream rng(77, i);
            qs[i] = rng.next_float() * 4.0f;
        }
        normalize_factors(qs, static_cast<uint32_t>(qs.size()));
        double sum = 0.0;
        for (float q : qs)
            sum += q;
        check(std::abs(sum - 1000.0) < 1e-2, "normalization hits the pixel budget");
    }

    {
        namespace fs = std::filesystem;
        const fs::path dir = fs::temp_directory_path() / "nrrs_selftest";
        fs::create_directories(dir);
        const std::string path = (dir / "probe.pfm").string();
        std::vector<Vec3f> img(8 * 8);
        for (size_t i = 0; i < img.size(); ++i)
            img[i] = Vec3f(static_cast<float>(i), -1.5f, 1e-6f);
        write_pfm(path, 8, 8, img);
        PfmImage back = read_pfm(path);
        bool same = back.width == 8 && back.height == 8;
        for (size_t i = 0; same && i < img.size(); ++i)
            same = (back.pixels[i].array() == img[i].array()).all();
        check(same, "PFM roundtrip");
        fs::remove_all(dir);
    }

    {
        const Scene scene = make_furnace_scene();
        RunConfig cfg;
        cfg.scene = "furnace";
        cfg.width = 8;
        cfg.height = 8;
        cfg.max_depth = 3;
        cfg.strategy = "fixed:1";
        cfg.render_iters = 64;
        const RunResult r = run_method(cfg, scene);
        // Truncated geometric series: emission * (1 + a + a^2) for B = 3.
        const double expected = 0.5 * (1.0 + 0.7 + 0.49);
        double mean = 0.0;
        for (const auto &p : r.image)
            mean += (p[0] + p[1] + p[2]) / 3.0;
        mean /= static_cast<double>(r.image.size());
        check(std::abs(mean - expected) < 0.05, "furnace render matches the series");
        check(r.report.rays == r.camera_rays + r.scatter_rays + r.shadow_rays,
              "ray counting conserved");
    }

    std::printf("selftest %s\n", failures == 0 ? "PASSED" : "FAILED");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
    RunConfig cfg;
    std::string config_path;
    std::vector<std::string> methods;

    try {
        const std::string pre = find_config_argument(argc, argv);
        if (!pre.empty())
            load_config_file(cfg, pre);
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    CLI::App app{"Wavefront path tracer with normalized Russian roulette and splitting"};
    app.require_subcommand(1);

    CLI::App *render = app.add_subcommand("render", "Train if the strategy adapts, then render");
    CLI::App *train = app.add_subcommand("train", "Training phase only; saves a checkpoint");
    CLI::App *search = app.add_subcommand("search", "Mix-Depth search over per-depth strategies");
    CLI::App *compare = app.add_subcommand("compare", "Run several methods against one reference");
    CLI::App *reference = app.add_subcommand("reference", "Render a plain path-traced reference");
    CLI::App *selftest = app.add_subcommand("selftest", "Quick internal consistency checks");

    for (CLI::App *sub : {render, train, search, compare, reference})
        add_run_flags(sub, cfg, config_path);
    compare->add_option("--method", methods,
                        "strategy spec to compare; repeat the flag for each method");

    CLI11_PARSE(app, argc, argv);

    try {
        uint64_t bias_drops = 0;
        if (selftest->parsed())
            return run_selftest();
        if (render->parsed()) {
            const RunResult r = run_render(cfg);
            print_report(cfg.strategy.c_str(), r);
            bias_drops = r.report.bias_drop_events;
        } else if (train->parsed()) {
            const RunResult r = run_train(cfg);
            std::printf("train: frames=%d rays=%" PRIu64 " seconds=%.2f curve_rows=%zu\n",
                        r.train_frames, r.rays_train, r.report.train_seconds, r.curve.size());
            bias_drops = r.report.bias_drop_events;
        } else if (search->parsed()) {
            const SearchDriverResult s = run_search(cfg);
            std::printf("search: best=\"%s\" score=%.6g probes=%d log=%s\n",
                        assignment_name(s.search.best).c_str(), s.search.best_score,
                        s.search.probes, s.log_path.c_str());
            bias_drops = s.bias_drop_events;
        } else if (compare->parsed()) {
            if (methods.empty())
                methods = {"fixed:1", "nrrs", "aid-nrrs"};
            const CompareResult c = run_comparison(cfg, methods);
            for (const CompareRow &row : c.rows)
                print_report(row.method.c_str(), row.result);
            bias_drops = c.bias_drop_events;
        } else if (reference->parsed()) {
            const RunResult r = run_reference(cfg);
            std::printf("reference: frames=%d rays=%" PRIu64 "\n", r.render_frames,
                        r.report.rays);
            bias_drops = r.report.bias_drop_events;
        }
        if (bias_drops > 0) {
            std::fprintf(stderr,
                         "[nrrs] %" PRIu64
                         " child paths were dropped at full queues; the output is biased\n",
                         bias_drops);
            return 2;
        }
        return 0;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
