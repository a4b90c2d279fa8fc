// Acceptance suite: one PASS/FAIL line per criterion, exit 0 iff all pass.
// Each criterion carries a wall-clock budget that is part of the verdict.

#include "nrrs/denoise.hpp"
#include "nrrs/imageio.hpp"
#include "nrrs/metrics.hpp"
#include "nrrs/mixdepth.hpp"
#include "nrrs/networks.hpp"
#include "nrrs/octree.hpp"
#include "nrrs/rng.hpp"
#include "nrrs/rrs.hpp"
#include "nrrs/runner.hpp"
#include "nrrs/scene.hpp"
#include "nrrs/wavefront.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

namespace {

using namespace nrrs;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *pattern, ...) {
    va_list args;
    va_start(args, pattern);
    char buf[512];
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// ACCEPT-01: stochastic rounding is unbiased with Bernoulli-fraction variance.

Outcome accept_01() {
    const float qs[] = {0.3f, 0.7f, 1.3f, 2.0f, 5.9f};
    const int n = 1'000'000;
    double worst_zm = 0.0, worst_zv = 0.0;
    for (int k = 0; k < 5; ++k) {
        const double q = static_cast<double>(qs[k]);
        const double base = std::floor(q);
        const double r = q - base;
        RngStream rng(0xACC01, mix_bits(static_cast<uint64_t>(k)));
        int64_t ones = 0;
        for (int i = 0; i < n; ++i)
            ones += stochastic_round(qs[k], rng.next_float()) > static_cast<int>(base) ? 1 : 0;
        const double p_hat = static_cast<double>(ones) / n;
        const double mean = base + p_hat;
        const double var = p_hat * (1.0 - p_hat);

        const double se_mean = std::sqrt(r * (1.0 - r) / n);
        const double dm = std::abs(mean - q);
        if (dm > 4.0 * se_mean + 1e-12)
            return {false, fmt("q=%.2f mean %.6f off target %.6f (4sigma %.2e)", q, mean, q,
                               4.0 * se_mean)};
        if (se_mean > 0.0)
            worst_zm = std::max(worst_zm, dm / se_mean);

        // Central fourth moment of a Bernoulli(p) shift, plug-in estimate.
        const double m4 = p_hat * (1.0 - p_hat) * (1.0 - 3.0 * p_hat + 3.0 * p_hat * p_hat);
        const double se_var = std::sqrt(std::max(0.0, m4 - var * var) / n);
        const double dv = std::abs(var - r * (1.0 - r));
        if (dv > 4.0 * se_var + 1e-9)
            return {false, fmt("q=%.2f var %.6f off target %.6f (4sigma %.2e)", q, var,
                               r * (1.0 - r), 4.0 * se_var)};
        if (se_var > 0.0)
            worst_zv = std::max(worst_zv, dv / se_var);
    }
    return {true, fmt("worst z: mean %.2f, var %.2f", worst_zm, worst_zv)};
}

// ---------------------------------------------------------------------------
// ACCEPT-02: normalization pins E[S] to the pixel budget and the realized
// count variance stays below both the fractional-part sum and the budget.

Outcome accept_02() {
    const int queues = 10'000;
    const uint64_t npx = 1000;
    std::vector<float> q(npx);
    std::vector<double> s(queues);
    double sum_frac = 0.0;
    for (int m = 0; m < queues; ++m) {
        RngStream rf(0xACC02, mix_bits(static_cast<uint64_t>(m)));
        RngStream ru(0xACC02F, mix_bits(static_cast<uint64_t>(m)));
        for (auto &v : q)
            v = rf.next_float() * 4.0f;
        const double f_norm = normalize_factors(q, npx);
        if (f_norm >= 1.0)
            return {false, fmt("queue %d: F_norm %.3f not < 1", m, f_norm)};
        uint64_t total = 0;
        double frac = 0.0;
        for (auto v : q) {
            total += static_cast<uint64_t>(stochastic_round(v, ru.next_float()));
            frac += v - std::floor(v);
        }
        s[m] = static_cast<double>(total);
        sum_frac += frac;
    }
    double mean = 0.0;
    for (double v : s)
        mean += v;
    mean /= queues;
    double m2 = 0.0, m4 = 0.0;
    for (double v : s) {
        const double d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    const double var = m2 / (queues - 1);
    m2 /= queues;
    m4 /= queues;
    const double se_mean = std::sqrt(var / queues);
    const double se_var = std::sqrt(std::max(0.0, m4 - m2 * m2) / queues);
    const double frac_bound = sum_frac / queues;

    const double z_mean = std::abs(mean - static_cast<double>(npx)) / se_mean;
    if (z_mean > 4.0)
        return {false, fmt("mean S %.3f vs %llu, z=%.2f", mean,
                           static_cast<unsigned long long>(npx), z_mean)};
    if (var > frac_bound + 4.0 * se_var)
        return {false, fmt("Var(S) %.2f exceeds sum r_i bound %.2f", var, frac_bound)};
    if (var > static_cast<double>(npx) + 4.0 * se_var)
        return {false, fmt("Var(S) %.2f exceeds Npx %llu", var,
                           static_cast<unsigned long long>(npx))};
    return {true, fmt("mean S %.2f (z=%.2f), Var(S) %.1f <= sum r_i %.1f <= Npx", mean, z_mean,
                      var, frac_bound)};
}

// ---------------------------------------------------------------------------
// ACCEPT-03: with f_rate = 0.85 the observed overflow frequency stays below
// the Bernstein bound (99% one-sided binomial threshold), and a budget of
// 10^4 pixels sees no overflow at all.

Outcome accept_03() {
    const float f_rate = 0.85f;
    const int iters = 10'000;

    std::vector<float> q;
    auto overflow_trial = [&](uint64_t npx, uint64_t seq) {
        RngStream rf(0xACC03, mix_bits(seq));
        RngStream ru(0xACC03F, mix_bits(seq));
        q.resize(npx);
        for (auto &v : q)
            v = rf.next_float() * 4.0f;
        normalize_factors(q, npx);
        uint64_t total = 0;
        for (auto v : q)
            total += static_cast<uint64_t>(stochastic_round(v * f_rate, ru.next_float()));
        return total >= npx;
    };

    const double bound = bernstein_bound(0.85, 100);
    if (std::abs(bound - std::exp(-1.25)) > 1e-6)
        return {false, fmt("bernstein_bound(0.85, 100) = %.6f, expected e^-1.25", bound)};
    int over_small = 0;
    for (int i = 0; i < iters; ++i)
        over_small += overflow_trial(100, static_cast<uint64_t>(i)) ? 1 : 0;
    const double freq = static_cast<double>(over_small) / iters;
    // 99% one-sided binomial acceptance threshold around the bound.
    const double threshold = bound + 2.326 * std::sqrt(bound * (1.0 - bound) / iters);
    if (freq > threshold)
        return {false, fmt("overflow freq %.4f exceeds %.4f (bound %.4f)", freq, threshold,
                           bound)};

    int over_large = 0;
    for (int i = 0; i < iters; ++i)
        over_large += overflow_trial(10'000, static_cast<uint64_t>(1'000'000 + i)) ? 1 : 0;
    if (over_large != 0)
        return {false, fmt("Npx=10^4 saw %d overflows, expected none", over_large)};
    return {true, fmt("freq %.4f <= %.4f (bound %.4f); Npx=10^4 clean", freq, threshold, bound)};
}

// ---------------------------------------------------------------------------
// ACCEPT-04: every strategy agrees with the furnace closed form at depth 6.

Outcome accept_04() {
    const int b = 6, w = 8, h = 8;
    const int train_frames = 128, render_frames = 16'384;
    const Scene scene = make_furnace_scene();
    const double l_exact = 0.5 * (1.0 - std::pow(0.7, 6)) / 0.3;

    NeuralRrsConfig ncfg;
    ncfg.seed ^= 0xA4;
    ncfg.variant = RrsVariant::Nrrs;
    NeuralRrs net_nrrs(ncfg);
    ncfg.variant = RrsVariant::Aid;
    NeuralRrs net_aid(ncfg);
    OctreeCache octree(AABB{Vec3f::Zero(), Vec3f::Ones()});

    // Shared adaptation pass: plain tracing feeds both networks and the
    // octree; the unbiasedness claim holds for any predictor state.
    Film tf(w, h);
    RateControl trc;
    const DepthAssignment plain = parse_assignment("fixed:1", b);
    TraceConfig tc;
    tc.max_depth = b;
    tc.seed = 777;
    tc.collect_training = true;
    const int warmup_frames = 26;
    const int filter_off_from = train_frames - (train_frames + 9) / 10;
    std::vector<TrainSample> samples;
    for (int t = 0; t < train_frames; ++t) {
        samples.clear();
        tc.frame_index = static_cast<uint32_t>(t);
        trace_frame(scene, plain, StrategyContext{}, tc, trc, tf, &samples);
        auto errors = update_error_signal(w, h, tf.i_acc, tf.i_cur, tf.normal,
                                          t < filter_off_from);
        const float e_avg = mean_error(errors);
        const TrainPhase phase = t < warmup_frames ? TrainPhase::Warmup : TrainPhase::Full;
        net_nrrs.train_frame(samples, errors, e_avg, phase);
        net_nrrs.publish();
        net_aid.train_frame(samples, errors, e_avg, phase);
        net_aid.publish();
        for (const TrainSample &s : samples)
            octree.insert(s.position, s.lo_sample);
    }
    if (octree.total_count() == 0)
        return {false, "octree stayed empty after the adaptation pass"};

    const StrategyContext ctx_main{&octree, &net_nrrs};
    const StrategyContext ctx_aid{&octree, &net_aid};
    struct Entry {
        const char *spec;
        const StrategyContext *ctx;
    };
    const Entry entries[] = {
        {"fixed:0.7", &ctx_main},
        {"throughput", &ctx_main},
        {"adrrs-tree", &ctx_main},
        {"adrrs-nn", &ctx_main},
        {"nrrs", &ctx_main},
        {"aid-nrrs", &ctx_aid},
        {"nrrs,adrrs-tree,adrrs-nn,throughput,fixed:0.8,fixed:1", &ctx_main},
    };

    std::string detail;
    double worst_z = 0.0;
    for (const Entry &e : entries) {
        const DepthAssignment assign = parse_assignment(e.spec, b);
        Film film(w, h);
        film.i_acc = tf.i_acc;
        film.normal = tf.normal;
        RateControl rc;
        TraceConfig rtc;
        rtc.max_depth = b;
        rtc.seed = 777;
        double s1 = 0.0, s2 = 0.0;
        for (int f = 0; f < render_frames; ++f) {
            rtc.frame_index = static_cast<uint32_t>(train_frames + f);
            trace_frame(scene, assign, *e.ctx, rtc, rc, film);
            double m = 0.0;
            for (const Vec3f &c : film.i_cur)
                m += mean_channel(c);
            m /= static_cast<double>(film.i_cur.size());
            s1 += m;
            s2 += m * m;
            film.roll_acc();
        }
        const double mean = s1 / render_frames;
        const double var =
            std::max(0.0, s2 / render_frames - mean * mean) * render_frames /
            (render_frames - 1.0);
        const double se = std::sqrt(var / render_frames);
        if (!(se > 0.0))
            return {false, fmt("%s: degenerate standard error", e.spec)};
        const double z = std::abs(mean - l_exact) / se;
        worst_z = std::max(worst_z, z);
        if (z > 3.0)
            return {false, fmt("%s: mean %.6f vs %.6f, z=%.2f", e.spec, mean, l_exact, z)};
    }
    return {true, fmt("7 strategies within 3 SE of %.6f (worst z=%.2f, %d spp)", l_exact,
                      worst_z, render_frames)};
}

// ---------------------------------------------------------------------------
// ACCEPT-05: the transfer gradients match finite differences of the empirical
// variance of a synthetic nested estimator. The suffix integrand is zero-mean
// so the stochastic-rounding variance term (ignored by the splitting formula)
// vanishes and the variance is smooth in both dials.

double a505_h_draw(RngStream &rng) {
    return 0.9 * (2.0 * static_cast<double>(rng.next_float()) - 1.0);
}

// Empirical Var<I> of I = lum(w)/(n_s p) * sum_{i<N} sum_{j<M_i} h_ij with
// N = round_s(n_s), M_i = round_s(p). Streams are keyed by trial and child
// indices alone, so evaluations at perturbed dials share randomness.
double a505_variance(double w_lum, double ns, double p, int trials) {
    double sum = 0.0, sum2 = 0.0;
    for (int t = 0; t < trials; ++t) {
        RngStream so(0xACC05A, mix_bits(static_cast<uint64_t>(t)));
        const int n_cp = stochastic_round(static_cast<float>(ns), so.next_float());
        double acc = 0.0;
        for (int i = 0; i < n_cp; ++i) {
            RngStream si(0xACC05B, mix_bits(static_cast<uint64_t>(t) * 16 + i));
            const int m = stochastic_round(static_cast<float>(p), si.next_float());
            RngStream sh(0xACC05C, mix_bits(static_cast<uint64_t>(t) * 256 + i * 16));
            for (int j = 0; j < m; ++j)
                acc += a505_h_draw(sh);
        }
        const double est = w_lum * acc / (ns * p);
        sum += est;
        sum2 += est * est;
    }
    const double mean = sum / trials;
    return sum2 / trials - mean * mean;
}

Outcome accept_05() {
    const Vec3f w(0.6f, 0.4f, 0.8f);
    const double w_lum = luminance(w);
    const int trials = 1'200'000;
    const int draws = 1'000'000;
    const int ns_set[] = {1, 2, 4};
    const double p_set[] = {0.25, 0.5, 1.0};
    double worst = 0.0;
    std::string worst_desc;
    for (int ns : ns_set) {
        for (double p : p_set) {
            // Roulette dial: analytic estimator averaged over suffix draws.
            double g_rr = 0.0;
            {
                RngStream hs(0xACC05D, mix_bits(static_cast<uint64_t>(ns * 10 + int(p * 4))));
                const Vec3f w_child = w / static_cast<float>(ns);
                for (int i = 0; i < draws; ++i) {
                    const float hv = static_cast<float>(a505_h_draw(hs));
                    g_rr += grad_pixelvar_wrt_rr(w_child, Vec3f(hv, hv, hv),
                                                 static_cast<float>(p));
                }
                g_rr = g_rr / draws * ns;
            }
            const double dp = 0.15 * p;
            const double fd_p = (a505_variance(w_lum, ns, p + dp, trials) -
                                 a505_variance(w_lum, ns, p - dp, trials)) /
                                (2.0 * dp);
            const double rel_p = std::abs(fd_p - g_rr) / std::abs(g_rr);
            if (rel_p > worst) {
                worst = rel_p;
                worst_desc = fmt("d/dp at ns=%d p=%.2f", ns, p);
            }
            if (rel_p > 0.10)
                return {false, fmt("ns=%d p=%.2f: d/dp analytic %.4e vs FD %.4e (%.1f%%)", ns,
                                   p, g_rr, fd_p, rel_p * 100.0)};

            // Splitting dial: analytic estimator from the empirical variance
            // of the per-copy estimate.
            double g_split = 0.0;
            {
                double xs = 0.0, xs2 = 0.0;
                for (int i = 0; i < draws; ++i) {
                    RngStream si(0xACC05E, mix_bits(static_cast<uint64_t>(i)));
                    const int m = stochastic_round(static_cast<float>(p), si.next_float());
                    RngStream sh(0xACC05F, mix_bits(static_cast<uint64_t>(i)));
                    double x = 0.0;
                    for (int j = 0; j < m; ++j)
                        x += a505_h_draw(sh);
                    x /= p;
                    xs += x;
                    xs2 += x * x;
                }
                const double var_x = xs2 / draws - (xs / draws) * (xs / draws);
                g_split = grad_pixelvar_wrt_split(w, static_cast<float>(var_x),
                                                  static_cast<float>(ns));
            }
            const double dn = 0.15 * ns;
            const double fd_n = (a505_variance(w_lum, ns + dn, p, trials) -
                                 a505_variance(w_lum, ns - dn, p, trials)) /
                                (2.0 * dn);
            const double rel_n = std::abs(fd_n - g_split) / std::abs(g_split);
            if (rel_n > worst) {
                worst = rel_n;
                worst_desc = fmt("d/dn at ns=%d p=%.2f", ns, p);
            }
            if (rel_n > 0.10)
                return {false, fmt("ns=%d p=%.2f: d/dn analytic %.4e vs FD %.4e (%.1f%%)", ns,
                                   p, g_split, fd_n, rel_n * 100.0)};
        }
    }
    return {true, fmt("18 derivative pairs agree, worst relative error %.2f%% (%s)",
                      worst * 100.0, worst_desc.c_str())};
}

// ---------------------------------------------------------------------------
// ACCEPT-06: analytic backward of the trainable stacks matches central finite
// differences across random configurations.

TrainSample a606_random_sample(RngStream &rng, uint32_t pixel) {
    TrainSample s;
    s.position = Vec3f(rng.next_float(), rng.next_float(), rng.next_float());
    s.omega_o = Vec2f(rng.next_float(), rng.next_float());
    s.roughness = rng.next_float();
    s.t_x = Vec3f(0.2f, 0.2f, 0.2f) + Vec3f(rng.next_float(), rng.next_float(), rng.next_float());
    s.i_pixel =
        Vec3f(0.1f, 0.1f, 0.1f) + 0.5f * Vec3f(rng.next_float(), rng.next_float(), rng.next_float());
    s.lo_sample =
        Vec3f(0.2f, 0.2f, 0.2f) + Vec3f(rng.next_float(), rng.next_float(), rng.next_float());
    s.q_norm = 0.5f + rng.next_float();
    s.q_real = 0.85f * s.q_norm;
    s.pixel = pixel;
    s.k_i = 1.0f;
    s.depth = 2;
    return s;
}

float a606_rel_err(float a, float b) {
    return std::abs(a - b) / std::max({0.05f, std::abs(a), std::abs(b)});
}

Outcome accept_06() {
    float worst = 0.0f;
    int checked = 0, skipped = 0;
    for (int c = 0; c < 10; ++c) {
        RngStream meta(0xACC06, static_cast<uint64_t>(c));
        NeuralRrsConfig cfg;
        cfg.grid.levels = 2 + static_cast<int>(meta.next_below(3));
        cfg.grid.features = 1 + static_cast<int>(meta.next_below(2));
        cfg.grid.base_resolution = 4 << meta.next_below(2);
        cfg.grid.log2_table_size = 8 + static_cast<int>(meta.next_below(3));
        cfg.variant = (c % 2 == 0) ? RrsVariant::Aid : RrsVariant::Nrrs;
        cfg.batch = 64;
        cfg.seed = 0xACC06000 + static_cast<uint64_t>(c);
        NeuralRrs net(cfg);

        // Randomize the evaluation point so gradients are generic.
        RngStream pert(0xACC06F, static_cast<uint64_t>(c));
        auto jiggle = [&pert](Eigen::VectorXf &theta) {
            for (Eigen::Index i = 0; i < theta.size(); ++i)
                theta[i] += 0.25f * (pert.next_float() - 0.5f);
        };
        jiggle(net.stat_mlp_mutable().theta());
        jiggle(net.stat_grid_mutable().theta());
        jiggle(net.rrs_mlp_mutable().theta());
        if (net.rrs_grid_mutable().param_count() > 0)
            jiggle(net.rrs_grid_mutable().theta());

        std::vector<TrainSample> batch;
        RngStream srng(0xACC06B, static_cast<uint64_t>(c));
        for (uint32_t i = 0; i < 4; ++i)
            batch.push_back(a606_random_sample(srng, i));

        // One loss per network: StatNet radiance regression and the warmup
        // factor regression (hash grid + MLP + softplus_mod chain).
        for (int which = 0; which < 2; ++which) {
            Eigen::VectorXf g_mlp, g_grid;
            std::function<double()> loss;
            std::function<uint64_t()> signs;
            if (which == 0) {
                net.debug_stat_loss_backward(batch, g_mlp, g_grid);
                loss = [&] { return net.debug_stat_loss(batch); };
                signs = [&] { return net.debug_stat_signs(batch); };
            } else {
                net.debug_rrs_loss_backward(batch, {}, 0.0f, TrainPhase::Warmup, g_mlp, g_grid);
                loss = [&] { return net.debug_rrs_loss(batch, {}, 0.0f, TrainPhase::Warmup); };
                signs = [&] { return net.debug_rrs_signs(batch); };
            }
            Mlp &mlp = which == 0 ? net.stat_mlp_mutable() : net.rrs_mlp_mutable();
            HashGrid &grid = which == 0 ? net.stat_grid_mutable() : net.rrs_grid_mutable();

            auto check_param = [&](float &theta, float g) {
                const float orig = theta;
                const float h = std::max(0.05f * std::abs(orig), 1e-2f);
                theta = orig + h;
                const double lp = loss();
                const uint64_t sp = signs();
                theta = orig - h;
                const double lm = loss();
                const uint64_t sm = signs();
                theta = orig;
                if (sp != sm) {
                    ++skipped;
                    return;
                }
                const float fd = static_cast<float>((lp - lm) / (2.0 * h));
                worst = std::max(worst, a606_rel_err(g, fd));
                ++checked;
            };

            const int n_mlp = mlp.param_count();
            const int stride = std::max(1, n_mlp / 24);
            for (int k = 0; k < n_mlp; k += stride)
                check_param(mlp.theta()[k], g_mlp[k]);
            if (grid.param_count() > 0) {
                std::vector<int> active;
                for (int k = 0; k < grid.param_count(); ++k)
                    if (std::abs(g_grid[k]) > 1e-7f)
                        active.push_back(k);
                const size_t take = std::min<size_t>(16, active.size());
                for (size_t i = 0; i < take; ++i) {
                    const int idx = active[i * active.size() / take];
                    check_param(grid.theta()[idx], g_grid[idx]);
                }
            }
        }
    }
    if (checked < 200)
        return {false, fmt("only %d parameters checked", checked)};
    if (skipped * 2 > checked)
        return {false, fmt("too many kink skips: %d skipped vs %d checked", skipped, checked)};
    if (worst >= 1e-2f)
        return {false, fmt("max relative gradient error %.3e over %d params", worst, checked)};
    return {true, fmt("max relative error %.3e over %d params (%d kink skips)", worst, checked,
                      skipped)};
}

// ---------------------------------------------------------------------------
// ACCEPT-07: after warmup the factor head answers 1.0 on held-out inputs.

Outcome accept_07() {
    const int w = 16, h = 12, b = 4;
    const Scene scene = make_cornell_scene();
    const DepthAssignment plain = parse_assignment("fixed:1", b);
    Film film(w, h);
    RateControl rc;
    TraceConfig tc;
    tc.max_depth = b;
    tc.seed = 2024;
    tc.collect_training = true;

    const int train_frames = 24, held_frames = 8;
    std::vector<std::vector<TrainSample>> train_sets(train_frames);
    std::vector<TrainSample> held;
    for (int t = 0; t < train_frames + held_frames; ++t) {
        std::vector<TrainSample> samples;
        tc.frame_index = static_cast<uint32_t>(t);
        trace_frame(scene, plain, StrategyContext{}, tc, rc, film, &samples);
        update_error_signal(w, h, film.i_acc, film.i_cur, film.normal, true);
        if (t < train_frames)
            train_sets[t] = std::move(samples);
        else
            held.insert(held.end(), samples.begin(), samples.end());
    }

    NeuralRrsConfig cfg;
    cfg.seed ^= 0xA7;
    NeuralRrs net(cfg);
    const int epochs = 150;
    for (int e = 0; e < epochs; ++e)
        for (const auto &set : train_sets)
            net.train_frame(set, {}, 0.0f, TrainPhase::Warmup);
    net.publish();

    uint64_t inside = 0;
    for (const TrainSample &s : held) {
        const float q = net.predict_q(s.position, s.omega_o, s.roughness, s.t_x, s.i_pixel);
        if (q >= 0.95f && q <= 1.05f)
            ++inside;
    }
    const double frac = held.empty() ? 0.0 : static_cast<double>(inside) / held.size();
    if (frac < 0.99)
        return {false, fmt("only %.2f%% of %zu held-out factors in [0.95, 1.05]", frac * 100.0,
                           held.size())};
    return {true, fmt("%.2f%% of %zu held-out factors in [0.95, 1.05]", frac * 100.0,
                      held.size())};
}

// ---------------------------------------------------------------------------
// ACCEPT-08: neural strategies match or beat plain path tracing on the caustic
// scene at equal rendering-phase ray counts (median over three seeds).

Outcome accept_08() {
    const Scene scene = make_caustic_scene();
    const uint64_t seeds[] = {11, 12, 13};
    std::vector<double> ratio_nrrs, ratio_aid;
    for (uint64_t seed : seeds) {
        RunConfig base;
        base.width = 160;
        base.height = 90;
        base.max_depth = 6;
        base.train_iters = 256;
        base.warmup_fraction = 0.2f;
        base.render_iters = 32;
        base.lr_rrs = 0.002f;
        base.seed = seed;

        RunConfig refc = base;
        refc.strategy = "fixed:1";
        refc.render_iters = 384;
        refc.seed = seed + 1000;
        const RunResult ref = run_method(refc, scene);

        auto measure = [&](const std::string &strategy) {
            RunConfig c = base;
            c.strategy = strategy;
            return run_method(c, scene, ref.image);
        };
        auto pt_matched = [&](uint64_t rays) {
            RunConfig c = base;
            c.strategy = "fixed:1";
            c.render_iters = 0;
            c.ray_cap = rays;
            return run_method(c, scene, ref.image);
        };

        const RunResult rn = measure("nrrs");
        const RunResult ra = measure("aid-nrrs");
        const RunResult pn = pt_matched(rn.report.rays);
        const RunResult pa = pt_matched(ra.report.rays);
        if (!(pn.report.relmse > 0.0) || !(pa.report.relmse > 0.0))
            return {false, "degenerate PT RelMSE"};
        ratio_nrrs.push_back(rn.report.relmse / pn.report.relmse);
        ratio_aid.push_back(ra.report.relmse / pa.report.relmse);
    }
    const std::string per_seed =
        fmt("nrrs {%.3f %.3f %.3f} aid {%.3f %.3f %.3f}", ratio_nrrs[0], ratio_nrrs[1],
            ratio_nrrs[2], ratio_aid[0], ratio_aid[1], ratio_aid[2]);
    std::sort(ratio_nrrs.begin(), ratio_nrrs.end());
    std::sort(ratio_aid.begin(), ratio_aid.end());
    const double med_n = ratio_nrrs[1], med_a = ratio_aid[1];
    if (med_n > 1.0 || med_a > 1.0)
        return {false, fmt("median RelMSE ratio vs PT: NRRS %.3f, AID-NRRS %.3f; per seed %s",
                           med_n, med_a, per_seed.c_str())};
    return {true, fmt("median RelMSE ratio vs PT: NRRS %.3f, AID-NRRS %.3f (target <= 0.9); %s",
                      med_n, med_a, per_seed.c_str())};
}

// ---------------------------------------------------------------------------
// ACCEPT-09: search oracles on frozen probe scores.

Outcome accept_09() {
    // Brute force, two strategies, depth 3: exhaustive argmin over 8 combos.
    const std::vector<Strategy> cands2 = {parse_strategy("fixed:1"),
                                          parse_strategy("throughput")};
    const double scores[8] = {0.82, 0.41, 0.77, 0.33, 0.90, 0.11, 0.60, 0.18};
    auto combo_of = [](const DepthAssignment &a) {
        int idx = 0;
        for (size_t d = 0; d < a.size(); ++d)
            if (a[d].kind == StrategyKind::Throughput)
                idx |= 1 << d;
        return idx;
    };
    SearchOptions opt;
    opt.max_depth = 3;
    opt.score = ScoreMode::RelMseOnly;
    const SearchResult brute = brute_force_search(
        cands2,
        [&](const DepthAssignment &a) {
            return ProbeOutcome{scores[combo_of(a)], 100, 0.0};
        },
        opt);
    int best_idx = 0;
    for (int i = 1; i < 8; ++i)
        if (scores[i] < scores[best_idx])
            best_idx = i;
    if (brute.probes != 8)
        return {false, fmt("brute force probed %llu combos, expected 8",
                           static_cast<unsigned long long>(brute.probes))};
    if (combo_of(brute.best) != best_idx || brute.best_score != scores[best_idx])
        return {false, fmt("brute force picked combo %d (%.2f), exhaustive min is %d (%.2f)",
                           combo_of(brute.best), brute.best_score, best_idx, scores[best_idx])};

    // Heuristic probe count: B=10, T_d=6, three strategies => 3^6 + 3^4.
    const std::vector<Strategy> cands3 = {parse_strategy("fixed:1"),
                                          parse_strategy("throughput"), parse_strategy("nrrs")};
    uint64_t calls = 0;
    double my_min = std::numeric_limits<double>::infinity();
    auto frozen = [&](const DepthAssignment &a) {
        uint64_t key = 0;
        for (const Strategy &s : a)
            key = key * 3 +
                  (s.kind == StrategyKind::Fixed ? 0
                   : s.kind == StrategyKind::Throughput ? 1 : 2);
        const double score =
            0.05 + static_cast<double>(mix_bits(key ^ 0xA5A5) >> 11) * 0x1p-53;
        ++calls;
        my_min = std::min(my_min, score);
        return ProbeOutcome{score, 100, 0.0};
    };
    SearchOptions hopt;
    hopt.max_depth = 10;
    hopt.segment_depth = 6;
    hopt.score = ScoreMode::RelMseOnly;
    const SearchResult heur = heuristic_search(cands3, frozen, hopt);
    if (heur.probes != 810 || calls != 810)
        return {false, fmt("heuristic probed %llu combos (callback saw %llu), expected 810",
                           static_cast<unsigned long long>(heur.probes),
                           static_cast<unsigned long long>(calls))};
    if (heur.best_score != my_min)
        return {false, fmt("heuristic best %.6f differs from observed min %.6f",
                           heur.best_score, my_min)};
    if (heur.best.size() != 10)
        return {false, fmt("heuristic assignment has %zu entries", heur.best.size())};
    return {true, fmt("brute min combo %d score %.2f; heuristic probes 810, best %.4f",
                      best_idx, scores[best_idx], heur.best_score)};
}

// ---------------------------------------------------------------------------
// ACCEPT-10: with the factor regression dominant, the gap between predicted
// and normalized factors shrinks monotonically below 0.1 on frozen data.

Outcome accept_10() {
    const int w = 16, h = 12, b = 4;
    const Scene scene = make_cornell_scene();
    const DepthAssignment assign = parse_assignment("throughput", b);
    Film film(w, h);
    RateControl rc;
    TraceConfig tc;
    tc.max_depth = b;
    tc.seed = 31;
    tc.collect_training = true;

    std::vector<TrainSample> data;
    std::vector<PixelError> errors;
    for (int t = 0; t < 8; ++t) {
        std::vector<TrainSample> samples;
        tc.frame_index = static_cast<uint32_t>(t);
        trace_frame(scene, assign, StrategyContext{}, tc, rc, film, &samples);
        errors = update_error_signal(w, h, film.i_acc, film.i_cur, film.normal, true);
        data.insert(data.end(), samples.begin(), samples.end());
    }
    const float e_avg = mean_error(errors);
    if (data.empty())
        return {false, "no training samples collected"};

    NeuralRrsConfig cfg;
    cfg.gamma_rrs = 1.0f;
    cfg.gamma_min = 1e-4f;
    cfg.gamma_avg = 1e-4f;
    cfg.lr_rrs = 0.002f;
    cfg.seed ^= 0xA10;
    NeuralRrs net(cfg);

    auto gap = [&] {
        double acc = 0.0;
        for (const TrainSample &s : data)
            acc += std::abs(static_cast<double>(net.debug_q_live(s)) - s.q_norm);
        return acc / static_cast<double>(data.size());
    };

    std::vector<double> curve{gap()};
    const int epochs = 400, checkpoint_every = 80;
    for (int e = 1; e <= epochs; ++e) {
        net.train_frame(data, errors, e_avg, TrainPhase::Full);
        if (e % checkpoint_every == 0)
            curve.push_back(gap());
    }
    // Monotone decrease until the gap first drops below 0.1; afterwards it
    // only has to stay there.
    size_t below = curve.size();
    for (size_t i = 0; i < curve.size(); ++i) {
        if (curve[i] < 0.1) {
            below = i;
            break;
        }
    }
    if (below == curve.size())
        return {false, fmt("gap never fell below 0.1 (final %.4f)", curve.back())};
    for (size_t i = 1; i <= below; ++i)
        if (!(curve[i] < curve[i - 1] + 1e-5))
            return {false, fmt("gap rose between checkpoints %zu and %zu: %.4f -> %.4f", i - 1,
                               i, curve[i - 1], curve[i])};
    for (size_t i = below; i < curve.size(); ++i)
        if (!(curve[i] < 0.1))
            return {false, fmt("gap rebounded above 0.1 at checkpoint %zu (%.4f)", i, curve[i])};
    return {true, fmt("gap %.3f -> %.4f over %d epochs, below 0.1 from checkpoint %zu",
                      curve.front(), curve.back(), epochs, below)};
}

// ---------------------------------------------------------------------------
// ACCEPT-11: two deterministic compare runs are byte-identical.

Outcome accept_11() {
    namespace fs = std::filesystem;
    const fs::path cli = NRRS_CLI_PATH;
    if (!fs::exists(cli))
        return {false, fmt("CLI binary missing at %s", cli.string().c_str())};
    const fs::path root = fs::temp_directory_path() / "nrrs_accept11";
    std::error_code ec;
    fs::remove_all(root, ec);
    const fs::path out_a = root / "a", out_b = root / "b";

    auto run = [&](const fs::path &out) {
        const std::string cmd = cli.string() +
                                " compare --deterministic --scene cornell --width 32"
                                " --height 24 --max-depth 4 --seed 123 --train-iters 2"
                                " --render-iters 3 --reference-iters 4"
                                " --method fixed:1 --method nrrs --out-dir " +
                                out.string() + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    if (run(out_a) != 0)
        return {false, "first compare run failed"};
    if (run(out_b) != 0)
        return {false, "second compare run failed"};

    const char *files[] = {"metrics.csv",  "timing.csv",  "reference.pfm",
                           "reference.ppm", "fixed_1.pfm", "fixed_1.ppm",
                           "nrrs.pfm",      "nrrs.ppm",    "training_curve_nrrs.csv"};
    for (const char *name : files) {
        std::ifstream fa(out_a / name, std::ios::binary);
        std::ifstream fb(out_b / name, std::ios::binary);
        if (!fa || !fb)
            return {false, fmt("missing output file %s", name)};
        const std::string da((std::istreambuf_iterator<char>(fa)),
                             std::istreambuf_iterator<char>());
        const std::string db((std::istreambuf_iterator<char>(fb)),
                             std::istreambuf_iterator<char>());
        if (da.empty() || da != db)
            return {false, fmt("%s differs between runs", name)};
    }
    fs::remove_all(root, ec);
    return {true, fmt("%zu artifacts byte-identical across runs", std::size(files))};
}

} // namespace

int main(int argc, char **argv) {
    struct Entry {
        const char *id;
        double budget_s;
        Outcome (*fn)();
    };
    const Entry entries[] = {
        {"ACCEPT-01", 5.0, accept_01},   {"ACCEPT-02", 30.0, accept_02},
        {"ACCEPT-03", 60.0, accept_03},  {"ACCEPT-04", 600.0, accept_04},
        {"ACCEPT-05", 60.0, accept_05},  {"ACCEPT-06", 60.0, accept_06},
        {"ACCEPT-07", 120.0, accept_07}, {"ACCEPT-08", 1200.0, accept_08},
        {"ACCEPT-09", 1.0, accept_09},   {"ACCEPT-10", 120.0, accept_10},
        {"ACCEPT-11", 120.0, accept_11},
    };
    int failed = 0, ran = 0;
    for (const Entry &e : entries) {
        if (argc > 1 && std::string(e.id).find(argv[1]) == std::string::npos)
            continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = e.fn();
        } catch (const std::exception &ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                              .count();
        const bool in_budget = dt <= e.budget_s;
        const bool pass = o.pass && in_budget;
        std::printf("%s %s (%.2fs%s) %s\n", e.id, pass ? "PASS" : "FAIL", dt,
                    in_budget ? "" : fmt(", over %.0fs budget", e.budget_s).c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
        failed += pass ? 0 : 1;
    }
    std::printf("acceptance: %d/%d passed\n", ran - failed, ran);
    return failed == 0 && ran > 0 ? 0 : 1;
}
