#include "nrrs/bsdf.hpp"
#include "nrrs/geometry.hpp"
#include "nrrs/octree.hpp"
#include "nrrs/scene.hpp"

#include <doctest.h>

#include <cmath>

using namespace nrrs;

namespace {

TriMesh random_soup(int tris, uint64_t seed) {
    TriMesh mesh;
    RngStream rng(seed, 0);
    for (int i = 0; i < tris; ++i) {
        const Vec3f base(rng.next_float() * 4 - 2, rng.next_float() * 4 - 2,
                         rng.next_float() * 4 - 2);
        for (int k = 0; k < 3; ++k) {
            mesh.positions.push_back(base + 0.7f * Vec3f(rng.next_float() - 0.5f,
                                                         rng.next_float() - 0.5f,
                                                         rng.next_float() - 0.5f));
            mesh.indices.push_back(static_cast<uint32_t>(mesh.positions.size() - 1));
        }
        mesh.material_ids.push_back(0);
    }
    return mesh;
}

Vec3f random_unit(RngStream &rng) {
    for (;;) {
        const Vec3f v(rng.next_float() * 2 - 1, rng.next_float() * 2 - 1,
                      rng.next_float() * 2 - 1);
        const float n2 = v.squaredNorm();
        if (n2 > 1e-4f && n2 < 1.0f)
            return v / std::sqrt(n2);
    }
}

} // namespace

TEST_CASE("bvh agrees with brute force on random soups") {
    const TriMesh mesh = random_soup(500, 5);
    Bvh bvh;
    bvh.build(mesh);
    RngStream rng(99, 1);
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
        Ray ray;
        ray.o = Vec3f(rng.next_float() * 8 - 4, rng.next_float() * 8 - 4,
                      rng.next_float() * 8 - 4);
        ray.d = random_unit(rng);
        const Hit a = bvh.intersect(mesh, ray);
        const Hit b = Bvh::intersect_brute_force(mesh, ray);
        CHECK(a.valid() == b.valid());
        if (a.valid() && b.valid()) {
            ++hits;
            CHECK(a.tri == b.tri);
            CHECK(a.t == doctest::Approx(b.t).epsilon(1e-4));
        }
    }
    CHECK(hits > 1000);  // the oracle must actually exercise hits
}

TEST_CASE("bvh occlusion agrees with closest-hit") {
    const TriMesh mesh = random_soup(200, 8);
    Bvh bvh;
    bvh.build(mesh);
    RngStream rng(100, 2);
    for (int i = 0; i < 2000; ++i) {
        Ray ray;
        ray.o = Vec3f(rng.next_float() * 6 - 3, rng.next_float() * 6 - 3,
                      rng.next_float() * 6 - 3);
        ray.d = random_unit(rng);
        ray.t_max = 2.0f + 4.0f * rng.next_float();
        const Hit h = bvh.intersect(mesh, ray);
        const bool occ = bvh.occluded(mesh, ray);
        CHECK(occ == (h.valid() && h.t < ray.t_max));
    }
}

TEST_CASE("degenerate ray direction throws") {
    const TriMesh mesh = random_soup(10, 3);
    Bvh bvh;
    bvh.build(mesh);
    Ray ray;
    ray.d = Vec3f::Zero();
    CHECK_THROWS(bvh.intersect(mesh, ray));
}

TEST_CASE("diffuse bsdf: cosine sampling consistency") {
    Material m;
    m.albedo = Vec3f(0.6f, 0.4f, 0.2f);
    ShadingPoint sp;
    sp.n = Vec3f(0, 0, 1);
    sp.wo = Vec3f(0.3f, -0.2f, 0.9f).normalized();
    RngStream rng(5, 5);
    for (int i = 0; i < 1000; ++i) {
        const BsdfSample s = bsdf_sample(m, sp, rng.next_float(), rng.next_float());
        REQUIRE(s.valid);
        const float pdf = bsdf_pdf(m, sp, s.wi);
        CHECK(pdf == doctest::Approx(s.pdf).epsilon(1e-4));
        const Vec3f f = bsdf_eval(m, sp, s.wi);
        const Vec3f thr = f * sp.n.dot(s.wi) / s.pdf;
        for (int c = 0; c < 3; ++c)
            CHECK(thr[c] == doctest::Approx(s.throughput[c]).epsilon(1e-4));
        // Cosine sampling collapses throughput to the albedo exactly.
        for (int c = 0; c < 3; ++c)
            CHECK(s.throughput[c] == doctest::Approx(m.albedo[c]).epsilon(1e-5));
    }
}

TEST_CASE("conductor bsdf: sample/eval/pdf consistency") {
    Material m;
    m.kind = MaterialKind::Conductor;
    m.albedo = Vec3f(0.9f, 0.7f, 0.4f);
    for (const float rough : {0.1f, 0.3f, 0.8f}) {
        m.roughness = rough;
        ShadingPoint sp;
        sp.n = Vec3f(0, 0, 1);
        sp.wo = Vec3f(0.4f, 0.1f, 0.8f).normalized();
        RngStream rng(6, static_cast<uint64_t>(rough * 100));
        for (int i = 0; i < 1000; ++i) {
            const BsdfSample s = bsdf_sample(m, sp, rng.next_float(), rng.next_float());
            if (!s.valid)
                continue;
            const float pdf = bsdf_pdf(m, sp, s.wi);
            CHECK(pdf == doctest::Approx(s.pdf).epsilon(1e-3));
            const Vec3f f = bsdf_eval(m, sp, s.wi);
            const Vec3f thr = f * sp.n.dot(s.wi) / s.pdf;
            for (int c = 0; c < 3; ++c)
                CHECK(thr[c] == doctest::Approx(s.throughput[c]).epsilon(1e-3));
        }
    }
}

TEST_CASE("bsdf pdf integrates to the sampling acceptance rate") {
    // MC over uniformly sampled hemisphere directions: E[pdf] * 2pi equals the
    // probability that bsdf_sample produces a valid direction (1 for diffuse;
    // below 1 for GGX where below-horizon half-vector mass is rejected).
    Material diffuse;
    Material conductor;
    conductor.kind = MaterialKind::Conductor;
    conductor.roughness = 0.4f;
    ShadingPoint sp;
    sp.n = Vec3f(0, 0, 1);
    sp.wo = Vec3f(0.2f, 0.3f, 0.93f).normalized();
    for (const Material &m : {diffuse, conductor}) {
        RngStream rng(7, m.kind == MaterialKind::Diffuse ? 0 : 1);
        const int n = 200000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            Vec3f d = random_unit(rng);
            d.z() = std::fabs(d.z());
            const double p = bsdf_pdf(m, sp, d) * 2.0 * kPi;
            sum += p;
            sum2 += p * p;
        }
        const double mean = sum / n;
        const double se = std::sqrt((sum2 / n - mean * mean) / n);

        double accepted = 0.0;
        for (int i = 0; i < n; ++i)
            accepted += bsdf_sample(m, sp, rng.next_float(), rng.next_float()).valid;
        const double rate = accepted / n;
        const double se_rate = std::sqrt(rate * (1.0 - rate) / n);
        if (m.kind == MaterialKind::Diffuse)
            CHECK(rate == doctest::Approx(1.0));
        CHECK(std::fabs(mean - rate) <= 4.0 * (se + se_rate) + 1e-3);
    }
}

TEST_CASE("conductor white furnace: single-scatter albedo at most one") {
    Material m;
    m.kind = MaterialKind::Conductor;
    m.albedo = Vec3f::Ones();
    ShadingPoint sp;
    sp.n = Vec3f(0, 0, 1);
    for (const float rough : {0.05f, 0.2f, 0.5f, 1.0f}) {
        m.roughness = rough;
        for (const float cos_o : {0.15f, 0.5f, 0.9f}) {
            sp.wo = Vec3f(std::sqrt(1 - cos_o * cos_o), 0, cos_o);
            RngStream rng(8, static_cast<uint64_t>(rough * 1000 + cos_o * 10));
            const int n = 50000;
            double sum = 0.0;
            for (int i = 0; i < n; ++i) {
                const BsdfSample s = bsdf_sample(m, sp, rng.next_float(), rng.next_float());
                if (s.valid)
                    sum += luminance(s.throughput);
            }
            CHECK(sum / n <= 1.0 + 3e-3);
        }
    }
}

TEST_CASE("mirror limit reflects exactly") {
    Material m;
    m.kind = MaterialKind::Conductor;
    m.albedo = Vec3f::Ones();
    m.roughness = 0.0f;
    ShadingPoint sp;
    sp.n = Vec3f(0, 0, 1);
    sp.wo = Vec3f(0.5f, -0.3f, 0.81f).normalized();
    const BsdfSample s = bsdf_sample(m, sp, 0.3f, 0.7f);
    REQUIRE(s.valid);
    const Vec3f refl = 2.0f * sp.n.dot(sp.wo) * sp.n - sp.wo;
    CHECK((s.wi - refl).norm() < 2e-3f);
}

TEST_CASE("light sampling: uniform pick and area pdf") {
    Scene scene = make_cornell_scene();
    REQUIRE(scene.light_count() == 2);  // the lamp quad has two triangles
    RngStream rng(9, 4);
    int counts[2] = {0, 0};
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const LightSample ls = scene.sample_light(rng.next_float(), rng.next_float(),
                                                  rng.next_float());
        REQUIRE(ls.valid);
        CHECK(ls.pdf_area > 0.0f);
        CHECK(ls.emission.maxCoeff() > 0.0f);
        CHECK(scene.light_pdf_area(ls.tri) == doctest::Approx(ls.pdf_area));
        counts[ls.tri == scene.sample_light(0.0f, 0.1f, 0.1f).tri ? 0 : 1]++;
    }
    // Two equal-area triangles are picked in equal proportion (4 sigma).
    const double p = static_cast<double>(counts[0]) / n;
    CHECK(std::fabs(p - 0.5) <= 4.0 * std::sqrt(0.25 / n));
    CHECK(scene.light_pdf_area(0) == 0.0f);  // floor is not a light
}

TEST_CASE("scene with no lights yields invalid light samples") {
    Scene scene;
    Material m;
    scene.materials = {m};
    add_quad(scene.mesh, Vec3f(-1, 0, -1), Vec3f(2, 0, 0), Vec3f(0, 0, 2), 0);
    scene.env_emission = Vec3f::Ones();
    scene.finalize();
    CHECK(scene.light_count() == 0);
    CHECK_FALSE(scene.sample_light(0.5f, 0.5f, 0.5f).valid);
}

TEST_CASE("normalized positions stay in the unit cube") {
    Scene scene = make_caustic_scene();
    RngStream rng(10, 0);
    for (int i = 0; i < 1000; ++i) {
        const Vec3f p(rng.next_float() * 20 - 10, rng.next_float() * 20 - 10,
                      rng.next_float() * 20 - 10);
        const Vec3f q = scene.normalize_position(p);
        CHECK(q.minCoeff() >= 0.0f);
        CHECK(q.maxCoeff() <= 1.0f);
    }
}

TEST_CASE("octree cache: welford stats and subdivision") {
    AABB bounds;
    bounds.grow(Vec3f::Zero());
    bounds.grow(Vec3f::Ones());
    OctreeCache cache(bounds, 4, 5);

    cache.insert(Vec3f(0.1f, 0.1f, 0.1f), Vec3f::Zero());
    cache.insert(Vec3f(0.1f, 0.1f, 0.1f), Vec3f::Constant(2.0f));
    auto s = cache.query(Vec3f(0.1f, 0.1f, 0.1f));
    CHECK(s.count == 2);
    CHECK(s.mean.x() == doctest::Approx(1.0f));          // mean of {0,2}
    CHECK(s.second_moment.x() == doctest::Approx(2.0f)); // mean of {0,4}

    // Exceed the threshold in one octant; query descends into children.
    const size_t nodes_before = cache.node_count();
    for (int i = 0; i < 10; ++i)
        cache.insert(Vec3f(0.9f, 0.9f, 0.9f), Vec3f::Constant(5.0f));
    CHECK(cache.node_count() > nodes_before);
    auto deep = cache.query(Vec3f(0.9f, 0.9f, 0.9f));
    CHECK(deep.mean.x() == doctest::Approx(5.0f));
    // Other empty octants fall back to the populated ancestor.
    auto other = cache.query(Vec3f(0.9f, 0.1f, 0.9f));
    CHECK(other.count > 0);

    // Out-of-bounds insert clamps instead of throwing.
    cache.insert(Vec3f(5.0f, 5.0f, 5.0f), Vec3f::Ones());
    CHECK(cache.total_count() == 13);
}

TEST_CASE("octree cache: empty query returns prior") {
    AABB bounds;
    bounds.grow(Vec3f::Zero());
    bounds.grow(Vec3f::Ones());
    OctreeCache cache(bounds);
    const auto s = cache.query(Vec3f(0.5f, 0.5f, 0.5f));
    CHECK(s.count == 0);
    CHECK(s.mean.norm() == 0.0f);
}

TEST_CASE("octree cache: merge matches concatenated stream") {
    AABB bounds;
    bounds.grow(Vec3f::Zero());
    bounds.grow(Vec3f::Ones());
    OctreeCache a(bounds, 8, 6), b(bounds, 8, 6), ab(bounds, 8, 6);
    RngStream rng(13, 1);
    for (int i = 0; i < 500; ++i) {
        const Vec3f p(rng.next_float(), rng.next_float(), rng.next_float());
        const Vec3f v = Vec3f::Constant(rng.next_float() * 3.0f);
        if (i % 2 == 0)
            a.insert(p, v);
        else
            b.insert(p, v);
        ab.insert(p, v);
    }
    a.merge(b);
    CHECK(a.total_count() == ab.total_count());
    RngStream probe(14, 2);
    for (int i = 0; i < 200; ++i) {
        const Vec3f p(probe.next_float(), probe.next_float(), probe.next_float());
        const auto sa = a.query(p);
        const auto sab = ab.query(p);
        // Same counts; means agree to floating-point merge tolerance. The node
        // structure may differ (split timing), so compare at the root-level
        // granularity via total stats when counts disagree.
        if (sa.count == sab.count)
            CHECK(sa.mean.x() == doctest::Approx(sab.mean.x()).epsilon(1e-4));
    }
}

TEST_CASE("camera rays hit the view center") {
    Camera cam;
    cam.position = Vec3f(0, 0, 5);
    cam.look_at = Vec3f::Zero();
    const Ray center = cam.generate_ray(0.5f, 0.5f, 1.0f);
    CHECK((center.d - Vec3f(0, 0, -1)).norm() < 1e-6f);
    const Ray corner = cam.generate_ray(0.0f, 0.0f, 1.0f);
    CHECK(corner.d.x() < 0.0f);
    CHECK(corner.d.y() > 0.0f);
}

TEST_CASE("obj loader round trip") {
    const char *path = "test_tri.obj";
    {
        FILE *f = fopen(path, "w");
        REQUIRE(f);
        fputs("# tiny mesh\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n"
              "vn 0 0 1\nf 1//1 2//1 3//1\nf 2//1 4//1 3//1\n",
              f);
        fclose(f);
    }
    TriMesh mesh;
    load_obj(path, 0, mesh);
    remove(path);
    CHECK(mesh.triangle_count() == 2);
    CHECK(mesh.positions.size() == 4);
    CHECK(mesh.triangle_area(0) == doctest::Approx(0.5f));
    CHECK((mesh.shading_normal(0, 0.2f, 0.2f) - Vec3f(0, 0, 1)).norm() < 1e-6f);
    CHECK_THROWS(load_obj("missing_file.obj", 0, mesh));
}

TEST_CASE("builtin scenes finalize with valid bvh and lights") {
    for (const char *name : {"builtin:cornell", "builtin:furnace", "builtin:caustic"}) {
        Scene scene = load_scene(name);
        CHECK(scene.mesh.triangle_count() > 0);
        CHECK(scene.light_count() > 0);
        // A center camera ray must hit something in a closed scene.
        const Ray ray = scene.camera.generate_ray(0.5f, 0.5f, 1.0f);
        CHECK(scene.intersect(ray).valid());
    }
    CHECK_THROWS(load_scene("no_such_scene.txt"));
}
