#include "nrrs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace nrrs {

Ray Camera::generate_ray(float u, float v, float aspect) const {
    const Vec3f forward = (look_at - position).normalized();
    const Vec3f right = forward.cross(up).normalized();
    const Vec3f cam_up = right.cross(forward);
    const float tan_half = std::tan(0.5f * vfov_deg * kPi / 180.0f);
    const float px = (2.0f * u - 1.0f) * tan_half * aspect;
    const float py = (1.0f - 2.0f * v) * tan_half;
    Ray ray;
    ray.o = position;
    ray.d = (forward + px * right + py * cam_up).normalized();
    return ray;
}

void Scene::finalize() {
    m_bvh.build(mesh);
    m_bounds = AABB{};
    for (const Vec3f &p : mesh.positions)
        m_bounds.grow(p);
    if (!m_bounds.valid()) {
        m_bounds.lo = Vec3f::Zero();
        m_bounds.hi = Vec3f::Ones();
    }
    const Vec3f extent = m_bounds.extent();
    const float span = std::max(extent.maxCoeff(), 1e-6f);
    // Small margin keeps normalized coordinates strictly inside [0,1].
    m_norm_scale = 1.0f / (span * 1.02f);
    m_norm_offset = m_bounds.lo - Vec3f::Constant(span * 0.01f);

    m_lights.clear();
    m_light_areas.clear();
    m_light_index_of_tri.assign(mesh.triangle_count(), -1);
    for (uint32_t tri = 0; tri < mesh.triangle_count(); ++tri) {
        if (material_of(tri).emissive() && mesh.triangle_area(tri) > 0.0f) {
            m_light_index_of_tri[tri] = static_cast<int32_t>(m_lights.size());
            m_lights.push_back(tri);
            m_light_areas.push_back(mesh.triangle_area(tri));
        }
    }
}

SurfaceInteraction Scene::interaction(const Ray &ray, const Hit &hit) const {
    SurfaceInteraction si;
    si.tri = hit.tri;
    si.material = mesh.material_ids[hit.tri];
    si.p = ray.o + hit.t * ray.d;
    si.n_g = mesh.face_normal(hit.tri);
    si.n_s = mesh.shading_normal(hit.tri, hit.u, hit.v);
    si.wo = -ray.d;
    // Orient both normals toward the incoming side.
    if (si.n_g.dot(si.wo) < 0.0f)
        si.n_g = -si.n_g;
    if (si.n_s.dot(si.wo) < 0.0f)
        si.n_s = -si.n_s;
    return si;
}

LightSample Scene::sample_light(float u_pick, float u1, float u2) const {
    LightSample ls;
    if (m_lights.empty())
        return ls;
    const uint32_t count = static_cast<uint32_t>(m_lights.size());
    uint32_t idx = std::min(count - 1, static_cast<uint32_t>(u_pick * count));
    const uint32_t tri = m_lights[idx];
    // Uniform barycentric point.
    float su = std::sqrt(u1);
    ls.p = mesh.point_at(tri, 1.0f - su, u2 * su);
    ls.n = mesh.face_normal(tri);
    ls.emission = material_of(tri).emission;
    ls.pdf_area = 1.0f / (static_cast<float>(count) * m_light_areas[idx]);
    ls.tri = tri;
    ls.valid = true;
    return ls;
}

float Scene::light_pdf_area(uint32_t tri) const {
    if (tri >= m_light_index_of_tri.size())
        return 0.0f;
    const int32_t idx = m_light_index_of_tri[tri];
    if (idx < 0)
        return 0.0f;
    return 1.0f / (static_cast<float>(m_lights.size()) * m_light_areas[idx]);
}

Vec3f Scene::normalize_position(const Vec3f &p) const {
    const Vec3f q = (p - m_norm_offset) * m_norm_scale;
    return q.cwiseMax(0.0f).cwiseMin(1.0f);
}

void add_quad(TriMesh &mesh, const Vec3f &corner, const Vec3f &e1, const Vec3f &e2,
              uint32_t material_id) {
    const uint32_t base = static_cast<uint32_t>(mesh.positions.size());
    mesh.positions.push_back(corner);
    mesh.positions.push_back(corner + e1);
    mesh.positions.push_back(corner + e1 + e2);
    mesh.positions.push_back(corner + e2);
    const uint32_t quad[6] = {base, base + 1, base + 2, base, base + 2, base + 3};
    mesh.indices.insert(mesh.indices.end(), quad, quad + 6);
    mesh.material_ids.push_back(material_id);
    mesh.material_ids.push_back(material_id);
}

void load_obj(const std::string &path, uint32_t material_id, TriMesh &out) {
    std::ifstream in(path);
    if (!in)
        fail("load_obj: cannot open " + path);
    const uint32_t base_v = static_cast<uint32_t>(out.positions.size());
    std::vector<Vec3f> file_normals;
    std::vector<std::pair<uint32_t, int32_t>> corner_refs;  // position idx, normal idx
    std::string line;
    auto parse_index = [](const std::string &tok, int &vi, int &ni) {
        vi = 0;
        ni = 0;
        const size_t s1 = tok.find('/');
        vi = std::stoi(tok.substr(0, s1));
        if (s1 == std::string::npos)
            return;
        const size_t s2 = tok.find('/', s1 + 1);
        if (s2 != std::string::npos && s2 + 1 < tok.size())
            ni = std::stoi(tok.substr(s2 + 1));
    };
    std::vector<std::pair<int, int>> face;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag.empty() || tag[0] == '#')
            continue;
        if (tag == "v") {
            Vec3f p;
            ss >> p.x() >> p.y() >> p.z();
            out.positions.push_back(p);
        } else if (tag == "vn") {
            Vec3f n;
            ss >> n.x() >> n.y() >> n.z();
            file_normals.push_back(n);
        } else if (tag == "f") {
            face.clear();
            std::string tok;
            while (ss >> tok) {
                int vi = 0, ni = 0;
                parse_index(tok, vi, ni);
                const int vcount = static_cast<int>(out.positions.size() - base_v);
                const int ncount = static_cast<int>(file_normals.size());
                face.emplace_back(vi > 0 ? vi - 1 : vcount + vi,
                                  ni > 0 ? ni - 1 : (ni < 0 ? ncount + ni : -1));
            }
            for (size_t k = 2; k < face.size(); ++k) {
                const std::pair<int, int> corners[3] = {face[0], face[k - 1], face[k]};
                for (const auto &[vi, ni] : corners) {
                    out.indices.push_back(base_v + static_cast<uint32_t>(vi));
                    corner_refs.emplace_back(base_v + static_cast<uint32_t>(vi), ni);
                }
                out.material_ids.push_back(material_id);
            }
        }
    }
    if (!file_normals.empty()) {
        // Zero stays "missing"; shading_normal falls back to the face normal.
        out.normals.resize(out.positions.size(), Vec3f::Zero());
        for (const auto &[v, n] : corner_refs)
            if (n >= 0)
                out.normals[v] = file_normals[n].normalized();
    }
}

Scene make_cornell_scene() {
    Scene scene;
    Material white;
    white.albedo = Vec3f(0.73f, 0.73f, 0.73f);
    Material red = white;
    red.albedo = Vec3f(0.63f, 0.065f, 0.05f);
    Material green = white;
    green.albedo = Vec3f(0.14f, 0.45f, 0.091f);
    Material metal;
    metal.kind = MaterialKind::Conductor;
    metal.albedo = Vec3f(0.9f, 0.75f, 0.4f);
    metal.roughness = 0.15f;
    Material lamp;
    lamp.albedo = Vec3f::Zero();
    lamp.emission = Vec3f(17.0f, 12.0f, 4.0f);
    scene.materials = {white, red, green, metal, lamp};

    TriMesh &m = scene.mesh;
    // Box interior, 2x2x2, camera looks down -z half-space.
    add_quad(m, Vec3f(-1, 0, -1), Vec3f(2, 0, 0), Vec3f(0, 0, 2), 0);      // floor
    add_quad(m, Vec3f(-1, 2, -1), Vec3f(0, 0, 2), Vec3f(2, 0, 0), 0);      // ceiling
    add_quad(m, Vec3f(-1, 0, -1), Vec3f(0, 2, 0), Vec3f(2, 0, 0), 0);      // back
    add_quad(m, Vec3f(-1, 0, -1), Vec3f(0, 0, 2), Vec3f(0, 2, 0), 1);      // left (red)
    add_quad(m, Vec3f(1, 0, -1), Vec3f(0, 2, 0), Vec3f(0, 0, 2), 2);       // right (green)
    add_quad(m, Vec3f(-0.25f, 1.98f, -0.35f), Vec3f(0.5f, 0, 0), Vec3f(0, 0, 0.5f), 4);

    // Tall mirror-ish block and a short diffuse block.
    auto add_box = [&](const Vec3f &lo, const Vec3f &hi, uint32_t mat) {
        const Vec3f dx(hi.x() - lo.x(), 0, 0), dy(0, hi.y() - lo.y(), 0), dz(0, 0, hi.z() - lo.z());
        add_quad(m, lo, dz, dx, mat);                                  // bottom
        add_quad(m, Vec3f(lo.x(), hi.y(), lo.z()), dx, dz, mat);       // top
        add_quad(m, lo, dx, dy, mat);                                  // -z
        add_quad(m, Vec3f(lo.x(), lo.y(), hi.z()), dy, dx, mat);       // +z
        add_quad(m, lo, dy, dz, mat);                                  // -x
        add_quad(m, Vec3f(hi.x(), lo.y(), lo.z()), dz, dy, mat);       // +x
    };
    add_box(Vec3f(-0.65f, 0.001f, -0.6f), Vec3f(-0.1f, 1.1f, -0.1f), 3);
    add_box(Vec3f(0.15f, 0.001f, 0.0f), Vec3f(0.7f, 0.55f, 0.55f), 0);

    scene.camera.position = Vec3f(0, 1, 3.2f);
    scene.camera.look_at = Vec3f(0, 1, 0);
    scene.camera.up = Vec3f(0, 1, 0);
    scene.camera.vfov_deg = 38.0f;
    scene.finalize();
    return scene;
}

Scene make_furnace_scene(float albedo, float emission) {
    Scene scene;
    Material wall;
    wall.albedo = Vec3f::Constant(albedo);
    wall.emission = Vec3f::Constant(emission);
    scene.materials = {wall};

    TriMesh &m = scene.mesh;
    // Closed cube interior of side 2 centered at the origin; truncated
    // transport admits the geometric-series oracle Le (1 - a^B) / (1 - a).
    add_quad(m, Vec3f(-1, -1, -1), Vec3f(2, 0, 0), Vec3f(0, 0, 2), 0);
    add_quad(m, Vec3f(-1, 1, -1), Vec3f(0, 0, 2), Vec3f(2, 0, 0), 0);
    add_quad(m, Vec3f(-1, -1, -1), Vec3f(0, 2, 0), Vec3f(2, 0, 0), 0);
    add_quad(m, Vec3f(-1, -1, 1), Vec3f(2, 0, 0), Vec3f(0, 2, 0), 0);
    add_quad(m, Vec3f(-1, -1, -1), Vec3f(0, 0, 2), Vec3f(0, 2, 0), 0);
    add_quad(m, Vec3f(1, -1, -1), Vec3f(0, 2, 0), Vec3f(0, 0, 2), 0);

    scene.camera.position = Vec3f(0, 0, 0);
    scene.camera.look_at = Vec3f(0.3f, 0.2f, -1);
    scene.camera.vfov_deg = 60.0f;
    scene.finalize();
    return scene;
}

Scene make_caustic_scene() {
    Scene scene;
    Material floor;
    floor.kind = MaterialKind::Conductor;
    floor.albedo = Vec3f(0.95f, 0.93f, 0.88f);
    floor.roughness = 0.06f;
    Material wall;
    wall.albedo = Vec3f(0.65f, 0.65f, 0.7f);
    Material side;
    side.albedo = Vec3f(0.55f, 0.35f, 0.25f);
    Material lamp;
    lamp.albedo = Vec3f::Zero();
    lamp.emission = Vec3f(60.0f, 55.0f, 45.0f);
    scene.materials = {floor, wall, side, lamp};

    TriMesh &m = scene.mesh;
    // Glossy floor strip reflects a small angled lamp onto the back wall; the
    // wall streak is indirect-only and benefits from splitting.
    add_quad(m, Vec3f(-2, 0, -2), Vec3f(4, 0, 0), Vec3f(0, 0, 4), 0);       // glossy floor
    add_quad(m, Vec3f(-2, 0, -2), Vec3f(0, 2.5f, 0), Vec3f(4, 0, 0), 1);    // back wall
    add_quad(m, Vec3f(-2, 0, -2), Vec3f(0, 0, 4), Vec3f(0, 2.5f, 0), 2);    // left wall
    add_quad(m, Vec3f(2, 0, -2), Vec3f(0, 2.5f, 0), Vec3f(0, 0, 4), 2);     // right wall
    add_quad(m, Vec3f(-2, 2.5f, -2), Vec3f(0, 0, 4), Vec3f(4, 0, 0), 1);    // ceiling
    // Lamp tilted toward the floor, shielded from the camera by a flap.
    add_quad(m, Vec3f(-0.5f, 2.2f, 1.0f), Vec3f(1.0f, 0, 0), Vec3f(0, -0.45f, -0.3f), 3);
    add_quad(m, Vec3f(-0.6f, 2.3f, 1.05f), Vec3f(1.2f, 0, 0), Vec3f(0, -0.6f, 0.0f), 2);

    scene.camera.position = Vec3f(0, 1.3f, 1.85f);
    scene.camera.look_at = Vec3f(0, 0.9f, -2);
    scene.camera.vfov_deg = 55.0f;
    scene.finalize();
    return scene;
}

namespace {

Scene load_scene_description(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        fail("load_scene: cannot open " + path);
    Scene scene;
    std::vector<std::string> names;
    auto material_id = [&](const std::string &name) -> uint32_t {
        for (size_t i = 0; i < names.size(); ++i)
            if (names[i] == name)
                return static_cast<uint32_t>(i);
        fail("load_scene: unknown material '" + name + "' in " + path);
    };
    const std::string dir = path.find('/') != std::string::npos
                                ? path.substr(0, path.find_last_of('/') + 1)
                                : std::string();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag.empty() || tag[0] == '#')
            continue;
        auto expect = [&](bool ok) {
            if (!ok)
                fail("load_scene: parse error at " + path + ":" + std::to_string(line_no));
        };
        if (tag == "camera") {
            Camera &c = scene.camera;
            expect(static_cast<bool>(ss >> c.position.x() >> c.position.y() >> c.position.z() >>
                                     c.look_at.x() >> c.look_at.y() >> c.look_at.z() >> c.up.x() >>
                                     c.up.y() >> c.up.z() >> c.vfov_deg));
        } else if (tag == "material") {
            std::string name, kind;
            expect(static_cast<bool>(ss >> name >> kind));
            Material mat;
            if (kind == "diffuse") {
                expect(static_cast<bool>(ss >> mat.albedo.x() >> mat.albedo.y() >> mat.albedo.z()));
            } else if (kind == "conductor") {
                expect(static_cast<bool>(ss >> mat.albedo.x() >> mat.albedo.y() >>
                                         mat.albedo.z() >> mat.roughness));
                mat.kind = MaterialKind::Conductor;
            } else {
                expect(false);
            }
            names.push_back(name);
            scene.materials.push_back(mat);
        } else if (tag == "emissive") {
            std::string name;
            Vec3f e;
            expect(static_cast<bool>(ss >> name >> e.x() >> e.y() >> e.z()));
            scene.materials[material_id(name)].emission = e;
        } else if (tag == "quad") {
            std::string name;
            Vec3f c, e1, e2;
            expect(static_cast<bool>(ss >> name >> c.x() >> c.y() >> c.z() >> e1.x() >> e1.y() >>
                                     e1.z() >> e2.x() >> e2.y() >> e2.z()));
            add_quad(scene.mesh, c, e1, e2, material_id(name));
        } else if (tag == "mesh") {
            std::string obj, name;
            expect(static_cast<bool>(ss >> obj >> name));
            load_obj(obj.find('/') == 0 ? obj : dir + obj, material_id(name), scene.mesh);
        } else if (tag == "env") {
            expect(static_cast<bool>(ss >> scene.env_emission.x() >> scene.env_emission.y() >>
                                     scene.env_emission.z()));
        } else {
            fail("load_scene: unknown directive '" + tag + "' at " + path + ":" +
                 std::to_string(line_no));
        }
    }
    if (scene.mesh.triangle_count() == 0)
        fail("load_scene: no geometry in " + path);
    scene.finalize();
    return scene;
}

} // namespace

Scene load_scene(const std::string &name_or_path) {
    if (name_or_path == "builtin:cornell")
        return make_cornell_scene();
    if (name_or_path == "builtin:furnace")
        return make_furnace_scene();
    if (name_or_path == "builtin:caustic")
        return make_caustic_scene();
    return load_scene_description(name_or_path);
}

} // namespace nrrs
