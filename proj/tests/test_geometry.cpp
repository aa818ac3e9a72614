#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "epivox/geometry.hpp"
#include "epivox/phantom.hpp"
#include "epivox/rng.hpp"
#include "oracles.hpp"

using namespace epivox;
using namespace epivox::geom;

namespace {

constexpr double kPi = 3.14159265358979323846;

LabeledMesh two_labeled_triangles() {
    // areas 1 and 3 with centroids (0,0,0) and (4,0,0)
    LabeledMesh m;
    m.structures[1] = "patch";
    m.vertices = {{-1, -1.0 / 3, 0}, {1, -1.0 / 3, 0}, {0, 2.0 / 3, 0},
                  {3, -1, 0},        {5, -1, 0},        {4, 2, 0}};
    m.faces = {{{0, 1, 2}}, {{3, 4, 5}}};
    m.face_labels = {1, 1};
    return m;
}

LabeledMesh unit_cube(int label = 1) {
    LabeledMesh m;
    m.structures[label] = "cube";
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                  {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    const int f[12][3] = {{0, 2, 1}, {0, 3, 2}, {4, 5, 6}, {4, 6, 7},
                          {0, 1, 5}, {0, 5, 4}, {1, 2, 6}, {1, 6, 5},
                          {2, 3, 7}, {2, 7, 6}, {3, 0, 4}, {3, 4, 7}};
    for (const auto& t : f) {
        m.faces.push_back({{t[0], t[1], t[2]}});
        m.face_labels.push_back(label);
    }
    return m;
}

LabeledMesh sphere(const Point3& center, double r, int segments, int label = 1) {
    return make_ellipsoid(center, {r, r, r}, segments, label, "sphere");
}

Vec3 random_point(Rng& rng, double scale) {
    return {rng.uniform(-scale, scale), rng.uniform(-scale, scale),
            rng.uniform(-scale, scale)};
}

}  // namespace

TEST_CASE("center_of_mass: symmetric shapes") {
    LabeledMesh sq;
    sq.structures[1] = "square";
    sq.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    sq.faces = {{{0, 1, 2}}, {{0, 2, 3}}};
    sq.face_labels = {1, 1};
    const Point3 c = center_of_mass(sq, 1);
    CHECK(c.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.y == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(c.z == doctest::Approx(0.0).epsilon(1e-12));

    LabeledMesh octa;
    octa.structures[1] = "octa";
    octa.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1},
                     {0, 0, -1}};
    const int f[8][3] = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                         {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    for (const auto& t : f) {
        octa.faces.push_back({{t[0], t[1], t[2]}});
        octa.face_labels.push_back(1);
    }
    const Point3 o = center_of_mass(octa, 1);
    CHECK(std::abs(o.x) < 1e-12);
    CHECK(std::abs(o.y) < 1e-12);
    CHECK(std::abs(o.z) < 1e-12);
}

TEST_CASE("center_of_mass: area weighting and errors") {
    const LabeledMesh m = two_labeled_triangles();
    CHECK(m.face_area(0) == doctest::Approx(1.0));
    CHECK(m.face_area(1) == doctest::Approx(3.0));
    const Point3 c = center_of_mass(m, 1);
    CHECK(c.x == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::abs(c.y) < 1e-12);
    CHECK_THROWS_AS(center_of_mass(m, 42), UnknownStructure);
}

TEST_CASE("center_of_mass: translation equivariance") {
    Rng rng(11);
    auto [mesh, lm] = generate_phantom(PhantomParams{}, 3);
    for (int trial = 0; trial < 4; ++trial) {
        const Vec3 t = random_point(rng, 50.0);
        LabeledMesh moved = mesh;
        for (auto& v : moved.vertices) v += t;
        for (const int label : {structure_id::LV_endo, structure_id::RA}) {
            const Point3 a = center_of_mass(mesh, label) + t;
            const Point3 b = center_of_mass(moved, label);
            CHECK((a - b).norm() < 1e-9);
        }
    }
}

TEST_CASE("plane_from_points: canonical and defining property") {
    const ViewPlane p = plane_from_points({0, 0, 0}, {1, 0, 0}, {0, 1, 0});
    CHECK(p.normal.z == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p.origin.x == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(p.origin.y == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Rng rng(5);
    int accepted = 0;
    while (accepted < 1000) {
        const Point3 a = random_point(rng, 100), b = random_point(rng, 100),
                     c = random_point(rng, 100);
        if (0.5 * (b - a).cross(c - a).norm() <= 1e-6) continue;
        ++accepted;
        const ViewPlane plane = plane_from_points(a, b, c);
        for (const auto& pt : {a, b, c}) {
            CHECK(std::abs(plane.signed_distance(pt)) < 1e-9);
        }
        // orthonormal right-handed frame
        CHECK(std::abs(plane.normal.norm() - 1) < 1e-9);
        CHECK(std::abs(plane.u_axis.norm() - 1) < 1e-9);
        CHECK(std::abs(plane.u_axis.dot(plane.v_axis)) < 1e-9);
        CHECK(std::abs(plane.u_axis.dot(plane.normal)) < 1e-9);
        CHECK(std::abs(plane.u_axis.cross(plane.v_axis).dot(plane.normal) - 1) < 1e-9);
    }
    CHECK_THROWS_AS(plane_from_points({0, 0, 0}, {1, 1, 1}, {2, 2, 2}),
                    CollinearLandmarks);
}

TEST_CASE("plane_from_axis") {
    const ViewPlane p = plane_from_axis({0, 0, 0}, {0, 0, 10}, 0.5);
    CHECK(p.origin.z == doctest::Approx(5.0));
    CHECK(p.normal.z == doctest::Approx(1.0));
    CHECK(std::abs(p.u_axis.dot(p.normal)) < 1e-12);
    CHECK(std::abs(p.u_axis.cross(p.v_axis).dot(p.normal) - 1) < 1e-9);

    const ViewPlane p0 = plane_from_axis({1, 2, 3}, {4, 5, 6}, 0.0);
    CHECK((p0.origin - Point3{1, 2, 3}).norm() < 1e-12);

    // axis parallel to +x exercises the +y fallback frame
    const ViewPlane px = plane_from_axis({0, 0, 0}, {10, 0, 0}, 0.25);
    CHECK(std::abs(px.u_axis.dot(px.normal)) < 1e-12);
    CHECK(std::abs(px.u_axis.norm() - 1) < 1e-12);

    CHECK_THROWS_AS(plane_from_axis({1, 1, 1}, {1, 1, 1}, 0.5), CoincidentLandmarks);
}

TEST_CASE("ray_cast_apex: offset shells match the analytic optimum") {
    // inner shell center (0,0,1) r=10, outer center origin r=12: the thinnest
    // wall (1 mm) sits at the +z pole, endocardial point (0,0,11)
    LabeledMesh shells = sphere({0, 0, 1}, 10.0, 96, 1);
    append_mesh(shells, sphere({0, 0, 0}, 12.0, 96, 2));
    const Point3 mv{0, 0, -5};

    const ApexCast cast = ray_cast_apex(shells, {1, 2}, mv, 2048);
    CHECK((cast.apex - Point3{0, 0, 11}).norm() < 1.0);

    // analytic oracle: sphere-ray hit distances over the same direction set
    double best_analytic = 1e300;
    Vec3 best_dir;
    for (const Vec3& d : fibonacci_directions(2048)) {
        const auto hit = [&](const Point3& c, double r) {
            const Vec3 oc = mv - c;
            const double b = oc.dot(d);
            const double disc = b * b - (oc.dot(oc) - r * r);
            return -b + std::sqrt(disc);  // origin is inside both spheres
        };
        const double thickness = hit({0, 0, 0}, 12.0) - hit({0, 0, 1}, 10.0);
        if (thickness < best_analytic) {
            best_analytic = thickness;
            best_dir = d;
        }
    }
    CHECK(cast.thickness == doctest::Approx(best_analytic).epsilon(5e-3));
    CHECK(cast.direction.dot(best_dir) > 0.999);

    // global-min property over the sampled set
    for (const Vec3& d : fibonacci_directions(512)) {
        const auto hits = ray_mesh_hits(shells, {1, 2}, mv, d);
        REQUIRE(hits.size() >= 2);
        CHECK(cast.thickness <= hits[1].t - hits[0].t + 1e-9);
    }
}

TEST_CASE("ray_cast_apex: concentric shells report the uniform thickness") {
    LabeledMesh shells = sphere({0, 0, 0}, 10.0, 96, 1);
    append_mesh(shells, sphere({0, 0, 0}, 12.0, 96, 2));
    const ApexCast cast = ray_cast_apex(shells, {1, 2}, {0, 0, 0}, 512);
    CHECK(cast.thickness == doctest::Approx(2.0).epsilon(0.01));
    CHECK(cast.apex.norm() == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("ray_cast_apex: error cases") {
    const LabeledMesh shell = sphere({0, 0, 0}, 10.0, 32, 1);
    // a lone far-away plate yields no double hits along any ray
    LabeledMesh plate;
    plate.structures[1] = "plate";
    plate.vertices = {{100, 100, 100}, {101, 100, 100}, {100, 101, 100}};
    plate.faces = {{{0, 1, 2}}};
    plate.face_labels = {1};
    CHECK_THROWS_AS(ray_cast_apex(plate, {1}, {0, 0, 0}, 64), NoWallPair);
    CHECK_THROWS_AS(ray_cast_apex(shell, {1}, {0, 0, 0}, 8), InvalidParams);
    CHECK_THROWS_AS(
        ray_mesh_hits(shell, {1}, {0, 0, 0}, Vec3{0, 0, 0}), DegenerateRay);
}

TEST_CASE("slice_mesh: cube cross-section") {
    const LabeledMesh cube = unit_cube();
    const ViewPlane plane = plane_from_axis({0.5, 0.5, 0}, {0.5, 0.5, 1}, 0.5);
    const CrossSection section = slice_mesh(cube, plane, {1});
    REQUIRE(section.polylines.size() == 1);
    CHECK(CrossSection::loop_area(section.polylines[0]) ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(CrossSection::loop_perimeter(section.polylines[0]) ==
          doctest::Approx(4.0).epsilon(1e-9));

    // disjoint plane
    const ViewPlane above = plane_from_axis({0.5, 0.5, 2}, {0.5, 0.5, 3}, 0.0);
    CHECK(slice_mesh(cube, above, {1}).empty());
}

TEST_CASE("slice_mesh: sphere section area") {
    const LabeledMesh s = sphere({0, 0, 0}, 10.0, 96);  // 9216 faces
    const ViewPlane plane = plane_from_points({1, 0, 6}, {0, 1, 6}, {-1, -1, 6});
    const CrossSection section = slice_mesh(s, plane, {1});
    REQUIRE(section.polylines.size() == 1);
    const double analytic = kPi * (10.0 * 10.0 - 6.0 * 6.0);
    CHECK(CrossSection::loop_area(section.polylines[0]) ==
          doctest::Approx(analytic).epsilon(0.005));
}

TEST_CASE("slice_mesh: emitted points lie on the plane") {
    auto [mesh, lm] = generate_phantom(PhantomParams{}, 19);
    Rng rng(3);
    for (int trial = 0; trial < 8; ++trial) {
        const Point3 a = random_point(rng, 30), b = random_point(rng, 30),
                     c = random_point(rng, 30);
        if (0.5 * (b - a).cross(c - a).norm() <= 1e-6) continue;
        const ViewPlane plane = plane_from_points(a, b, c);
        const CrossSection section =
            slice_mesh(mesh, plane, {LabeledMesh::kWholeHeart});
        for (const auto& loop : section.polylines) {
            CHECK(loop.size() >= 3);
            for (const auto& uv : loop) {
                const Point3 p = plane.to_world(uv[0], uv[1]);
                CHECK(std::abs(plane.signed_distance(p)) < 1e-6);
            }
        }
    }
}

TEST_CASE("voxelize: cube fills its own bounds") {
    const LabeledMesh cube = unit_cube();
    const VoxelGrid g = voxelize(cube, {1}, {4, 4, 4}, {0, 0, 0}, {1, 1, 1});
    for (const double v : g.values) CHECK(v == 1.0);
}

TEST_CASE("voxelize: sphere occupancy matches the analytic ratio") {
    const LabeledMesh s = sphere({0, 0, 0}, 10.0, 96);
    const VoxelGrid g = voxelize(s, {1}, {64, 64, 64}, {-12, -12, -12}, {12, 12, 12});
    const double analytic = (4.0 / 3.0) * kPi * 1000.0 / (24.0 * 24.0 * 24.0);
    CHECK(g.occupied_fraction() == doctest::Approx(analytic).epsilon(0.02));
}

TEST_CASE("voxelize: grid outside the mesh is all zeros") {
    const LabeledMesh cube = unit_cube();
    const VoxelGrid g = voxelize(cube, {1}, {4, 4, 4}, {5, 5, 5}, {6, 6, 6});
    for (const double v : g.values) CHECK(v == 0.0);
}

TEST_CASE("voxelize: open surface is rejected") {
    LabeledMesh open = unit_cube();
    open.faces.pop_back();
    open.face_labels.pop_back();
    CHECK_THROWS_AS(voxelize(open, {1}, {4, 4, 4}, {0, 0, 0}, {1, 1, 1}), OpenSurface);
}

TEST_CASE("voxelize agrees with the winding-number oracle on a phantom") {
    PhantomParams params;
    params.mesh_segments = 24;
    params.perturb_amplitude = 1.0;
    auto [mesh, lm] = generate_phantom(params, 77);

    Point3 lo, hi;
    mesh.bounding_box(lo, hi);
    const Point3 center = (lo + hi) / 2.0;
    const Vec3 ext = hi - lo;
    const double half = 0.525 * std::max({ext.x, ext.y, ext.z});
    const Point3 bmin = center - Vec3{half, half, half};
    const Point3 bmax = center + Vec3{half, half, half};

    const std::set<int> labels = mesh.expand_labels({LabeledMesh::kWholeHeart});
    const VoxelGrid g = voxelize(mesh, labels, {16, 16, 16}, bmin, bmax);
    for (int iz = 0; iz < 16; ++iz) {
        for (int iy = 0; iy < 16; ++iy) {
            for (int ix = 0; ix < 16; ++ix) {
                const bool expect =
                    oracle::inside_union(mesh, labels, g.voxel_center(ix, iy, iz));
                CHECK(g.values[g.index(ix, iy, iz)] == (expect ? 1.0 : 0.0));
            }
        }
    }
}

TEST_CASE("phantom: determinism, closedness, orientation") {
    PhantomParams params;
    params.perturb_amplitude = 1.0;
    auto [m1, l1] = generate_phantom(params, 42);
    auto [m2, l2] = generate_phantom(params, 42);
    REQUIRE(m1.vertices.size() == m2.vertices.size());
    bool identical = true;
    for (std::size_t i = 0; i < m1.vertices.size(); ++i) {
        identical = identical && m1.vertices[i].x == m2.vertices[i].x &&
                    m1.vertices[i].y == m2.vertices[i].y &&
                    m1.vertices[i].z == m2.vertices[i].z;
    }
    CHECK(identical);
    auto [m3, l3] = generate_phantom(params, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < m1.vertices.size() && !any_diff; ++i) {
        any_diff = m1.vertices[i].x != m3.vertices[i].x;
    }
    CHECK(any_diff);

    for (const int label : m1.labels_with_faces()) {
        CHECK(m1.structure_closed(label));
        // positive enclosed volume means consistently outward orientation
        double vol6 = 0.0;
        for (std::size_t f = 0; f < m1.face_count(); ++f) {
            if (m1.face_labels[f] != label) continue;
            const auto& v = m1.faces[f].v;
            vol6 += m1.vertices[v[0]].dot(m1.vertices[v[1]].cross(m1.vertices[v[2]]));
        }
        CHECK(vol6 > 0.0);
    }
}

TEST_CASE("phantom: unperturbed LV endo long-axis section is an ellipse") {
    PhantomParams params;
    params.perturb_amplitude = 0.0;
    params.mesh_segments = 96;
    auto [mesh, lm] = generate_phantom(params, 1);
    // plane nearly through the long axis, offset slightly off the poles
    const double x0 = 0.15;
    const ViewPlane plane = plane_from_points({x0, 0, 0}, {x0, 1, 0}, {x0, 0.3, 1});
    const CrossSection section = slice_mesh(mesh, plane, {structure_id::LV_endo});
    REQUIRE(section.polylines.size() == 1);
    const double a = params.lv_endo_radius, c = params.lv_endo_length;
    const double shrink = 1.0 - (x0 / a) * (x0 / a);
    const double analytic = kPi * (a * c * shrink);
    CHECK(CrossSection::loop_area(section.polylines[0]) ==
          doctest::Approx(analytic).epsilon(0.005));
}

TEST_CASE("phantom: invalid parameters") {
    PhantomParams bad;
    bad.lv_wall_thickness = -1.0;
    CHECK_THROWS_AS(generate_phantom(bad, 1), InvalidParams);
    PhantomParams wild;
    wild.perturb_amplitude = 5.0;  // would self-intersect the apex wall
    CHECK_THROWS_AS(generate_phantom(wild, 1), InvalidParams);
}

TEST_CASE("phantom: ray-cast apex lands near the constructed apex") {
    PhantomParams params;
    params.perturb_amplitude = 0.0;
    auto [mesh, lm] = generate_phantom(params, 9);
    const ApexCast cast =
        ray_cast_apex(mesh, {structure_id::LV_endo, structure_id::LV_epi},
                      lm.at(landmarks::MV_center), 2048);
    CHECK((cast.apex - lm.at(landmarks::LV_apex)).norm() < 4.0);
    CHECK(cast.thickness < params.lv_wall_thickness);
}

TEST_CASE("mesh and voxgrid files round-trip") {
    PhantomParams params;
    params.mesh_segments = 16;
    auto [mesh, lm] = generate_phantom(params, 5);
    const auto dir = std::filesystem::temp_directory_path() / "epivox_geom_io";
    std::filesystem::create_directories(dir);
    const std::string mesh_path = (dir / "m.mesh").string();
    save_mesh(mesh, mesh_path);
    const LabeledMesh loaded = load_mesh(mesh_path);
    REQUIRE(loaded.vertices.size() == mesh.vertices.size());
    REQUIRE(loaded.faces.size() == mesh.faces.size());
    CHECK(loaded.structures == mesh.structures);
    bool same = true;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        same = same && loaded.vertices[i].x == mesh.vertices[i].x &&
               loaded.vertices[i].y == mesh.vertices[i].y &&
               loaded.vertices[i].z == mesh.vertices[i].z;
    }
    CHECK(same);

    const VoxelGrid g = voxelize(unit_cube(), {1}, {4, 4, 4}, {-0.5, -0.5, -0.5},
                                 {1.5, 1.5, 1.5});
    const std::string grid_path = (dir / "g.voxgrid").string();
    save_voxgrid(g, grid_path);
    const VoxelGrid gl = load_voxgrid(grid_path);
    CHECK(gl.dims == g.dims);
    CHECK(gl.values == g.values);
    CHECK(gl.bounds_min.x == g.bounds_min.x);
    CHECK(gl.bounds_max.z == g.bounds_max.z);
}
