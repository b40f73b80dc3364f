#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cryosim/error.hpp"
#include "cryosim/mesh.hpp"
#include "cryosim/octree.hpp"
#include "cryosim/rng.hpp"
#include "test_helpers.hpp"

using namespace cryosim;

namespace {

// closed octahedron: V=6, E=12, F=8, chi=2
TriangleMesh octahedron(double r = 10.0) {
    TriangleMesh m;
    m.vertices = {{r, 0, 0}, {-r, 0, 0}, {0, r, 0}, {0, -r, 0}, {0, 0, r}, {0, 0, -r}};
    m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
               {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    recompute_normals(m);
    return m;
}

TriangleMesh subdivided_sphere(int levels, double radius) {
    TriangleMesh m = octahedron(radius);
    for (int l = 0; l < levels; ++l) {
        TriangleMesh next;
        next.vertices = m.vertices;
        auto midpoint = [&](int a, int b, std::map<std::pair<int, int>, int>& cache) {
            auto key = std::minmax(a, b);
            auto it = cache.find(key);
            if (it != cache.end()) return it->second;
            Vec3 p = ((next.vertices[a] + next.vertices[b]) * 0.5).normalized() * radius;
            next.vertices.push_back(p);
            int idx = static_cast<int>(next.vertices.size()) - 1;
            cache.emplace(key, idx);
            return idx;
        };
        std::map<std::pair<int, int>, int> cache;
        for (const auto& f : m.faces) {
            int ab = midpoint(f[0], f[1], cache);
            int bc = midpoint(f[1], f[2], cache);
            int ca = midpoint(f[2], f[0], cache);
            next.faces.push_back({f[0], ab, ca});
            next.faces.push_back({f[1], bc, ab});
            next.faces.push_back({f[2], ca, bc});
            next.faces.push_back({ab, bc, ca});
        }
        m = std::move(next);
    }
    for (auto& v : m.vertices) v = v.normalized() * radius;
    recompute_normals(m);
    return m;
}

} // namespace

TEST_SUITE("geometry") {

TEST_CASE("scale-driven knobs: cube step, smoothing iterations, reduction") {
    CHECK(isosurface_step(ScaleParams::from_s(0.9)) == 1);  // s > 0.8 -> unit steps
    CHECK(isosurface_step(ScaleParams::from_s(0.81)) == 1);
    CHECK(isosurface_step(ScaleParams::from_s(0.5)) == 2);  // round(1/0.5)
    CHECK(isosurface_step(ScaleParams::from_s(0.2)) == 4);  // clamped to [1,4]
    CHECK(isosurface_step(ScaleParams::from_s(0.1)) == 4);

    CHECK(smoothing_iterations(ScaleParams::from_s(1.0)) == 5); // max(1, 5)
    CHECK(smoothing_iterations(ScaleParams::from_s(0.1)) == 1); // max(1, 0.5)

    CHECK(decimation_reduction(ScaleParams::from_s(1.0)) == doctest::Approx(0.0));
    CHECK(decimation_reduction(ScaleParams::from_s(0.2)) == doctest::Approx(0.48));
    CHECK(decimation_reduction(ScaleParams::from_s(0.95)) == doctest::Approx(0.03));
}

TEST_CASE("isosurface of a solid ball lands between 9 and 11 Angstrom") {
    DensityVolume ball = test_helpers::ball_volume(10.0, 1.0);
    TriangleMesh mesh = extract_isosurface(ball, 0.5, ScaleParams::from_s(1.0));
    REQUIRE(!mesh.empty());
    REQUIRE(mesh.vertices.size() > 100);
    for (const Vec3& v : mesh.vertices) {
        double r = v.norm();
        CHECK(r >= 9.0);
        CHECK(r <= 11.0);
    }
    // watertight: every edge borders exactly two faces, chi = 2
    CHECK(max_edge_valence(mesh) == 2);
    CHECK(euler_characteristic(mesh) == 2);
    // outward normals: radial dot normal positive
    int outward = 0;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        if (mesh.normals[i].dot(mesh.vertices[i].normalized()) > 0) ++outward;
    CHECK(outward == static_cast<int>(mesh.vertices.size()));
}

TEST_CASE("all-zero volume gives an empty mesh, iso outside range too") {
    DensityVolume zero(8, 8, 8, 1.0);
    CHECK(extract_isosurface(zero, 0.5, ScaleParams::from_s(1.0)).empty());
    DensityVolume ball = test_helpers::ball_volume(5.0, 1.0);
    CHECK(extract_isosurface(ball, 7.5, ScaleParams::from_s(1.0)).empty());
}

TEST_CASE("coarse steps still produce a closed surface") {
    DensityVolume ball = test_helpers::ball_volume(12.0, 1.0, 6.0);
    TriangleMesh mesh = extract_isosurface(ball, 0.5, ScaleParams::from_s(0.2)); // step 4
    REQUIRE(!mesh.empty());
    CHECK(max_edge_valence(mesh) == 2);
    CHECK(euler_characteristic(mesh) == 2);
    for (const Vec3& v : mesh.vertices) CHECK(std::abs(v.norm() - 12.0) < 4.0);
}

TEST_CASE("smoothing keeps counts and topology, bounding box contracts") {
    TriangleMesh sphere = subdivided_sphere(3, 10.0);
    long chi_before = euler_characteristic(sphere);
    ScaleParams s = ScaleParams::from_s(1.0);
    TriangleMesh out = smooth_mesh(sphere, s);
    CHECK(out.vertices.size() == sphere.vertices.size());
    CHECK(out.faces.size() == sphere.faces.size());
    CHECK(euler_characteristic(out) == chi_before);
    CHECK(chi_before == 2);

    auto bbox_vol = [](const TriangleMesh& m) {
        Box3 b{m.vertices[0], m.vertices[0]};
        for (const Vec3& v : m.vertices) {
            b.lo = min(b.lo, v);
            b.hi = max(b.hi, v);
        }
        Vec3 sz = b.size();
        return sz.x * sz.y * sz.z;
    };
    // contractive on a convex mesh, iteration by iteration
    TriangleMesh cur = sphere;
    double prev = bbox_vol(cur);
    ScaleParams one_iter = ScaleParams::from_s(0.1); // 1 iteration
    for (int it = 0; it < 4; ++it) {
        cur = smooth_mesh(cur, one_iter);
        double now = bbox_vol(cur);
        CHECK(now <= prev + 1e-12);
        prev = now;
    }

    // unit normals after recompute
    for (const Vec3& n : out.normals) CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("decimation: s=1 and reductions under 0.05 return the mesh unchanged") {
    TriangleMesh sphere = subdivided_sphere(3, 10.0);
    TriangleMesh a = decimate_mesh(sphere, ScaleParams::from_s(1.0));
    CHECK(a.faces.size() == sphere.faces.size());
    TriangleMesh b = decimate_mesh(sphere, ScaleParams::from_s(0.95)); // 0.03 < 0.05
    CHECK(b.faces.size() == sphere.faces.size());
}

TEST_CASE("decimation hits the face target within 5% and preserves topology") {
    TriangleMesh sphere = subdivided_sphere(3, 10.0); // 512 faces
    REQUIRE(sphere.faces.size() == 512);
    ScaleParams s = ScaleParams::from_s(0.2); // reduction 0.48
    TriangleMesh out = decimate_mesh(sphere, s);
    double target = 512 * (1.0 - 0.48);
    CHECK(std::abs(static_cast<double>(out.faces.size()) - target) <= 0.05 * 512);
    CHECK(euler_characteristic(out) == 2);
    CHECK(max_edge_valence(out) == 2);
    for (const auto& f : out.faces)
        for (int v : f) {
            CHECK(v >= 0);
            CHECK(v < static_cast<int>(out.vertices.size()));
        }
}

TEST_CASE("decimation rejects non-manifold input") {
    TriangleMesh bad = octahedron();
    bad.faces.push_back({0, 2, 1}); // third face on edge (0,2)
    CHECK_THROWS_AS(decimate_mesh(bad, ScaleParams::from_s(0.2)), error);
}

TEST_CASE("pipeline meshes meet the quality bounds") {
    DensityVolume ball = test_helpers::ball_volume(10.0, 1.0);
    ScaleParams s = ScaleParams::from_s(1.0);
    TriangleMesh mesh = smooth_mesh(extract_isosurface(ball, 0.5, s), s);
    MeshQuality q = mesh_quality(mesh);
    CHECK(q.zero_area_faces == 0);
    CHECK(q.max_aspect <= 50.0);
    CHECK(q.min_angle_deg >= 1.0);
}

TEST_CASE("octree parameter laws") {
    CHECK(Octree::depth_for(ScaleParams::from_s(1.0)) == 8);
    CHECK(Octree::depth_for(ScaleParams::from_s(0.2)) == 5); // 4 + round(0.8)
    CHECK(Octree::capacity_for(ScaleParams::from_s(1.0)) == 8);
    CHECK(Octree::capacity_for(ScaleParams::from_s(0.5)) == 12);
}

TEST_CASE("empty octree answers empty") {
    Octree tree({}, Box3{{0, 0, 0}, {100, 100, 100}}, 6, 8);
    CHECK(tree.query_near({50, 50, 50}, 1000).empty());
}

TEST_CASE("two spheres r=5 at distance 8 see each other") {
    std::vector<SphereItem> items = {{1, {46, 50, 50}, 5.0}, {2, {54, 50, 50}, 5.0}};
    Octree tree(items, Box3{{0, 0, 0}, {100, 100, 100}}, 6, 8);
    auto near1 = tree.query_near({46, 50, 50}, 5.0);
    CHECK(std::count(near1.begin(), near1.end(), 2) == 1);
    auto near2 = tree.query_near({54, 50, 50}, 5.0);
    CHECK(std::count(near2.begin(), near2.end(), 1) == 1);
}

TEST_CASE("item outside bounds is a construction error") {
    std::vector<SphereItem> items = {{1, {200, 0, 0}, 1.0}};
    CHECK_THROWS_AS(Octree(items, Box3{{0, 0, 0}, {100, 100, 100}}, 6, 8), error);
}

TEST_CASE("octree equals brute force on 1000 random spheres x 100 queries") {
    RandomStream rng(2024, rng_stage::test);
    Box3 bounds{{0, 0, 0}, {500, 500, 500}};
    std::vector<SphereItem> items;
    for (int i = 0; i < 1000; ++i)
        items.push_back({i,
                         {rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(0, 500)},
                         rng.uniform(1, 20)});
    Octree tree(items, bounds, ScaleParams::from_s(0.6));

    for (int q = 0; q < 100; ++q) {
        Vec3 c{rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(0, 500)};
        double r = rng.uniform(1, 50);
        std::vector<int> brute;
        for (const SphereItem& it : items) {
            double rr = r + it.radius;
            if ((it.center - c).norm2() <= rr * rr) brute.push_back(it.id);
        }
        std::sort(brute.begin(), brute.end());
        CHECK(tree.query_near(c, r) == brute);
    }
}

} // TEST_SUITE
