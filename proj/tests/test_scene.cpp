#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cryosim/error.hpp"
#include "cryosim/scene.hpp"
#include "test_helpers.hpp"

using namespace cryosim;

TEST_SUITE("scene") {

TEST_CASE("size ladder and composite scale factor") {
    // size < 10 A: s_size = 1.0; with the density term saturated s = 1.0
    CHECK(derive_scale_params(5.0, 125000.0).s == doctest::Approx(1.0));
    // huge volume: density term = 125 / 1e6
    CHECK(derive_scale_params(5.0, 1e9).s ==
          doctest::Approx(0.7 * 1.0 + 0.3 * (125.0 / 1e6)));
    // s_size 0.6 (50-200 A), s_density 0.5 via particle^3 = volume/2000
    double particle = 100.0;
    double volume = particle * particle * particle * 2000.0;
    ScaleParams p = derive_scale_params(particle, volume);
    CHECK(p.s == doctest::Approx(0.7 * 0.6 + 0.3 * 0.5)); // 0.57

    // ladder boundaries, density term computed alongside
    auto expect = [](double size, double ladder, double vol) {
        return 0.7 * ladder + 0.3 * std::min(1.0, size * size * size / (vol / 1000.0));
    };
    CHECK(derive_scale_params(30.0, 1e12).s == doctest::Approx(expect(30, 0.8, 1e12)));
    CHECK(derive_scale_params(500.0, 1e12).s == doctest::Approx(expect(500, 0.4, 1e12)));
    CHECK(derive_scale_params(2000.0, 1e18).s == doctest::Approx(expect(2000, 0.2, 1e18)));
}

TEST_CASE("the four linear laws are exact for 100 random s") {
    RandomStream rng(31, rng_stage::test);
    for (int i = 0; i < 100; ++i) {
        double s = rng.uniform(0.2, 1.0);
        ScaleParams p = ScaleParams::from_s(s);
        CHECK(std::abs(p.overlap_threshold - (0.4 - 0.3 * s)) < 1e-12);
        CHECK(std::abs(p.placement_density - (0.7 + 0.5 * s)) < 1e-12);
        CHECK(std::abs(p.collision_strictness - (0.5 + 0.5 * s)) < 1e-12);
        CHECK(std::abs(p.mesh_reduction - (0.7 - 0.7 * s)) < 1e-12);
    }
    ScaleParams one = ScaleParams::from_s(1.0);
    CHECK(one.overlap_threshold == doctest::Approx(0.1));
    CHECK(one.placement_density == doctest::Approx(1.2));
    CHECK(one.collision_strictness == doctest::Approx(1.0));
    CHECK(one.mesh_reduction == doctest::Approx(0.0));
}

TEST_CASE("euler ZYZ to quaternion") {
    Quaternion id = euler_to_quaternion(0, 0, 0);
    CHECK(id.w == doctest::Approx(1.0));
    CHECK(std::abs(id.x) + std::abs(id.y) + std::abs(id.z) < 1e-12);

    Quaternion qz = euler_to_quaternion(90, 0, 0);
    CHECK(qz.w == doctest::Approx(std::cos(M_PI / 4)));
    CHECK(qz.z == doctest::Approx(std::sin(M_PI / 4)));
    CHECK(std::abs(qz.x) + std::abs(qz.y) < 1e-12);

    Quaternion qy = euler_to_quaternion(0, 180, 0);
    CHECK(std::abs(qy.w) < 1e-12);
    CHECK(qy.y == doctest::Approx(1.0));

    // ZYZ composition: rotating +z by (alpha, beta, *) tilts by beta
    Quaternion q = euler_to_quaternion(30, 60, 45);
    Vec3 tilted = q.rotate({0, 0, 1});
    CHECK(std::acos(tilted.z) == doctest::Approx(60.0 * M_PI / 180).epsilon(1e-9));
    CHECK(q.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("experimental pose import is the documented affine map") {
    std::vector<PickRecord> picks;
    picks.push_back({10, 20, std::nullopt, 0.8});
    picks.push_back({0, 0, std::array<double, 3>{0, 0, 0}, 1.0});
    auto placements = import_experimental_poses(picks, 1.5, {0, 0, 0}, 0.0, "demo", 12.0);
    REQUIRE(placements.size() == 2);
    CHECK(placements[0].T.x == doctest::Approx(15.0));
    CHECK(placements[0].T.y == doctest::Approx(30.0));
    CHECK(placements[0].T.z == doctest::Approx(0.0));
    CHECK(placements[0].source == PlacementSource::experimental);
    CHECK(placements[0].confidence == doctest::Approx(0.8));
    CHECK(placements[1].q.w == doctest::Approx(1.0)); // euler (0,0,0) -> identity

    CHECK(import_experimental_poses({}, 1.0, {}, 0).empty());
}

TEST_CASE("uniform orientations are isotropic") {
    OrientationParams params;
    RandomStream rng(41, rng_stage::orientation);
    const int n = 100000;
    Vec3 mean;
    for (int i = 0; i < n; ++i) {
        Quaternion q = sample_orientation(params, rng);
        CHECK(std::abs(q.norm() - 1.0) < 1e-9);
        mean += q.rotate({0, 0, 1});
    }
    mean = mean / n;
    CHECK(mean.norm() < 0.02);
}

TEST_CASE("uniform orientations pass a chi-square over 12 dodecahedral bins") {
    // icosahedron vertices = dodecahedron face centers; symmetric partition
    double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> axes;
    for (double s1 : {-1.0, 1.0})
        for (double s2 : {-1.0, 1.0}) {
            axes.push_back(Vec3{0, s1, s2 * phi}.normalized());
            axes.push_back(Vec3{s1, s2 * phi, 0}.normalized());
            axes.push_back(Vec3{s2 * phi, 0, s1}.normalized());
        }
    REQUIRE(axes.size() == 12);

    OrientationParams params;
    RandomStream rng(43, rng_stage::orientation);
    const int n = 100000;
    std::vector<long> bins(12, 0);
    for (int i = 0; i < n; ++i) {
        Vec3 d = sample_orientation(params, rng).rotate({0, 0, 1});
        int best = 0;
        double best_dot = -2;
        for (int a = 0; a < 12; ++a) {
            double dot = d.dot(axes[a]);
            if (dot > best_dot) {
                best_dot = dot;
                best = a;
            }
        }
        ++bins[best];
    }
    double expected = n / 12.0;
    double chi2 = 0;
    for (long b : bins) chi2 += (b - expected) * (b - expected) / expected;
    // 11 dof: p > 0.001 iff chi2 < 31.264
    CHECK(chi2 < 31.264);
}

TEST_CASE("preferred orientations reproduce the vMF mean resultant length") {
    OrientationParams params;
    params.mode = OrientationParams::Mode::preferred;
    params.kappa = 10.0;
    params.mu = {0, 0, 1};
    RandomStream rng(47, rng_stage::orientation);
    const int n = 100000;
    double sum = 0;
    for (int i = 0; i < n; ++i)
        sum += sample_orientation(params, rng).rotate({0, 0, 1}).dot(params.mu);
    double expected = 1.0 / std::tanh(10.0) - 0.1; // coth(k) - 1/k = 0.9000
    CHECK(sum / n == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("limited tilt never exceeds theta_max") {
    OrientationParams params;
    params.mode = OrientationParams::Mode::limited_tilt;
    params.theta_max = M_PI / 6.0;
    RandomStream rng(53, rng_stage::orientation);
    double max_tilt = 0;
    for (int i = 0; i < 10000; ++i) {
        Vec3 d = sample_orientation(params, rng).rotate({0, 0, 1});
        max_tilt = std::max(max_tilt, std::acos(std::clamp(d.z, -1.0, 1.0)));
    }
    CHECK(max_tilt <= M_PI / 6.0 + 1e-9);
    CHECK(max_tilt > 0.0);
}

TEST_CASE("grid spacing and jitter laws") {
    CHECK(grid_spacing(20.0, 0.1) == doctest::Approx(38.0));
    CHECK(grid_jitter_bound(38.0) == doctest::Approx(9.5));
    CHECK(collision_floor(20.0, 0.1) == doctest::Approx(36.0));
}

TEST_CASE("uniform placement satisfies the collision floor (brute force)") {
    ScaleParams scale = ScaleParams::from_s(1.0); // overlap 0.1
    RandomStream rng(61, rng_stage::placement);
    auto placed = place_particles(50, 20.0, {}, {}, scale, {400, 400, 400}, rng);
    REQUIRE(static_cast<int>(placed.size()) >= 25);
    double floor_d = collision_floor(20.0, scale.overlap_threshold);
    for (std::size_t i = 0; i < placed.size(); ++i)
        for (std::size_t j = i + 1; j < placed.size(); ++j)
            CHECK((placed[i].T - placed[j].T).norm() >= floor_d - 1e-9);
    // all inside the extents
    for (const Placement& p : placed) {
        CHECK(std::abs(p.T.x) <= 200.0);
        CHECK(std::abs(p.T.y) <= 200.0);
        CHECK(std::abs(p.T.z) <= 200.0);
    }
}

TEST_CASE("grid placement also honors the floor and the jitter stays in band") {
    ScaleParams scale = ScaleParams::from_s(1.0);
    RandomStream rng(67, rng_stage::placement);
    PlaceStrategy grid;
    grid.kind = PlaceStrategy::Kind::grid;
    auto placed = place_particles(30, 20.0, grid, {}, scale, {400, 400, 120}, rng);
    REQUIRE(placed.size() >= 15);
    double floor_d = collision_floor(20.0, scale.overlap_threshold);
    for (std::size_t i = 0; i < placed.size(); ++i)
        for (std::size_t j = i + 1; j < placed.size(); ++j)
            CHECK((placed[i].T - placed[j].T).norm() >= floor_d - 1e-9);
}

TEST_CASE("cluster strategy sigma laws and boundedness") {
    // min(extent)/6 = 100 for a 600^3 box; exercised via a dense cluster
    Vec3 extents{600, 600, 600};
    double sigma_primary = std::min({extents.x, extents.y, extents.z}) / 6.0;
    CHECK(sigma_primary == doctest::Approx(100.0));
    CHECK(0.7 * sigma_primary == doctest::Approx(70.0));

    ScaleParams scale = ScaleParams::from_s(0.6);
    RandomStream rng(71, rng_stage::placement);
    PlaceStrategy cluster;
    cluster.kind = PlaceStrategy::Kind::cluster;
    auto placed = place_particles(40, 15.0, cluster, {}, scale, extents, rng);
    REQUIRE(placed.size() >= 20);
    // clustered: mean distance from center well below the uniform expectation
    double mean_r = 0;
    for (const Placement& p : placed) mean_r += p.T.norm();
    mean_r /= placed.size();
    CHECK(mean_r < 250.0);
}

TEST_CASE("separated class rule raises the pairwise floor") {
    ScaleParams scale = ScaleParams::from_s(1.0);
    RandomStream rng(73, rng_stage::placement);
    ClassRule rule;
    rule.kind = ClassRule::Kind::separated;
    rule.min_separation = 80.0;
    auto placed = place_particles(20, 10.0, {}, rule, scale, {500, 500, 500}, rng);
    REQUIRE(placed.size() >= 10);
    for (std::size_t i = 0; i < placed.size(); ++i)
        for (std::size_t j = i + 1; j < placed.size(); ++j)
            CHECK((placed[i].T - placed[j].T).norm() >= 80.0 - 1e-9);
}

TEST_CASE("cluster class rule pulls neighbor distances toward the target spacing") {
    ScaleParams scale = ScaleParams::from_s(0.8);
    RandomStream rng(79, rng_stage::placement);
    ClassRule rule;
    rule.kind = ClassRule::Kind::cluster;
    rule.cluster_spacing = 60.0;
    auto placed = place_particles(40, 10.0, {}, rule, scale, {600, 600, 600}, rng);
    REQUIRE(placed.size() >= 20);
    double mean_nn = 0;
    for (std::size_t i = 0; i < placed.size(); ++i) {
        double best = 1e30;
        for (std::size_t j = 0; j < placed.size(); ++j)
            if (i != j) best = std::min(best, (placed[i].T - placed[j].T).norm());
        mean_nn += best;
    }
    mean_nn /= placed.size();
    CHECK(mean_nn == doctest::Approx(60.0).epsilon(0.35));
}

TEST_CASE("capacity error names the shortfall") {
    ScaleParams scale = ScaleParams::from_s(1.0);
    RandomStream rng(83, rng_stage::placement);
    // 100 particles of radius 40 cannot fit in a 150^3 box
    CHECK_THROWS_AS(place_particles(100, 40.0, {}, {}, scale, {150, 150, 150}, rng), error);
}

TEST_CASE("existing placements are respected as obstacles") {
    ScaleParams scale = ScaleParams::from_s(1.0);
    RandomStream rng(89, rng_stage::placement);
    std::vector<Placement> existing;
    Placement center;
    center.T = {0, 0, 0};
    center.radius = 50.0;
    existing.push_back(center);
    auto placed = place_particles(20, 20.0, {}, {}, scale, {400, 400, 400}, rng, existing);
    for (const Placement& p : placed) {
        double floor_d = (20.0 + 50.0) * (1.0 - scale.overlap_threshold);
        CHECK(p.T.norm() >= floor_d - 1e-9);
    }
}

TEST_CASE("blending extremes and fraction") {
    RandomStream rng(97, rng_stage::blend);
    auto mk = [](int n, PlacementSource src, double spread) {
        std::vector<Placement> v;
        for (int i = 0; i < n; ++i) {
            Placement p;
            p.T = {i * spread, src == PlacementSource::experimental ? 0.0 : 1000.0, 0};
            p.radius = 1.0;
            p.source = src;
            p.confidence = 1.0;
            v.push_back(p);
        }
        return v;
    };
    auto exp_pool = mk(50, PlacementSource::experimental, 10.0);
    auto syn_pool = mk(50, PlacementSource::synthetic, 10.0);

    auto all_exp = blend_placements(exp_pool, syn_pool, 1.0, rng, 50);
    for (const Placement& p : all_exp) CHECK(p.source == PlacementSource::experimental);
    auto all_syn = blend_placements(exp_pool, syn_pool, 0.0, rng, 50);
    for (const Placement& p : all_syn) CHECK(p.source == PlacementSource::synthetic);

    CHECK_THROWS_AS(blend_placements({}, {}, 0.5, rng), error);

    // binomial check at w = 0.5 with uniform confidence 1
    auto big_exp = mk(10000, PlacementSource::experimental, 100.0);
    auto big_syn = mk(10000, PlacementSource::synthetic, 100.0);
    auto blended = blend_placements(big_exp, big_syn, 0.5, rng, 10000, 0.999999);
    long n_exp = std::count_if(blended.begin(), blended.end(), [](const Placement& p) {
        return p.source == PlacementSource::experimental;
    });
    double fraction = static_cast<double>(n_exp) / blended.size();
    CHECK(fraction == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("blended output passes the same collision check") {
    RandomStream rng(101, rng_stage::blend);
    std::vector<Placement> exp_pool, syn_pool;
    for (int i = 0; i < 20; ++i) {
        Placement p;
        p.T = {i * 5.0, 0, 0}; // deliberately tight
        p.radius = 10.0;
        p.source = i % 2 ? PlacementSource::experimental : PlacementSource::synthetic;
        (i % 2 ? exp_pool : syn_pool).push_back(p);
    }
    auto blended = blend_placements(exp_pool, syn_pool, 0.5, rng, -1, 0.1);
    double floor_d = collision_floor(10.0, 0.1);
    for (std::size_t i = 0; i < blended.size(); ++i)
        for (std::size_t j = i + 1; j < blended.size(); ++j)
            CHECK((blended[i].T - blended[j].T).norm() >= floor_d - 1e-9);
}

TEST_CASE("determinism: same seed, same placements bit for bit") {
    ScaleParams scale = ScaleParams::from_s(0.8);
    RandomStream r1(1234, rng_stage::placement, 3);
    RandomStream r2(1234, rng_stage::placement, 3);
    auto a = place_particles(30, 15.0, {}, {}, scale, {400, 400, 200}, r1);
    auto b = place_particles(30, 15.0, {}, {}, scale, {400, 400, 200}, r2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].T.x == b[i].T.x);
        CHECK(a[i].T.y == b[i].T.y);
        CHECK(a[i].T.z == b[i].T.z);
    }
}

TEST_CASE("context embedding: bounded displacement on a spherical label") {
    // label-1 ball of radius 50 A in a 64^3 grid at 2 A spacing
    int n = 72;
    double vox = 2.0;
    DensityVolume labels(n, n, n, vox, {-n / 2 * vox, -n / 2 * vox, -n / 2 * vox});
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                if (labels.position(i, j, k).norm() <= 50.0) labels.at(i, j, k) = 1.0f;

    RandomStream rng(103, rng_stage::context);
    std::vector<int> ids;
    auto meshes = embed_context(labels, 2.0, rng, &ids);
    REQUIRE(meshes.size() == 1);
    CHECK(ids[0] == 1);
    REQUIRE(!meshes[0].empty());
    for (const Vec3& v : meshes[0].vertices) {
        CHECK(v.norm() >= 46.0);
        CHECK(v.norm() <= 54.0);
    }

    // amplitude 0 reproduces the unperturbed pipeline output
    RandomStream rng2(103, rng_stage::context);
    auto plain = embed_context(labels, 0.0, rng2, nullptr);
    REQUIRE(plain.size() == 1);
    RandomStream rng3(103, rng_stage::context);
    auto plain2 = embed_context(labels, 0.0, rng3, nullptr);
    REQUIRE(plain[0].vertices.size() == plain2[0].vertices.size());
    for (std::size_t i = 0; i < plain[0].vertices.size(); ++i)
        CHECK((plain[0].vertices[i] - plain2[0].vertices[i]).norm() == 0.0);

    // background-only volume: no meshes
    DensityVolume empty(16, 16, 16, 2.0);
    RandomStream rng4(103, rng_stage::context);
    CHECK(embed_context(empty, 2.0, rng4).empty());
}

TEST_CASE("scene manifest round-trips through JSON") {
    Scene scene;
    scene.extents = {400, 400, 120};
    scene.seed = 7;
    scene.scene_index = 2;
    scene.scale = ScaleParams::from_s(0.8);
    Placement p;
    p.structure_id = "demo";
    p.T = {1.5, -2.5, 3.25};
    p.q = euler_to_quaternion(30, 60, 90);
    p.radius = 21.0;
    p.source = PlacementSource::experimental;
    p.confidence = 0.75;
    p.class_rule = "cluster";
    scene.placements.push_back(p);

    Scene back = scene_from_json(scene_to_json(scene));
    REQUIRE(back.placements.size() == 1);
    CHECK(back.extents.x == doctest::Approx(400));
    CHECK(back.seed == 7);
    CHECK(back.scene_index == 2);
    CHECK(back.placements[0].structure_id == "demo");
    CHECK(back.placements[0].T.x == doctest::Approx(1.5));
    CHECK(back.placements[0].q.w == doctest::Approx(p.q.w));
    CHECK(back.placements[0].source == PlacementSource::experimental);
    CHECK(back.placements[0].class_rule == "cluster");
}

} // TEST_SUITE
