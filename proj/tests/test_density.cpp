#include <doctest.h>

#include <cmath>

#include "cryosim/density.hpp"
#include "cryosim/error.hpp"
#include "test_helpers.hpp"

using namespace cryosim;

TEST_SUITE("density") {

TEST_CASE("voxel spacing is resolution/2 and kernel width follows r_vdw/(2 spacing)") {
    AtomicModel m = test_helpers::helix_model(20);
    DensityVolume vol = voxelize(m, 4.0);
    CHECK(vol.voxel_size == doctest::Approx(2.0));
    // carbon: sigma = 1.7 / (2*2) = 0.425 voxels
    CHECK(1.7 / (2.0 * vol.voxel_size) == doctest::Approx(0.425));
}

TEST_CASE("margin is max(3 r_max, 2 resolution) around the bounding box") {
    // single atom with vdw 2.0 would need a custom element; sulfur r=1.8
    std::string text = test_helpers::atom_line(1, "S", 0, 0, 0, 50);
    AtomicModel m = parse_atomic_model(text);
    double resolution = 4.0;
    double margin = std::max(3.0 * m.r_max, 2.0 * resolution); // max(5.4, 8) = 8
    CHECK(margin == doctest::Approx(8.0));
    DensityVolume vol = voxelize(m, resolution);
    CHECK(vol.origin.x == doctest::Approx(-8.0));
    CHECK(vol.origin.y == doctest::Approx(-8.0));
    CHECK(vol.origin.z == doctest::Approx(-8.0));
    double top = vol.origin.x + (vol.nx - 1) * vol.voxel_size;
    CHECK(top >= 8.0);
}

TEST_CASE("mass proportionality: grid sum approximates sum of analytic gaussian integrals") {
    // kernels with sigma >= ~0.9 voxels keep lattice aliasing far below 1%;
    // sulfur at resolution 2 gives sigma = 1.8/2 = 0.9
    std::string t2;
    t2 += test_helpers::atom_line(1, "S", -6, 0, 0, 50);
    t2 += test_helpers::atom_line(2, "S", 6, 0, 0, 50);
    t2 += test_helpers::atom_line(3, "S", 0, 6, 0, 50);
    AtomicModel ms = parse_atomic_model(t2);
    DensityVolume vol = voxelize(ms, 2.0);

    double sum = 0;
    for (float v : vol.data) sum += v;
    double sigma = 1.8 / (2.0 * vol.voxel_size);
    double expected = 3.0 * std::pow(2.0 * M_PI, 1.5) * sigma * sigma * sigma;
    CHECK(sum == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("translation by whole voxels shifts the grid bit-comparably") {
    AtomicModel m = test_helpers::helix_model(12);
    double resolution = 4.0;
    double spacing = resolution / 2.0;

    Box3 box{{-40, -40, -40}, {40, 40, 40}};
    DensityVolume a = voxelize(m, resolution, box);

    AtomicModel shifted = m;
    for (Atom& atom : shifted.atoms) atom.position += Vec3{2 * spacing, 0, 0};
    DensityVolume b = voxelize(shifted, resolution, box);

    // compare away from the x boundaries
    bool equal = true;
    for (int k = 0; k < a.nz && equal; ++k)
        for (int j = 0; j < a.ny && equal; ++j)
            for (int i = 8; i < a.nx - 8 && equal; ++i)
                if (a.at(i, j, k) != b.at(i + 2, j, k)) equal = false;
    CHECK(equal);
}

TEST_CASE("explicit box: >10% violations expand once, twice is an error") {
    AtomicModel m = test_helpers::helix_model(16);
    Box3 far_box{{1000, 1000, 1000}, {1100, 1100, 1100}};
    CHECK_THROWS_AS(voxelize(m, 4.0, far_box), error);

    // box that misses the model by less than 4 r_max on one side: one
    // expansion recovers it (helix spans |x|,|y| <= 8)
    Box3 near_miss{{-12, -12, -12}, {5, 12, 12}}; // cuts off x > 5
    DensityVolume vol = voxelize(m, 4.0, near_miss);
    CHECK(vol.nx > 0);
}

TEST_CASE("smoothing sigma formula and relative threshold") {
    AtomicModel m = test_helpers::helix_model(30, 95.0);
    DensityVolume vol = voxelize(m, 4.0);
    // sigma_smooth = resolution / (2 spacing) = 1 voxel
    CHECK(4.0 / (2.0 * vol.voxel_size) == doctest::Approx(1.0));

    DensityVolume out = smooth_and_threshold(vol, 4.0);
    float mx = out.max_value();
    REQUIRE(mx > 0);
    int below = 0;
    for (float v : out.data) {
        CHECK(v >= 0.0f);
        if (v != 0.0f && v < 0.005f * mx) ++below;
    }
    CHECK(below == 0);
}

TEST_CASE("all-zero volume passes smoothing unchanged") {
    DensityVolume zero(8, 8, 8, 2.0);
    DensityVolume out = smooth_and_threshold(zero, 4.0);
    for (float v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("confidence > 90 stays put under default amplitudes") {
    AtomicModel m = test_helpers::helix_model(25, 95.0);
    ConformerParams params;
    RandomStream rng(5, rng_stage::conformer);
    AtomicModel out = perturb_conformer(m, params, rng);
    REQUIRE(out.atoms.size() == m.atoms.size());
    for (std::size_t i = 0; i < m.atoms.size(); ++i)
        CHECK((out.atoms[i].position - m.atoms[i].position).norm() == 0.0);
}

TEST_CASE("all-zero amplitudes is the identity regardless of confidence") {
    AtomicModel m = test_helpers::helix_model(25, 40.0);
    ConformerParams params;
    params.amp_constrained = params.amp_enhanced = params.amp_flexible = 0.0;
    RandomStream rng(6, rng_stage::conformer);
    AtomicModel out = perturb_conformer(m, params, rng);
    for (std::size_t i = 0; i < m.atoms.size(); ++i)
        CHECK((out.atoms[i].position - m.atoms[i].position).norm() == 0.0);
}

TEST_CASE("constrained stratum: per-axis displacement std matches the amplitude") {
    std::string text = test_helpers::atom_line(1, "C", 0, 0, 0, 80.0);
    AtomicModel m = parse_atomic_model(text);
    ConformerParams params; // constrained amplitude 0.5
    RandomStream rng(7, rng_stage::conformer);
    const int n = 10000;
    double sum2x = 0, sum2y = 0, sum2z = 0;
    for (int i = 0; i < n; ++i) {
        AtomicModel out = perturb_conformer(m, params, rng);
        Vec3 d = out.atoms[0].position - m.atoms[0].position;
        sum2x += d.x * d.x;
        sum2y += d.y * d.y;
        sum2z += d.z * d.z;
    }
    CHECK(std::sqrt(sum2x / n) == doctest::Approx(0.5).epsilon(0.05));
    CHECK(std::sqrt(sum2y / n) == doctest::Approx(0.5).epsilon(0.05));
    CHECK(std::sqrt(sum2z / n) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("strata boundaries: 90 is constrained, 70 is enhanced, 50 is flexible") {
    std::string text;
    text += test_helpers::atom_line(1, "C", 0, 0, 0, 90.0);
    text += test_helpers::atom_line(2, "C", 10, 0, 0, 70.0);
    text += test_helpers::atom_line(3, "C", 20, 0, 0, 50.0);
    AtomicModel m = parse_atomic_model(text);
    ConformerParams params;
    params.amp_constrained = 0.0; // make the boundary observable
    params.amp_enhanced = 0.0;
    params.amp_flexible = 5.0;
    RandomStream rng(8, rng_stage::conformer);
    AtomicModel out = perturb_conformer(m, params, rng);
    CHECK((out.atoms[0].position - m.atoms[0].position).norm() == 0.0); // 90 -> constrained(0)
    CHECK((out.atoms[1].position - m.atoms[1].position).norm() == 0.0); // 70 -> enhanced(0)
    CHECK((out.atoms[2].position - m.atoms[2].position).norm() > 0.0);  // 50 -> flexible
}

TEST_CASE("domain partition applies a shared rigid move and keeps topology") {
    AtomicModel m = test_helpers::helix_model(30, 95.0);
    ConformerParams params;
    params.domains = {{0, 15}};
    RandomStream rng(9, rng_stage::conformer);
    AtomicModel out = perturb_conformer(m, params, rng);
    REQUIRE(out.atoms.size() == m.atoms.size());

    // rigid: pairwise distances inside the domain preserved
    for (int i : {0, 3, 7}) {
        for (int j : {1, 9, 14}) {
            double before = (m.atoms[i].position - m.atoms[j].position).norm();
            double after = (out.atoms[i].position - out.atoms[j].position).norm();
            CHECK(after == doctest::Approx(before).epsilon(1e-9));
        }
    }
    // atoms outside the domain (confidence 95, amplitude 0) unchanged
    for (int i = 15; i < 30; ++i)
        CHECK((out.atoms[i].position - m.atoms[i].position).norm() == 0.0);
    // and the domain actually moved
    double moved = 0;
    for (int i = 0; i < 15; ++i)
        moved += (out.atoms[i].position - m.atoms[i].position).norm();
    CHECK(moved > 0.0);
}

TEST_CASE("identical seeds give identical perturbed models") {
    AtomicModel m = test_helpers::helix_model(40, 60.0);
    ConformerParams params;
    RandomStream r1(321, rng_stage::conformer, 2);
    RandomStream r2(321, rng_stage::conformer, 2);
    AtomicModel a = perturb_conformer(m, params, r1);
    AtomicModel b = perturb_conformer(m, params, r2);
    for (std::size_t i = 0; i < a.atoms.size(); ++i) {
        CHECK(a.atoms[i].position.x == b.atoms[i].position.x);
        CHECK(a.atoms[i].position.y == b.atoms[i].position.y);
        CHECK(a.atoms[i].position.z == b.atoms[i].position.z);
    }
}

} // TEST_SUITE
