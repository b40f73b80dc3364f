#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "cryosim/mesh.hpp"
#include "cryosim/quat.hpp"
#include "cryosim/rng.hpp"
#include "cryosim/scale.hpp"
#include "cryosim/star.hpp"
#include "cryosim/vec3.hpp"
#include "cryosim/volume.hpp"

namespace cryosim {

enum class PlacementSource { experimental, synthetic };

struct Placement {
    std::string structure_id;
    Vec3 T;                 // Angstrom, scene frame (extents centered on 0)
    Quaternion q;           // unit, canonical sign
    double radius = 0;      // bounding sphere, Angstrom
    PlacementSource source = PlacementSource::synthetic;
    double confidence = 1.0;
    std::string class_rule = "uniform";
};

struct ClassRule {
    enum class Kind { uniform, cluster, confined, separated };
    Kind kind = Kind::uniform;
    double cluster_spacing = 0;   // Angstrom, kind cluster
    double min_separation = 0;    // Angstrom, kind separated
    const TriangleMesh* confinement = nullptr; // kind confined
};

struct PlaceStrategy {
    enum class Kind { uniform, cluster, grid, interface };
    Kind kind = Kind::uniform;
    const TriangleMesh* surface = nullptr; // kind interface
    double tolerance = 0;                  // Angstrom, kind interface
};

struct Scene {
    Vec3 extents;                          // Angstrom
    std::vector<Placement> placements;
    std::vector<TriangleMesh> context_meshes;
    std::vector<std::string> context_labels;
    ScaleParams scale;
    std::uint64_t seed = 0;
    std::uint32_t scene_index = 0;
};

// Intrinsic ZYZ (RELION rot/tilt/psi): Rz(alpha) Ry(beta) Rz(gamma),
// returned with canonical sign (w >= 0).
Quaternion euler_to_quaternion(double alpha_deg, double beta_deg, double gamma_deg);

// 2D picks -> slab placements: T = (x, y, default_z) * pixel + origin,
// orientation from the Euler triplet when present.
std::vector<Placement> import_experimental_poses(const std::vector<PickRecord>& picks,
                                                 double pixel_size, const Vec3& volume_origin,
                                                 double default_z,
                                                 const std::string& structure_id = "",
                                                 double radius = 0);

struct OrientationParams {
    enum class Mode { uniform, preferred, limited_tilt };
    Mode mode = Mode::uniform;
    Vec3 mu{0, 0, 1};        // preferred axis
    double kappa = 10.0;     // von Mises-Fisher concentration
    double theta_max = M_PI / 6.0;
};

Quaternion sample_orientation(const OrientationParams& params, RandomStream& rng);

// Rejection-sampled positions subject to the collision floor
// 2R(1 - overlap_threshold) (pairwise (R_i + R_j)(1 - ov) for mixed radii);
// the per-particle attempt budget is round(collision_strictness * 1000).
// `existing` placements are obstacles the new ones must also clear.
std::vector<Placement> place_particles(int count, double radius,
                                       const PlaceStrategy& strategy, const ClassRule& rule,
                                       const ScaleParams& scale, const Vec3& extents,
                                       RandomStream& rng,
                                       const std::vector<Placement>& existing = {});

// closed-form helpers (unit-testable pieces of the placement laws)
double collision_floor(double radius, double overlap_threshold);        // 2R(1-ov)
double grid_spacing(double radius, double overlap_threshold);           // 2R(1-ov/2)
inline double grid_jitter_bound(double spacing) { return spacing / 4.0; }

// Confidence-weighted draw from the experimental pool with probability
// w_exp (scaled by the pool's remaining mean confidence), otherwise from the
// synthetic pool; sampling is without replacement and the merged list is
// collision-checked.
std::vector<Placement> blend_placements(const std::vector<Placement>& experimental,
                                        const std::vector<Placement>& synthetic,
                                        double w_exp, RandomStream& rng, int count = -1,
                                        double overlap_threshold = 0.1);

// Per label: binarize, smooth+threshold, isosurface, Laplacian smoothing,
// then normal-direction Perlin displacement scaled to perturb_amplitude.
std::vector<TriangleMesh> embed_context(const DensityVolume& labeled_volume,
                                        double perturb_amplitude, RandomStream& rng,
                                        std::vector<int>* label_ids = nullptr,
                                        std::vector<std::string>* warnings = nullptr);

// ground-truth annotation manifest
std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& text);
void write_scene_file(const std::string& path, const Scene& scene);
Scene read_scene_file(const std::string& path);

} // namespace cryosim
