#pragma once

namespace cryosim {

// Composite scale factor s in [0.2, 1.0] and the four linear laws derived
// from it. All downstream geometry/placement knobs key off these fields.
struct ScaleParams {
    double s = 1.0;
    double overlap_threshold = 0.1;   // 0.4 - 0.3 s
    double placement_density = 1.2;   // 0.7 + 0.5 s
    double collision_strictness = 1.0; // 0.5 + 0.5 s
    double mesh_reduction = 0.0;      // 0.7 - 0.7 s

    static ScaleParams from_s(double s);
};

// s_size ladder by particle size plus a density term from local crowding:
// s = 0.7 s_size + 0.3 s_density.
ScaleParams derive_scale_params(double particle_size_A, double volume_size_voxels);

} // namespace cryosim
