#include "cryosim/scale.hpp"

#include <algorithm>

#include "cryosim/error.hpp"

namespace cryosim {

ScaleParams ScaleParams::from_s(double s) {
    ScaleParams p;
    p.s = s;
    p.overlap_threshold = 0.4 - 0.3 * s;
    p.placement_density = 0.7 + 0.5 * s;
    p.collision_strictness = 0.5 + 0.5 * s;
    p.mesh_reduction = 0.7 - 0.7 * s;
    return p;
}

ScaleParams derive_scale_params(double particle_size_A, double volume_size_voxels) {
    if (!(particle_size_A > 0)) fail_data("particle size must be > 0");
    if (!(volume_size_voxels > 0)) fail_data("volume size must be > 0");

    double s_size;
    if (particle_size_A < 10.0) s_size = 1.0;
    else if (particle_size_A <= 50.0) s_size = 0.8;
    else if (particle_size_A <= 200.0) s_size = 0.6;
    else if (particle_size_A <= 1000.0) s_size = 0.4;
    else s_size = 0.2;

    double s_density = std::min(1.0, particle_size_A * particle_size_A * particle_size_A /
                                         (volume_size_voxels / 1000.0));
    return ScaleParams::from_s(0.7 * s_size + 0.3 * s_density);
}

} // namespace cryosim
