#pragma once
#include <optional>
#include <utility>
#include <vector>

#include "cryosim/pdb.hpp"
#include "cryosim/rng.hpp"
#include "cryosim/volume.hpp"

namespace cryosim {

// Confidence-stratified displacement amplitudes (Angstrom). Monotone
// non-decreasing from static to flexible; domain ranges get an extra shared
// rigid-body move.
struct ConformerParams {
    double amp_static = 0.0;      // confidence > 90
    double amp_constrained = 0.5; // (70, 90]
    double amp_enhanced = 1.5;    // (50, 70]
    double amp_flexible = 3.0;    // <= 50
    std::vector<std::pair<int, int>> domains; // [begin, end) atom index ranges
    double domain_rot_sigma_deg = 5.0;
    double domain_trans_sigma = 2.0; // Angstrom
};

// Gaussian deposition on a grid with voxel spacing resolution/2. Each atom
// contributes a unit-amplitude isotropic kernel of width
// sigma = r_vdw / (2 * spacing) voxels, truncated at 4 sigma. The box is the
// atom bounding box padded by max(3 r_max, 2 * resolution).
DensityVolume voxelize(const AtomicModel& model, double resolution);

// Same deposition into a caller-fixed box. If more than 10% of atoms fall
// outside, the box grows by 4 r_max on every side and deposition restarts;
// a second violation is an error.
DensityVolume voxelize(const AtomicModel& model, double resolution, const Box3& box);

// Gaussian blur with sigma = resolution / (2 * spacing) voxels followed by
// zeroing everything below 0.005 of the blurred maximum.
DensityVolume smooth_and_threshold(const DensityVolume& vol, double resolution);

AtomicModel perturb_conformer(const AtomicModel& model, const ConformerParams& params,
                              RandomStream& rng);

} // namespace cryosim
