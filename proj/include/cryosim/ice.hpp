#pragma once
#include <array>
#include <cmath>
#include <vector>

#include "cryosim/rng.hpp"
#include "cryosim/volume.hpp"

namespace cryosim {

// Classic gradient noise over a seeded permutation table, values in [-1, 1]
// and zero at integer lattice points (hence zero-mean over large fields).
class PerlinField2 {
public:
    explicit PerlinField2(RandomStream& rng);
    double sample(double x, double y) const;

private:
    std::array<int, 512> perm_{};
};

class PerlinField3 {
public:
    explicit PerlinField3(RandomStream& rng);
    double sample(double x, double y, double z) const;

private:
    std::array<int, 512> perm_{};
};

struct IceParams {
    double mu_log = std::log(100.0); // log-normal location, nm
    double sigma_log = 0.2;
    int octaves = 4;                 // octave i: amplitude/2^i nm at wavelength*2^i px
    double amplitude_nm = 5.0;
    double wavelength_px = 10.0;
    double min_nm = 30.0, max_nm = 300.0;
    double density = 0.92;           // g/cm^3, vitrified water
    double density_noise_frac = 0.05;
    double correlation_voxels = 2.0;
    int nz = 1;                      // density grid depth (scene volume co-registration)
};

struct IceSlab {
    int nx = 0, ny = 0;
    double pixel_size = 1.0;          // Angstrom
    double base_thickness_nm = 0;     // the slab's log-normal draw
    std::vector<float> thickness_nm;  // nx*ny
    DensityVolume density;            // g/cm^3, nx*ny*params.nz

    float thickness_at(int i, int j) const {
        return thickness_nm[static_cast<std::size_t>(j) * nx + i];
    }
};

IceSlab generate_ice(int nx, int ny, double pixel_size, const IceParams& params,
                     RandomStream& rng);

// thickness field as a 2D map for inspection
Micrograph thickness_map(const IceSlab& slab);

} // namespace cryosim
