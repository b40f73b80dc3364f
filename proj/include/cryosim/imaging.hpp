#pragma once
#include <map>
#include <string>

#include "cryosim/ice.hpp"
#include "cryosim/rng.hpp"
#include "cryosim/scene.hpp"
#include "cryosim/volume.hpp"

namespace cryosim {

struct CtfParams {
    double voltage_kv = 300.0;
    double defocus_A = 10000.0;      // positive = underfocus
    double cs_mm = 2.7;
    double amplitude_contrast = 0.07; // w
    double b_factor = 0.0;            // Angstrom^2
    double phase_shift = 0.0;         // radians
};

// lambda = 12.2643247 / sqrt(V (1 + 0.978466e-6 V)), V in volts.
double electron_wavelength(double voltage_kv);

// gamma(s) = pi/2 (2 lambda dZ s^2 + lambda^3 Cs s^4) - phi, s in 1/Angstrom
double ctf_gamma(const CtfParams& ctf, double s);
// H(s) = -(sqrt(1-w^2) sin gamma - w cos gamma) exp(-B s^2 / 4)
double ctf_value(const CtfParams& ctf, double s);

// Sum of source densities resampled at R(q)^-1 (r - T) plus the ice density
// scaled by ice_contrast. Output grid spans the scene extents (node-centered,
// origin at -extents/2) at out_spacing.
DensityVolume assemble_potential(const Scene& scene,
                                 const std::map<std::string, DensityVolume>& structures,
                                 const IceSlab* ice, double out_spacing,
                                 double ice_contrast = 0.1);

// Column sums of voxels with z in [z_lo, z_hi], times voxel_size.
Micrograph project(const DensityVolume& vol, double z_lo, double z_hi);

Micrograph ctf_filter(const Micrograph& m, const CtfParams& ctf);
// identity path through the same FFT round trip (H = 1 test hook)
Micrograph ctf_unit_filter(const Micrograph& m);

// pixel = 1 iff the pixel center lies inside some placement's projected disk
Micrograph render_mask(const Scene& scene, int nx, int ny, double pixel_size);

struct NoiseSpec {
    enum class Model { gaussian, poisson, poisson_gaussian };
    Model model = Model::gaussian;
    double target_snr = 0.1; // var(signal)/var(noise); 0 = pure-noise mode
    double dose = 0.0;       // electrons/pixel; 0 = calibrate by bisection
    double sigma = 1.0;      // gaussian sigma in pure-noise mode
};

Micrograph apply_noise(const Micrograph& m, const NoiseSpec& spec, RandomStream& rng);

} // namespace cryosim
