#pragma once
#include <complex>
#include <vector>

namespace cryosim {

// Thin FFTW wrappers. Plan creation is serialized internally (FFTW planning
// is not thread-safe); FFTW_ESTIMATE keeps plans deterministic across runs.

// 2D real-to-complex / complex-to-real, half-spectrum layout (nx/2+1 fastest).
std::vector<std::complex<double>> fft2_r2c(const std::vector<double>& img, int nx, int ny);
std::vector<double> fft2_c2r(const std::vector<std::complex<double>>& spec, int nx, int ny);

// 3D complex transform, forward sign -1, unnormalized.
std::vector<std::complex<double>> fft3(const std::vector<std::complex<double>>& in,
                                       int nx, int ny, int nz);

} // namespace cryosim
