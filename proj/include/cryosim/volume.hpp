#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include "cryosim/vec3.hpp"

namespace cryosim {

// Regular scalar grid, x fastest. Grid node (i,j,k) sits at
// origin + (i,j,k) * voxel_size (node-centered convention, matching MRC).
struct DensityVolume {
    int nx = 0, ny = 0, nz = 0;
    double voxel_size = 1.0; // Angstrom, cubic voxels
    Vec3 origin;             // Angstrom
    std::vector<float> data; // nx*ny*nz

    DensityVolume() = default;
    DensityVolume(int nx_, int ny_, int nz_, double vox, Vec3 org = {})
        : nx(nx_), ny(ny_), nz(nz_), voxel_size(vox), origin(org),
          data(static_cast<std::size_t>(nx_) * ny_ * nz_, 0.0f) {}

    std::size_t size() const { return data.size(); }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(k) * nx * ny + static_cast<std::size_t>(j) * nx + i;
    }
    float& at(int i, int j, int k) { return data[index(i, j, k)]; }
    float at(int i, int j, int k) const { return data[index(i, j, k)]; }

    Vec3 position(int i, int j, int k) const {
        return origin + Vec3{i * voxel_size, j * voxel_size, k * voxel_size};
    }

    float max_value() const;
    // Trilinear interpolation at an Angstrom position; 0 outside the grid.
    double sample_trilinear(const Vec3& p) const;
};

struct Micrograph {
    int nx = 0, ny = 0;
    double pixel_size = 1.0;            // Angstrom
    std::string provenance = "clean";   // clean | ctf | noisy | mask
    std::vector<float> pixels;          // x fastest

    Micrograph() = default;
    Micrograph(int nx_, int ny_, double pix, std::string prov = "clean")
        : nx(nx_), ny(ny_), pixel_size(pix), provenance(std::move(prov)),
          pixels(static_cast<std::size_t>(nx_) * ny_, 0.0f) {}

    std::size_t size() const { return pixels.size(); }
    float& at(int i, int j) { return pixels[static_cast<std::size_t>(j) * nx + i]; }
    float at(int i, int j) const { return pixels[static_cast<std::size_t>(j) * nx + i]; }
};

double mean_of(const std::vector<float>& v);
double variance_of(const std::vector<float>& v);

} // namespace cryosim
