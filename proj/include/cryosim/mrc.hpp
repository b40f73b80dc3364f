#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cryosim/vec3.hpp"
#include "cryosim/volume.hpp"

namespace cryosim {

struct VolumeHeader {
    std::int32_t nx = 0, ny = 0, nz = 0;
    std::int32_t mode = 2;      // only mode 2 (float32) supported
    Vec3 voxel_size{1, 1, 1};   // Angstrom per voxel along each axis
    Vec3 origin;                // Angstrom
};

// MRC2014, mode 2, little-endian. write_volume . read_volume is the identity
// on (header, grid); the payload round-trips bit-exactly.
std::pair<VolumeHeader, std::vector<float>> read_volume(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> write_volume(const VolumeHeader& header, const std::vector<float>& grid);

DensityVolume read_volume_file(const std::string& path);
void write_volume_file(const std::string& path, const DensityVolume& vol);

Micrograph read_micrograph_file(const std::string& path);
void write_micrograph_file(const std::string& path, const Micrograph& m);

} // namespace cryosim
