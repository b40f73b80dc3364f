#include "cryosim/mrc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cryosim/error.hpp"

namespace cryosim {

namespace {

constexpr std::size_t kHeaderSize = 1024;

// This code assumes a little-endian host (checked at startup of the tests);
// fields are memcpy'd in and out of the header block.
void put_i32(std::vector<std::uint8_t>& buf, std::size_t word, std::int32_t v) {
    std::memcpy(buf.data() + (word - 1) * 4, &v, 4);
}
void put_f32(std::vector<std::uint8_t>& buf, std::size_t word, float v) {
    std::memcpy(buf.data() + (word - 1) * 4, &v, 4);
}
std::int32_t get_i32(const std::vector<std::uint8_t>& buf, std::size_t word) {
    std::int32_t v;
    std::memcpy(&v, buf.data() + (word - 1) * 4, 4);
    return v;
}
float get_f32(const std::vector<std::uint8_t>& buf, std::size_t word) {
    float v;
    std::memcpy(&v, buf.data() + (word - 1) * 4, 4);
    return v;
}

} // namespace

std::vector<std::uint8_t> write_volume(const VolumeHeader& header, const std::vector<float>& grid) {
    if (header.nx < 1 || header.ny < 1 || header.nz < 1)
        fail_data("volume dimensions must be >= 1");
    std::size_t n = static_cast<std::size_t>(header.nx) * header.ny * header.nz;
    if (grid.size() != n) fail_data("grid size does not match header dimensions");

    std::vector<std::uint8_t> buf(kHeaderSize + n * 4, 0);
    put_i32(buf, 1, header.nx);
    put_i32(buf, 2, header.ny);
    put_i32(buf, 3, header.nz);
    put_i32(buf, 4, 2); // mode 2 = float32
    // nxstart/nystart/nzstart (5-7) stay 0; mx/my/mz mirror the grid size
    put_i32(buf, 8, header.nx);
    put_i32(buf, 9, header.ny);
    put_i32(buf, 10, header.nz);
    put_f32(buf, 11, static_cast<float>(header.voxel_size.x * header.nx));
    put_f32(buf, 12, static_cast<float>(header.voxel_size.y * header.ny));
    put_f32(buf, 13, static_cast<float>(header.voxel_size.z * header.nz));
    put_f32(buf, 14, 90.0f);
    put_f32(buf, 15, 90.0f);
    put_f32(buf, 16, 90.0f);
    put_i32(buf, 17, 1); // mapc
    put_i32(buf, 18, 2); // mapr
    put_i32(buf, 19, 3); // maps
    float dmin = grid.empty() ? 0.0f : *std::min_element(grid.begin(), grid.end());
    float dmax = grid.empty() ? 0.0f : *std::max_element(grid.begin(), grid.end());
    double sum = 0;
    for (float v : grid) sum += v;
    put_f32(buf, 20, dmin);
    put_f32(buf, 21, dmax);
    put_f32(buf, 22, grid.empty() ? 0.0f : static_cast<float>(sum / grid.size()));
    put_i32(buf, 23, header.nz > 1 ? 1 : 0); // ispg: volume vs single image
    put_i32(buf, 24, 0);                     // nsymbt
    put_f32(buf, 50, static_cast<float>(header.origin.x));
    put_f32(buf, 51, static_cast<float>(header.origin.y));
    put_f32(buf, 52, static_cast<float>(header.origin.z));
    buf[208] = 'M'; buf[209] = 'A'; buf[210] = 'P'; buf[211] = ' ';
    buf[212] = 0x44; buf[213] = 0x44; // little-endian machine stamp

    std::memcpy(buf.data() + kHeaderSize, grid.data(), n * 4);
    return buf;
}

std::pair<VolumeHeader, std::vector<float>> read_volume(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kHeaderSize) fail_data("MRC container truncated: header shorter than 1024 bytes");
    if (bytes[208] != 'M' || bytes[209] != 'A' || bytes[210] != 'P' || bytes[211] != ' ')
        fail_data("not an MRC2014 container: missing 'MAP ' stamp");
    if (bytes[212] != 0x44)
        fail_data("unsupported MRC byte order (machine stamp is not little-endian)");

    VolumeHeader h;
    h.nx = get_i32(bytes, 1);
    h.ny = get_i32(bytes, 2);
    h.nz = get_i32(bytes, 3);
    h.mode = get_i32(bytes, 4);
    if (h.mode != 2) fail_data("unsupported MRC mode " + std::to_string(h.mode) + " (only mode 2)");
    if (h.nx < 1 || h.ny < 1 || h.nz < 1) fail_data("invalid MRC dimensions");

    std::int32_t mx = get_i32(bytes, 8), my = get_i32(bytes, 9), mz = get_i32(bytes, 10);
    double cx = get_f32(bytes, 11), cy = get_f32(bytes, 12), cz = get_f32(bytes, 13);
    h.voxel_size = {cx / (mx > 0 ? mx : h.nx), cy / (my > 0 ? my : h.ny), cz / (mz > 0 ? mz : h.nz)};
    if (!(h.voxel_size.x > 0) || !(h.voxel_size.y > 0) || !(h.voxel_size.z > 0))
        h.voxel_size = {1, 1, 1};
    h.origin = {get_f32(bytes, 50), get_f32(bytes, 51), get_f32(bytes, 52)};

    std::size_t nsymbt = static_cast<std::size_t>(std::max(0, get_i32(bytes, 24)));
    // overflow-safe size check before touching the payload
    double need = static_cast<double>(h.nx) * h.ny * h.nz * 4.0 + nsymbt + kHeaderSize;
    if (need > static_cast<double>(bytes.size()))
        fail_data("MRC payload truncated: header promises more data than present");
    std::size_t n = static_cast<std::size_t>(h.nx) * h.ny * h.nz;

    std::vector<float> grid(n);
    std::memcpy(grid.data(), bytes.data() + kHeaderSize + nsymbt, n * 4);
    return {h, std::move(grid)};
}

namespace {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("cannot open file: " + path);
    f.seekg(0, std::ios::end);
    std::streamoff len = f.tellg();
    f.seekg(0);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len));
    f.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!f) fail_data("short read: " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail_data("cannot create file: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail_data("short write: " + path);
}

} // namespace

DensityVolume read_volume_file(const std::string& path) {
    auto [h, grid] = read_volume(read_file_bytes(path));
    DensityVolume vol;
    vol.nx = h.nx; vol.ny = h.ny; vol.nz = h.nz;
    vol.voxel_size = h.voxel_size.x;
    vol.origin = h.origin;
    vol.data = std::move(grid);
    return vol;
}

void write_volume_file(const std::string& path, const DensityVolume& vol) {
    VolumeHeader h;
    h.nx = vol.nx; h.ny = vol.ny; h.nz = vol.nz;
    h.voxel_size = {vol.voxel_size, vol.voxel_size, vol.voxel_size};
    h.origin = vol.origin;
    write_file_bytes(path, write_volume(h, vol.data));
}

Micrograph read_micrograph_file(const std::string& path) {
    auto [h, grid] = read_volume(read_file_bytes(path));
    if (h.nz != 1) fail_data("expected a 2D micrograph (nz = 1): " + path);
    Micrograph m;
    m.nx = h.nx; m.ny = h.ny;
    m.pixel_size = h.voxel_size.x;
    m.pixels = std::move(grid);
    return m;
}

void write_micrograph_file(const std::string& path, const Micrograph& m) {
    VolumeHeader h;
    h.nx = m.nx; h.ny = m.ny; h.nz = 1;
    h.voxel_size = {m.pixel_size, m.pixel_size, m.pixel_size};
    write_file_bytes(path, write_volume(h, m.pixels));
}

} // namespace cryosim
