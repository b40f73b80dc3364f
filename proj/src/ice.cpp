#include "cryosim/ice.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cryosim/error.hpp"

namespace cryosim {

namespace {

void fill_permutation(std::array<int, 512>& perm, RandomStream& rng) {
    std::array<int, 256> base{};
    std::iota(base.begin(), base.end(), 0);
    for (int i = 255; i > 0; --i) {
        int j = static_cast<int>(rng.uniform() * (i + 1));
        j = std::min(j, i);
        std::swap(base[i], base[j]);
    }
    for (int i = 0; i < 256; ++i) perm[i] = perm[i + 256] = base[i];
}

double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }
double lerp(double t, double a, double b) { return a + t * (b - a); }

double grad2(int hash, double x, double y) {
    switch (hash & 7) {
        case 0: return  x + y;
        case 1: return -x + y;
        case 2: return  x - y;
        case 3: return -x - y;
        case 4: return  x;
        case 5: return -x;
        case 6: return  y;
        default: return -y;
    }
}

double grad3(int hash, double x, double y, double z) {
    switch (hash & 15) {
        case 0:  return  x + y;
        case 1:  return -x + y;
        case 2:  return  x - y;
        case 3:  return -x - y;
        case 4:  return  x + z;
        case 5:  return -x + z;
        case 6:  return  x - z;
        case 7:  return -x - z;
        case 8:  return  y + z;
        case 9:  return -y + z;
        case 10: return  y - z;
        case 11: return -y - z;
        case 12: return  x + y;
        case 13: return -y + z;
        case 14: return -x + y;
        default: return -y - z;
    }
}

} // namespace

PerlinField2::PerlinField2(RandomStream& rng) { fill_permutation(perm_, rng); }

double PerlinField2::sample(double x, double y) const {
    int xi = static_cast<int>(std::floor(x)) & 255;
    int yi = static_cast<int>(std::floor(y)) & 255;
    double xf = x - std::floor(x);
    double yf = y - std::floor(y);
    double u = fade(xf), v = fade(yf);
    int aa = perm_[perm_[xi] + yi];
    int ab = perm_[perm_[xi] + yi + 1];
    int ba = perm_[perm_[xi + 1] + yi];
    int bb = perm_[perm_[xi + 1] + yi + 1];
    double x1 = lerp(u, grad2(aa, xf, yf), grad2(ba, xf - 1, yf));
    double x2 = lerp(u, grad2(ab, xf, yf - 1), grad2(bb, xf - 1, yf - 1));
    return lerp(v, x1, x2);
}

PerlinField3::PerlinField3(RandomStream& rng) { fill_permutation(perm_, rng); }

double PerlinField3::sample(double x, double y, double z) const {
    int xi = static_cast<int>(std::floor(x)) & 255;
    int yi = static_cast<int>(std::floor(y)) & 255;
    int zi = static_cast<int>(std::floor(z)) & 255;
    double xf = x - std::floor(x);
    double yf = y - std::floor(y);
    double zf = z - std::floor(z);
    double u = fade(xf), v = fade(yf), w = fade(zf);
    int aaa = perm_[perm_[perm_[xi] + yi] + zi];
    int aba = perm_[perm_[perm_[xi] + yi + 1] + zi];
    int aab = perm_[perm_[perm_[xi] + yi] + zi + 1];
    int abb = perm_[perm_[perm_[xi] + yi + 1] + zi + 1];
    int baa = perm_[perm_[perm_[xi + 1] + yi] + zi];
    int bba = perm_[perm_[perm_[xi + 1] + yi + 1] + zi];
    int bab = perm_[perm_[perm_[xi + 1] + yi] + zi + 1];
    int bbb = perm_[perm_[perm_[xi + 1] + yi + 1] + zi + 1];
    double x1 = lerp(u, grad3(aaa, xf, yf, zf), grad3(baa, xf - 1, yf, zf));
    double x2 = lerp(u, grad3(aba, xf, yf - 1, zf), grad3(bba, xf - 1, yf - 1, zf));
    double y1 = lerp(v, x1, x2);
    x1 = lerp(u, grad3(aab, xf, yf, zf - 1), grad3(bab, xf - 1, yf, zf - 1));
    x2 = lerp(u, grad3(abb, xf, yf - 1, zf - 1), grad3(bbb, xf - 1, yf - 1, zf - 1));
    double y2 = lerp(v, x1, x2);
    return lerp(w, y1, y2);
}

namespace {

// separable blur of white noise; the kernel's l2 norm is divided out so the
// per-voxel variance stays what the white noise had
void correlate_noise(std::vector<float>& data, int nx, int ny, int nz, double sigma) {
    if (sigma <= 0) return;
    int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * half + 1);
    double sum = 0;
    for (int i = -half; i <= half; ++i) {
        k[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + half];
    }
    double l2 = 0;
    for (double& w : k) { w /= sum; }
    for (double w : k) l2 += w * w;
    double renorm = 1.0 / std::sqrt(l2);

    int dims[3] = {nx, ny, nz};
    std::size_t strides[3] = {1, static_cast<std::size_t>(nx),
                              static_cast<std::size_t>(nx) * ny};
    for (int axis = 0; axis < 3; ++axis) {
        int n = dims[axis];
        if (n < 2) continue;
        std::size_t stride = strides[axis];
        int u_dim = axis == 0 ? ny : nx;
        int v_dim = axis == 2 ? ny : nz;
        std::size_t u_stride = axis == 0 ? strides[1] : strides[0];
        std::size_t v_stride = axis == 2 ? strides[1] : strides[2];
        std::vector<float> line(n);
        for (int v = 0; v < v_dim; ++v)
            for (int u = 0; u < u_dim; ++u) {
                std::size_t base = u * u_stride + v * v_stride;
                for (int i = 0; i < n; ++i) line[i] = data[base + i * stride];
                for (int i = 0; i < n; ++i) {
                    double acc = 0;
                    for (int j = -half; j <= half; ++j) {
                        int idx = i + j;
                        // wrap to keep variance uniform at the borders
                        idx = (idx % n + n) % n;
                        acc += k[j + half] * line[idx];
                    }
                    data[base + i * stride] = static_cast<float>(acc * renorm);
                }
            }
    }
}

} // namespace

IceSlab generate_ice(int nx, int ny, double pixel_size, const IceParams& params,
                     RandomStream& rng) {
    if (nx < 1 || ny < 1) fail_data("ice footprint must be positive");
    if (!(pixel_size > 0)) fail_data("pixel size must be > 0");

    IceSlab slab;
    slab.nx = nx;
    slab.ny = ny;
    slab.pixel_size = pixel_size;
    slab.base_thickness_nm = rng.lognormal(params.mu_log, params.sigma_log);

    // one noise field per octave; octave i runs at wavelength * 2^i pixels
    // with amplitude / 2^i nm
    std::vector<PerlinField2> fields;
    fields.reserve(params.octaves);
    for (int i = 0; i < params.octaves; ++i) fields.emplace_back(rng);

    slab.thickness_nm.resize(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double t = slab.base_thickness_nm;
            for (int o = 0; o < params.octaves; ++o) {
                double wavelength = params.wavelength_px * std::pow(2.0, o);
                double amp = params.amplitude_nm / std::pow(2.0, o);
                t += amp * fields[o].sample(i / wavelength, j / wavelength);
            }
            slab.thickness_nm[static_cast<std::size_t>(j) * nx + i] =
                static_cast<float>(std::clamp(t, params.min_nm, params.max_nm));
        }

    int nz = std::max(1, params.nz);
    slab.density = DensityVolume(nx, ny, nz, pixel_size);
    for (float& v : slab.density.data) v = static_cast<float>(rng.normal());
    correlate_noise(slab.density.data, nx, ny, nz, params.correlation_voxels);
    double sigma = params.density_noise_frac * params.density;
    for (float& v : slab.density.data)
        v = static_cast<float>(std::max(0.0, params.density + sigma * v));
    return slab;
}

Micrograph thickness_map(const IceSlab& slab) {
    Micrograph m(slab.nx, slab.ny, slab.pixel_size);
    m.pixels = slab.thickness_nm;
    return m;
}

} // namespace cryosim
