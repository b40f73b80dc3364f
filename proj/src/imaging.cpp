#include "cryosim/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cryosim/error.hpp"
#include "cryosim/fft.hpp"

namespace cryosim {

double electron_wavelength(double voltage_kv) {
    if (!(voltage_kv > 0)) fail_data("voltage must be > 0");
    double v = voltage_kv * 1000.0; // volts
    return 12.2643247 / std::sqrt(v * (1.0 + 0.978466e-6 * v));
}

double ctf_gamma(const CtfParams& ctf, double s) {
    double lambda = electron_wavelength(ctf.voltage_kv);
    double cs = ctf.cs_mm * 1e7; // mm -> Angstrom
    double s2 = s * s;
    return 0.5 * M_PI * (2.0 * lambda * ctf.defocus_A * s2 + lambda * lambda * lambda * cs * s2 * s2) -
           ctf.phase_shift;
}

double ctf_value(const CtfParams& ctf, double s) {
    double w = ctf.amplitude_contrast;
    double g = ctf_gamma(ctf, s);
    return -(std::sqrt(1.0 - w * w) * std::sin(g) - w * std::cos(g)) *
           std::exp(-0.25 * ctf.b_factor * s * s);
}

DensityVolume assemble_potential(const Scene& scene,
                                 const std::map<std::string, DensityVolume>& structures,
                                 const IceSlab* ice, double out_spacing,
                                 double ice_contrast) {
    if (!(out_spacing > 0)) fail_data("output spacing must be > 0");
    int nx = static_cast<int>(std::lround(scene.extents.x / out_spacing));
    int ny = static_cast<int>(std::lround(scene.extents.y / out_spacing));
    int nz = static_cast<int>(std::lround(scene.extents.z / out_spacing));
    nx = std::max(nx, 1); ny = std::max(ny, 1); nz = std::max(nz, 1);
    DensityVolume out(nx, ny, nz, out_spacing, scene.extents * -0.5);

    for (const Placement& p : scene.placements) {
        auto it = structures.find(p.structure_id);
        if (it == structures.end())
            fail_data("placement references unknown structure '" + p.structure_id + "'");
        const DensityVolume& src = it->second;

        // world-space reach of the source box around T
        Vec3 src_size = {src.voxel_size * (src.nx - 1), src.voxel_size * (src.ny - 1),
                         src.voxel_size * (src.nz - 1)};
        Vec3 src_center = src.origin + src_size * 0.5;
        double reach = 0.5 * src_size.norm();

        Mat3 rot = p.q.to_matrix();            // particle -> world
        Mat3 inv = rot.transposed();           // world -> particle
        Vec3 world_center = p.T + rot.apply(src_center);

        int i0 = std::max(0, static_cast<int>(std::floor((world_center.x - reach - out.origin.x) / out_spacing)));
        int i1 = std::min(nx - 1, static_cast<int>(std::ceil((world_center.x + reach - out.origin.x) / out_spacing)));
        int j0 = std::max(0, static_cast<int>(std::floor((world_center.y - reach - out.origin.y) / out_spacing)));
        int j1 = std::min(ny - 1, static_cast<int>(std::ceil((world_center.y + reach - out.origin.y) / out_spacing)));
        int k0 = std::max(0, static_cast<int>(std::floor((world_center.z - reach - out.origin.z) / out_spacing)));
        int k1 = std::min(nz - 1, static_cast<int>(std::ceil((world_center.z + reach - out.origin.z) / out_spacing)));

        for (int k = k0; k <= k1; ++k)
            for (int j = j0; j <= j1; ++j)
                for (int i = i0; i <= i1; ++i) {
                    Vec3 r = out.position(i, j, k);
                    Vec3 local = inv.apply(r - p.T);
                    double v = src.sample_trilinear(local);
                    if (v != 0.0) out.at(i, j, k) += static_cast<float>(v);
                }
    }

    if (ice && ice_contrast != 0.0) {
        bool coregistered = ice->density.nx == nx && ice->density.ny == ny &&
                            ice->density.nz == nz;
        for (int k = 0; k < nz; ++k) {
            double z = out.origin.z + k * out_spacing;
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    int ti = std::min(i, ice->nx - 1), tj = std::min(j, ice->ny - 1);
                    double half_thick = 0.5 * ice->thickness_at(ti, tj) * 10.0; // nm -> A
                    if (std::abs(z) > half_thick) continue;
                    double rho;
                    if (coregistered) {
                        rho = ice->density.at(i, j, k);
                    } else {
                        Vec3 rel = out.position(i, j, k) - out.origin;
                        rho = ice->density.sample_trilinear(ice->density.origin + rel);
                    }
                    out.at(i, j, k) += static_cast<float>(ice_contrast * rho);
                }
        }
    }
    return out;
}

Micrograph project(const DensityVolume& vol, double z_lo, double z_hi) {
    if (!(z_hi >= z_lo)) fail_data("empty projection slab");
    int k0 = std::max(0, static_cast<int>(std::ceil((z_lo - vol.origin.z) / vol.voxel_size - 1e-9)));
    int k1 = std::min(vol.nz - 1,
                      static_cast<int>(std::floor((z_hi - vol.origin.z) / vol.voxel_size + 1e-9)));
    if (k0 > k1) fail_data("projection slab contains no voxel planes");

    Micrograph m(vol.nx, vol.ny, vol.voxel_size, "clean");
    std::vector<double> acc(m.size(), 0.0);
    for (int k = k0; k <= k1; ++k)
        for (int j = 0; j < vol.ny; ++j) {
            const float* src = &vol.data[vol.index(0, j, k)];
            double* dst = &acc[static_cast<std::size_t>(j) * vol.nx];
            for (int i = 0; i < vol.nx; ++i) dst[i] += src[i];
        }
    for (std::size_t i = 0; i < acc.size(); ++i)
        m.pixels[i] = static_cast<float>(acc[i] * vol.voxel_size);
    return m;
}

namespace {

Micrograph apply_spectrum_filter(const Micrograph& m, const CtfParams* ctf) {
    for (float v : m.pixels)
        if (!std::isfinite(v)) fail_data("non-finite micrograph pixel");

    int nx = m.nx, ny = m.ny;
    std::vector<double> img(m.pixels.begin(), m.pixels.end());
    auto spec = fft2_r2c(img, nx, ny);

    int half = nx / 2 + 1;
    for (int j = 0; j < ny; ++j) {
        double ky = (j <= ny / 2 ? j : j - ny) / (ny * m.pixel_size); // cycles/A
        for (int i = 0; i < half; ++i) {
            double kx = i / (nx * m.pixel_size);
            double s = std::sqrt(kx * kx + ky * ky);
            double h = ctf ? ctf_value(*ctf, s) : 1.0;
            spec[static_cast<std::size_t>(j) * half + i] *= h;
        }
    }
    auto back = fft2_c2r(spec, nx, ny);

    Micrograph out(nx, ny, m.pixel_size, "ctf");
    for (std::size_t i = 0; i < back.size(); ++i) out.pixels[i] = static_cast<float>(back[i]);
    if (!ctf) out.provenance = m.provenance;
    return out;
}

} // namespace

Micrograph ctf_filter(const Micrograph& m, const CtfParams& ctf) {
    return apply_spectrum_filter(m, &ctf);
}

Micrograph ctf_unit_filter(const Micrograph& m) {
    return apply_spectrum_filter(m, nullptr);
}

Micrograph render_mask(const Scene& scene, int nx, int ny, double pixel_size) {
    Micrograph mask(nx, ny, pixel_size, "mask");
    Vec3 origin = scene.extents * -0.5;
    for (const Placement& p : scene.placements) {
        double cx = (p.T.x - origin.x) / pixel_size; // pixel units
        double cy = (p.T.y - origin.y) / pixel_size;
        double r = p.radius / pixel_size;
        int i0 = std::max(0, static_cast<int>(std::floor(cx - r)));
        int i1 = std::min(nx - 1, static_cast<int>(std::ceil(cx + r)));
        int j0 = std::max(0, static_cast<int>(std::floor(cy - r)));
        int j1 = std::min(ny - 1, static_cast<int>(std::ceil(cy + r)));
        double r2 = r * r;
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                double dx = i - cx, dy = j - cy;
                if (dx * dx + dy * dy <= r2) mask.at(i, j) = 1.0f;
            }
    }
    return mask;
}

namespace {

double measured_snr(const Micrograph& clean, const Micrograph& noisy) {
    std::vector<float> delta(clean.size());
    for (std::size_t i = 0; i < delta.size(); ++i)
        delta[i] = noisy.pixels[i] - clean.pixels[i];
    double vn = variance_of(delta);
    if (vn <= 0) return std::numeric_limits<double>::infinity();
    return variance_of(clean.pixels) / vn;
}

Micrograph poisson_stage(const Micrograph& m, double dose, RandomStream& rng) {
    // shift to a non-negative signal, scale so the mean count is `dose`,
    // draw counts, scale back
    float lo = *std::min_element(m.pixels.begin(), m.pixels.end());
    std::vector<double> shifted(m.size());
    double mean_s = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        shifted[i] = m.pixels[i] - lo;
        mean_s += shifted[i];
    }
    mean_s /= m.size();
    if (mean_s <= 0) fail_data("degenerate signal for poisson noise");

    Micrograph out = m;
    out.provenance = "noisy";
    double scale = dose / mean_s;
    for (std::size_t i = 0; i < m.size(); ++i) {
        double lambda = shifted[i] * scale;
        double counts = static_cast<double>(rng.poisson(lambda));
        out.pixels[i] = static_cast<float>(counts / scale + lo);
    }
    return out;
}

// Bisect the dose until the realized noise hits the target SNR within 5%.
// SNR grows monotonically with dose, so log-space bisection converges; each
// trial uses its own derived stream for reproducibility.
Micrograph calibrated_poisson(const Micrograph& m, double target_snr, double dose_hint,
                              RandomStream& rng) {
    double var_signal = variance_of(m.pixels);
    if (var_signal <= 0) fail_data("constant image: SNR calibration undefined");

    // expectation: var_noise ~= mean(shifted)^2 / dose
    float lo_px = *std::min_element(m.pixels.begin(), m.pixels.end());
    double mean_shifted = mean_of(m.pixels) - lo_px;
    double dose0 = dose_hint > 0 ? dose_hint
                                 : target_snr * mean_shifted * mean_shifted / var_signal;
    dose0 = std::max(dose0, 1e-12);

    double lo = dose0 / 16.0, hi = dose0 * 16.0;
    std::uint32_t sub = 0;
    for (int guard = 0; guard < 16; ++guard) {
        RandomStream s = rng.substream(sub++);
        if (measured_snr(m, poisson_stage(m, lo, s)) <= target_snr) break;
        lo /= 16.0;
    }
    for (int guard = 0; guard < 16; ++guard) {
        RandomStream s = rng.substream(sub++);
        if (measured_snr(m, poisson_stage(m, hi, s)) >= target_snr) break;
        hi *= 16.0;
    }

    Micrograph best = m;
    for (int iter = 0; iter < 32; ++iter) {
        double mid = std::sqrt(lo * hi);
        RandomStream s = rng.substream(sub++);
        best = poisson_stage(m, mid, s);
        double snr = measured_snr(m, best);
        if (std::abs(snr - target_snr) <= 0.05 * target_snr) break;
        if (snr < target_snr) lo = mid;
        else hi = mid;
    }
    return best;
}

} // namespace

Micrograph apply_noise(const Micrograph& m, const NoiseSpec& spec, RandomStream& rng) {
    Micrograph out = m;
    out.provenance = "noisy";

    if (spec.target_snr == 0.0) {
        // pure-noise sentinel: additive gaussian with the given sigma
        for (float& v : out.pixels) v += static_cast<float>(rng.normal(0.0, spec.sigma));
        return out;
    }
    if (!(spec.target_snr > 0)) fail_data("target SNR must be positive");

    double var_signal = variance_of(m.pixels);
    if (var_signal <= 0)
        fail_data("constant image has no signal variance; use the pure-noise mode (snr = 0)");

    switch (spec.model) {
    case NoiseSpec::Model::gaussian: {
        double sigma = std::sqrt(var_signal / spec.target_snr);
        for (float& v : out.pixels) v += static_cast<float>(rng.normal(0.0, sigma));
        return out;
    }
    case NoiseSpec::Model::poisson: {
        return calibrated_poisson(m, spec.target_snr, spec.dose, rng);
    }
    case NoiseSpec::Model::poisson_gaussian: {
        // split the noise budget 50/50: the poisson stage alone runs at
        // twice the target SNR, then gaussian adds the other half
        Micrograph staged = calibrated_poisson(m, 2.0 * spec.target_snr, spec.dose, rng);
        double sigma = std::sqrt(var_signal / (2.0 * spec.target_snr));
        for (float& v : staged.pixels) v += static_cast<float>(rng.normal(0.0, sigma));
        staged.provenance = "noisy";
        return staged;
    }
    }
    fail_internal("unknown noise model");
}

} // namespace cryosim
