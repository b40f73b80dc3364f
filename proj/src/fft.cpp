#include "cryosim/fft.hpp"

#include <mutex>

#include <fftw3.h>

#include "cryosim/error.hpp"

namespace cryosim {

namespace {
std::mutex plan_mutex;
}

std::vector<std::complex<double>> fft2_r2c(const std::vector<double>& img, int nx, int ny) {
    if (img.size() != static_cast<std::size_t>(nx) * ny) fail_internal("fft2_r2c size mismatch");
    std::vector<double> in = img;
    std::vector<std::complex<double>> out(static_cast<std::size_t>(ny) * (nx / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        plan = fftw_plan_dft_r2c_2d(ny, nx, in.data(),
                                    reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        fftw_destroy_plan(plan);
    }
    return out;
}

std::vector<double> fft2_c2r(const std::vector<std::complex<double>>& spec, int nx, int ny) {
    if (spec.size() != static_cast<std::size_t>(ny) * (nx / 2 + 1))
        fail_internal("fft2_c2r size mismatch");
    std::vector<std::complex<double>> in = spec; // c2r destroys its input
    std::vector<double> out(static_cast<std::size_t>(nx) * ny);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        plan = fftw_plan_dft_c2r_2d(ny, nx, reinterpret_cast<fftw_complex*>(in.data()),
                                    out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        fftw_destroy_plan(plan);
    }
    double scale = 1.0 / (static_cast<double>(nx) * ny);
    for (double& v : out) v *= scale;
    return out;
}

std::vector<std::complex<double>> fft3(const std::vector<std::complex<double>>& in,
                                       int nx, int ny, int nz) {
    if (in.size() != static_cast<std::size_t>(nx) * ny * nz) fail_internal("fft3 size mismatch");
    std::vector<std::complex<double>> buf = in;
    std::vector<std::complex<double>> out(buf.size());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        plan = fftw_plan_dft_3d(nz, ny, nx, reinterpret_cast<fftw_complex*>(buf.data()),
                                reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        fftw_destroy_plan(plan);
    }
    return out;
}

} // namespace cryosim
