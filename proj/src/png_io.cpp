#include "cryosim/png_io.hpp"

#include <algorithm>
#include <cstdio>
#include <vector>

#include <png.h>

#include "cryosim/error.hpp"

namespace cryosim {

void write_png16(const std::string& path, const Micrograph& m) {
    if (m.nx < 1 || m.ny < 1) fail_data("empty micrograph");

    float lo = *std::min_element(m.pixels.begin(), m.pixels.end());
    float hi = *std::max_element(m.pixels.begin(), m.pixels.end());
    double scale = hi > lo ? 65535.0 / (hi - lo) : 0.0;

    std::vector<std::uint16_t> row(m.nx);
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) fail_data("cannot create PNG: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail_internal("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail_data("libpng write error: " + path);
    }

    png_init_io(png, fp);
    png_set_IHDR(png, info, m.nx, m.ny, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap_alpha(png);

    for (int j = 0; j < m.ny; ++j) {
        for (int i = 0; i < m.nx; ++i) {
            double v = (m.at(i, j) - lo) * scale;
            std::uint16_t px = static_cast<std::uint16_t>(std::clamp(v, 0.0, 65535.0));
            // PNG is big-endian
            row[i] = static_cast<std::uint16_t>((px >> 8) | (px << 8));
        }
        png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

} // namespace cryosim
