#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ovd {

// Row-major H x W x 3 image, intensities in [0, 1], double precision so the
// whole pipeline stays bit-reproducible.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data; // size = height * width * 3

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, fill) {}

    double& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    bool empty() const { return data.empty(); }
};

// Bilinear sample at continuous point (x, y) in pixel-center coordinates:
// pixel (i, j) has its center at (i + 0.5, j + 0.5). Clamps at borders.
double bilinear_sample(const Image& img, double x, double y, int c);

// Resamples the continuous region [x1,x2]x[y1,y2] of `src` onto an
// out_w x out_h grid, sampling each output pixel at its bin center.
Image resample_region(const Image& src, double x1, double y1, double x2, double y2, int out_w, int out_h);

// Separable Gaussian blur with reflect borders.
Image gaussian_blur(const Image& img, double sigma);

// 8-bit RGB PNG I/O. Values are quantized with round(v * 255) on write and
// mapped back as v / 255 on read, so write-then-read is a fixed point.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

// Quantizes to the 8-bit grid in place (the representation PNG files carry).
void quantize_u8(Image& img);

} // namespace ovd
