#include "ovd/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <png.h>

namespace ovd {

double bilinear_sample(const Image& img, double x, double y, int c) {
    // Shift to the lattice where pixel i sits at coordinate i.
    double px = x - 0.5;
    double py = y - 0.5;
    int x0 = static_cast<int>(std::floor(px));
    int y0 = static_cast<int>(std::floor(py));
    double fx = px - x0;
    double fy = py - y0;
    auto clampx = [&](int v) { return std::clamp(v, 0, img.width - 1); };
    auto clampy = [&](int v) { return std::clamp(v, 0, img.height - 1); };
    double v00 = img.at(clampx(x0), clampy(y0), c);
    double v10 = img.at(clampx(x0 + 1), clampy(y0), c);
    double v01 = img.at(clampx(x0), clampy(y0 + 1), c);
    double v11 = img.at(clampx(x0 + 1), clampy(y0 + 1), c);
    return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

Image resample_region(const Image& src, double x1, double y1, double x2, double y2, int out_w, int out_h) {
    Image out(out_w, out_h);
    double rw = x2 - x1;
    double rh = y2 - y1;
    for (int j = 0; j < out_h; ++j) {
        double sy = y1 + (j + 0.5) * rh / out_h;
        for (int i = 0; i < out_w; ++i) {
            double sx = x1 + (i + 0.5) * rw / out_w;
            for (int c = 0; c < 3; ++c) out.at(i, j, c) = bilinear_sample(src, sx, sy, c);
        }
    }
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;

    auto reflect = [](int i, int n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
        return std::clamp(i, 0, n - 1);
    };

    Image tmp(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * img.at(reflect(x + i, img.width), y, c);
                tmp.at(x, y, c) = acc;
            }
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp.at(x, reflect(y + i, img.height), c);
                out.at(x, y, c) = acc;
            }
    return out;
}

void quantize_u8(Image& img) {
    for (double& v : img.data) {
        int q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        v = q / 255.0;
    }
}

void write_png(const std::string& path, const Image& img) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("png write failed: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(x, y, c), 0.0, 1.0);
                row[static_cast<size_t>(x) * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

Image read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("cannot open for reading: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("png read failed: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    Image img(static_cast<int>(w), static_cast<int>(h));
    std::vector<png_byte> row(static_cast<size_t>(w) * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(static_cast<int>(x), static_cast<int>(y), c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

} // namespace ovd
