#pragma once

#include "ovd/geometry.hpp"
#include "ovd/rng.hpp"

namespace ovd {

// Invertible per-axis affine map between image frames (flip + scale about
// the image center). Photometric changes never enter here.
struct BoxTransform {
    double ax = 1.0, bx = 0.0;
    double ay = 1.0, by = 0.0;

    double map_x(double x) const { return ax * x + bx; }
    double map_y(double y) const { return ay * y + by; }
    double unmap_x(double x) const { return (x - bx) / ax; }
    double unmap_y(double y) const { return (y - by) / ay; }

    BBox apply(const BBox& b) const {
        double x1 = map_x(b.x1), x2 = map_x(b.x2);
        double y1 = map_y(b.y1), y2 = map_y(b.y2);
        return BBox(std::min(x1, x2), std::min(y1, y2), std::max(x1, x2), std::max(y1, y2));
    }
    BBox invert(const BBox& b) const {
        double x1 = unmap_x(b.x1), x2 = unmap_x(b.x2);
        double y1 = unmap_y(b.y1), y2 = unmap_y(b.y2);
        return BBox(std::min(x1, x2), std::min(y1, y2), std::max(x1, x2), std::max(y1, y2));
    }
    // this, then t
    BoxTransform then(const BoxTransform& t) const {
        BoxTransform c;
        c.ax = t.ax * ax;
        c.bx = t.ax * bx + t.bx;
        c.ay = t.ay * ay;
        c.by = t.ay * by + t.by;
        return c;
    }
    BoxTransform inverse() const {
        BoxTransform c;
        c.ax = 1.0 / ax;
        c.bx = -bx / ax;
        c.ay = 1.0 / ay;
        c.by = -by / ay;
        return c;
    }
    bool is_identity() const { return ax == 1.0 && bx == 0.0 && ay == 1.0 && by == 0.0; }
};

struct Augmented {
    Image image;
    BoxTransform transform; // maps original-frame boxes into the new frame
};

struct StrongAugmentConfig {
    double color_gain_lo = 0.7, color_gain_hi = 1.3;
    double color_bias = 0.15;
    double blur_prob = 0.5;
    double blur_sigma_lo = 0.4, blur_sigma_hi = 0.9;
    double cutout_prob = 0.5;
    int cutout_max_patches = 2;
    int cutout_min_size = 4, cutout_max_size = 10;
};

// Deterministic cores; the sampling wrappers below draw their knobs.
Augmented geometric_augment(const Image& image, bool flip, double scale);

// Horizontal flip (p = 0.5) plus +-10% scale jitter about the center.
Augmented weak_augment(const Image& image, Rng& rng);

// Weak geometry plus color jitter, Gaussian blur and cutout patches. The
// returned transform covers the geometric part only.
Augmented strong_augment(const Image& image, Rng& rng, const StrongAugmentConfig& cfg = {});

} // namespace ovd
