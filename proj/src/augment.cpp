#include "ovd/augment.hpp"

#include <algorithm>
#include <cmath>

namespace ovd {

Augmented geometric_augment(const Image& image, bool flip, double scale) {
    BoxTransform t;
    double W = image.width, H = image.height;
    if (flip) {
        t.ax = -1.0;
        t.bx = W;
    }
    if (scale != 1.0) {
        BoxTransform s;
        s.ax = scale;
        s.bx = 0.5 * W * (1.0 - scale);
        s.ay = scale;
        s.by = 0.5 * H * (1.0 - scale);
        t = t.then(s);
    }

    Augmented out;
    out.transform = t;
    if (t.is_identity()) {
        out.image = image;
        return out;
    }
    out.image = Image(image.width, image.height);
    BoxTransform inv = t.inverse();
    for (int y = 0; y < image.height; ++y) {
        double sy = inv.map_y(y + 0.5);
        for (int x = 0; x < image.width; ++x) {
            double sx = inv.map_x(x + 0.5);
            for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = bilinear_sample(image, sx, sy, c);
        }
    }
    return out;
}

Augmented weak_augment(const Image& image, Rng& rng) {
    bool flip = rng.bernoulli(0.5);
    double scale = rng.uniform(0.9, 1.1);
    return geometric_augment(image, flip, scale);
}

Augmented strong_augment(const Image& image, Rng& rng, const StrongAugmentConfig& cfg) {
    Augmented out = weak_augment(image, rng);

    for (int c = 0; c < 3; ++c) {
        double gain = rng.uniform(cfg.color_gain_lo, cfg.color_gain_hi);
        double bias = rng.uniform(-cfg.color_bias, cfg.color_bias);
        for (int y = 0; y < out.image.height; ++y)
            for (int x = 0; x < out.image.width; ++x)
                out.image.at(x, y, c) = std::clamp(out.image.at(x, y, c) * gain + bias, 0.0, 1.0);
    }

    if (rng.bernoulli(cfg.blur_prob)) {
        double sigma = rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi);
        out.image = gaussian_blur(out.image, sigma);
    }

    if (rng.bernoulli(cfg.cutout_prob)) {
        int patches = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(cfg.cutout_max_patches)));
        for (int p = 0; p < patches; ++p) {
            int size = cfg.cutout_min_size +
                       static_cast<int>(rng.uniform_int(static_cast<uint64_t>(cfg.cutout_max_size - cfg.cutout_min_size + 1)));
            int x0 = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(std::max(1, out.image.width - size))));
            int y0 = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(std::max(1, out.image.height - size))));
            for (int y = y0; y < std::min(out.image.height, y0 + size); ++y)
                for (int x = x0; x < std::min(out.image.width, x0 + size); ++x)
                    for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = 0.5;
        }
    }
    return out;
}

} // namespace ovd
