#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ovd/image.hpp"

namespace ovd {

// Axis-aligned box in continuous corner form. Valid boxes have x1 < x2,
// y1 < y2 and finite coordinates.
struct BBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    BBox() = default;
    BBox(double x1_, double y1_, double x2_, double y2_) : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {}

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }

    bool valid() const {
        return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && x1 < x2 && y1 < y2;
    }

    bool operator==(const BBox& o) const { return x1 == o.x1 && y1 == o.y1 && x2 == o.x2 && y2 == o.y2; }

    // Lexicographic (x1, y1, x2, y2) order; the NMS tie-break.
    bool lex_less(const BBox& o) const {
        if (x1 != o.x1) return x1 < o.x1;
        if (y1 != o.y1) return y1 < o.y1;
        if (x2 != o.x2) return x2 < o.x2;
        return y2 < o.y2;
    }

    // Intersection with another box, empty if they do not overlap.
    std::optional<BBox> intersect(const BBox& o) const {
        double ix1 = std::max(x1, o.x1), iy1 = std::max(y1, o.y1);
        double ix2 = std::min(x2, o.x2), iy2 = std::min(y2, o.y2);
        if (ix1 >= ix2 || iy1 >= iy2) return std::nullopt;
        return BBox(ix1, iy1, ix2, iy2);
    }

    BBox clipped(double w, double h) const {
        return BBox(std::clamp(x1, 0.0, w), std::clamp(y1, 0.0, h), std::clamp(x2, 0.0, w), std::clamp(y2, 0.0, h));
    }

    // Scales width and height about the center by `factor`.
    BBox expanded(double factor) const {
        double hw = 0.5 * width() * factor, hh = 0.5 * height() * factor;
        return BBox(cx() - hw, cy() - hh, cx() + hw, cy() + hh);
    }
};

enum class Provenance { GroundTruth, TeacherPseudo, ExternalPseudo };

std::string provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& s);

struct Annotation {
    BBox box;
    int category = -1;
    // Present iff provenance != GroundTruth.
    std::optional<double> score;
    Provenance provenance = Provenance::GroundTruth;
};

enum class Split { Labeled, Unlabeled, Test };

std::string split_name(Split s);
Split split_from_name(const std::string& s);

struct ImageRecord {
    std::string image_id;
    std::string file; // path of the PNG, relative to the manifest directory
    int width = 0;
    int height = 0;
    Image pixels; // may be empty when only metadata was loaded
    std::vector<Annotation> annotations;
    Split split = Split::Labeled;
};

// Intersection over union of two valid boxes.
double iou(const BBox& a, const BBox& b);

struct ScoredBox {
    BBox box;
    double score = 0.0;
};

// Greedy non-maximum suppression. Output is sorted by descending score
// (ties broken by lexicographic box order) and every surviving pair has
// IoU strictly below `iou_thresh`.
std::vector<ScoredBox> nms(const std::vector<ScoredBox>& dets, double iou_thresh);

// Crops `box` from the image, scaled about its center by (1 + expand),
// clipped to the image bounds and resampled to out_w x out_h. Throws if the
// expanded box does not intersect the image.
Image crop(const Image& image, const BBox& box, double expand, int out_w, int out_h);

} // namespace ovd
