#include "ovd/geometry.hpp"

#include <algorithm>
#include <numeric>

namespace ovd {

std::string provenance_name(Provenance p) {
    switch (p) {
        case Provenance::GroundTruth: return "ground-truth";
        case Provenance::TeacherPseudo: return "teacher-pseudo";
        case Provenance::ExternalPseudo: return "external-pseudo";
    }
    return "ground-truth";
}

Provenance provenance_from_name(const std::string& s) {
    if (s == "ground-truth") return Provenance::GroundTruth;
    if (s == "teacher-pseudo") return Provenance::TeacherPseudo;
    if (s == "external-pseudo") return Provenance::ExternalPseudo;
    throw std::runtime_error("unknown provenance: " + s);
}

std::string split_name(Split s) {
    switch (s) {
        case Split::Labeled: return "labeled";
        case Split::Unlabeled: return "unlabeled";
        case Split::Test: return "test";
    }
    return "labeled";
}

Split split_from_name(const std::string& s) {
    if (s == "labeled") return Split::Labeled;
    if (s == "unlabeled") return Split::Unlabeled;
    if (s == "test") return Split::Test;
    throw std::runtime_error("unknown split: " + s);
}

double iou(const BBox& a, const BBox& b) {
    double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
    double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
    double inter = ix * iy;
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<ScoredBox> nms(const std::vector<ScoredBox>& dets, double iou_thresh) {
    std::vector<size_t> order(dets.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
        return dets[a].box.lex_less(dets[b].box);
    });
    std::vector<ScoredBox> kept;
    std::vector<bool> suppressed(dets.size(), false);
    for (size_t oi = 0; oi < order.size(); ++oi) {
        size_t i = order[oi];
        if (suppressed[i]) continue;
        kept.push_back(dets[i]);
        for (size_t oj = oi + 1; oj < order.size(); ++oj) {
            size_t j = order[oj];
            if (!suppressed[j] && iou(dets[i].box, dets[j].box) >= iou_thresh) suppressed[j] = true;
        }
    }
    return kept;
}

Image crop(const Image& image, const BBox& box, double expand, int out_w, int out_h) {
    BBox region = box.expanded(1.0 + expand);
    BBox bounds(0.0, 0.0, static_cast<double>(image.width), static_cast<double>(image.height));
    auto inter = region.intersect(bounds);
    if (!inter) throw std::runtime_error("crop region does not intersect the image");
    return resample_region(image, inter->x1, inter->y1, inter->x2, inter->y2, out_w, out_h);
}

} // namespace ovd
