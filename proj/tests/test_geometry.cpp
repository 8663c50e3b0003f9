#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ovd/geometry.hpp"
#include "ovd/rng.hpp"

using namespace ovd;

namespace {

BBox random_box(Rng& rng, double lim = 10.0) {
    double x1 = rng.uniform(0.0, lim);
    double y1 = rng.uniform(0.0, lim);
    double w = rng.uniform(0.5, lim * 0.5);
    double h = rng.uniform(0.5, lim * 0.5);
    return BBox(x1, y1, x1 + w, y1 + h);
}

// Independent greedy suppression: repeatedly take the best remaining box
// and erase everything overlapping it at or above the threshold.
std::vector<ScoredBox> greedy_oracle(std::vector<ScoredBox> dets, double thresh) {
    std::vector<ScoredBox> out;
    while (!dets.empty()) {
        size_t best = 0;
        for (size_t i = 1; i < dets.size(); ++i) {
            if (dets[i].score > dets[best].score ||
                (dets[i].score == dets[best].score && dets[i].box.lex_less(dets[best].box)))
                best = i;
        }
        ScoredBox pick = dets[best];
        out.push_back(pick);
        std::vector<ScoredBox> rest;
        bool removed_pick = false;
        for (const auto& d : dets) {
            if (!removed_pick && d.box == pick.box && d.score == pick.score) {
                removed_pick = true;
                continue;
            }
            if (iou(d.box, pick.box) < thresh) rest.push_back(d);
        }
        dets = std::move(rest);
    }
    return out;
}

} // namespace

TEST_CASE("iou identity and disjoint") {
    BBox b(1, 2, 4, 6);
    CHECK(iou(b, b) == doctest::Approx(1.0));
    CHECK(iou(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)) == 0.0);
}

TEST_CASE("iou overlap arithmetic") {
    // areas 4 and 4, intersection 2, union 6
    CHECK(iou(BBox(0, 0, 2, 2), BBox(1, 0, 3, 2)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("iou symmetry and bounds") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        BBox a = random_box(rng), b = random_box(rng);
        double ab = iou(a, b), ba = iou(b, a);
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("iou is 1 only for equal boxes") {
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        BBox a = random_box(rng);
        BBox b = a;
        b.x2 += 0.01;
        CHECK(iou(a, b) < 1.0);
        CHECK(iou(a, a) == 1.0);
    }
}

TEST_CASE("nms singleton and duplicate") {
    std::vector<ScoredBox> one{{BBox(0, 0, 1, 1), 0.7}};
    auto kept = nms(one, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].box == one[0].box);

    std::vector<ScoredBox> dup{{BBox(0, 0, 1, 1), 0.9}, {BBox(0, 0, 1, 1), 0.8}};
    kept = nms(dup, 0.5);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].score == 0.9);
}

TEST_CASE("nms matches exhaustive greedy oracle") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ScoredBox> dets;
        int n = 5 + static_cast<int>(rng.uniform_int(6));
        for (int i = 0; i < n; ++i) dets.push_back({random_box(rng, 6.0), rng.uniform()});
        double thresh = rng.uniform(0.2, 0.8);
        auto a = nms(dets, thresh);
        auto b = greedy_oracle(dets, thresh);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].box == b[i].box);
            CHECK(a[i].score == b[i].score);
        }
    }
}

TEST_CASE("nms idempotence and separation") {
    Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ScoredBox> dets;
        for (int i = 0; i < 12; ++i) dets.push_back({random_box(rng, 8.0), rng.uniform()});
        double thresh = 0.5;
        auto once = nms(dets, thresh);
        auto twice = nms(once, thresh);
        REQUIRE(once.size() == twice.size());
        for (size_t i = 0; i < once.size(); ++i) CHECK(once[i].box == twice[i].box);
        for (size_t i = 0; i < once.size(); ++i)
            for (size_t j = i + 1; j < once.size(); ++j) CHECK(iou(once[i].box, once[j].box) < thresh);
        for (size_t i = 1; i < once.size(); ++i) CHECK(once[i - 1].score >= once[i].score);
    }
}

TEST_CASE("crop full image identity") {
    Image img(8, 6);
    Rng rng(5);
    for (double& v : img.data) v = rng.uniform();
    Image c = crop(img, BBox(0, 0, 8, 6), 0.0, 8, 6);
    for (size_t i = 0; i < img.data.size(); ++i) CHECK(c.data[i] == doctest::Approx(img.data[i]).epsilon(1e-12));
}

TEST_CASE("crop expansion arithmetic") {
    BBox b(10, 10, 30, 20);
    BBox e = b.expanded(1.1);
    CHECK(e.width() == doctest::Approx(22.0));
    CHECK(e.height() == doctest::Approx(11.0));
    CHECK(e.cx() == doctest::Approx(b.cx()));
    CHECK(e.cy() == doctest::Approx(b.cy()));
}

TEST_CASE("crop partially outside equals direct pixel indexing") {
    Image img(16, 16);
    Rng rng(11);
    for (double& v : img.data) v = rng.uniform();
    // expanded region clips to [12,16) x [0,4); at native size the output is
    // exactly those pixels
    Image c = crop(img, BBox(12, -4, 20, 4), 0.0, 4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int ch = 0; ch < 3; ++ch) CHECK(c.at(x, y, ch) == doctest::Approx(img.at(12 + x, y, ch)).epsilon(1e-12));
}

TEST_CASE("crop rejects disjoint region") {
    Image img(8, 8);
    CHECK_THROWS(crop(img, BBox(20, 20, 30, 30), 0.0, 4, 4));
}
