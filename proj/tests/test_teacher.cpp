#include <doctest.h>

#include <cmath>

#include "ovd/teacher.hpp"

using namespace ovd;

namespace {

DetectorConfig tiny_config() {
    DetectorConfig c;
    c.image_size = 32;
    c.channels = {4, 6, 8, 8};
    c.rpn_channels = 8;
    c.anchor_sizes = {8.0, 16.0};
    c.roi_hidden = 16;
    c.embed_dim = 16;
    c.pre_nms_top = 64;
    c.num_proposals = 20;
    return c;
}

} // namespace

TEST_CASE("ema at zero momentum copies the student") {
    auto student = DetectorParams::init(tiny_config(), 1);
    auto other = DetectorParams::init(tiny_config(), 2);
    EmaState ema = make_ema(other, 0.0);
    ema_update(ema, student);
    CHECK(ema.teacher.flatten() == student.flatten());
}

TEST_CASE("ema scalar arithmetic") {
    auto student = DetectorParams::init(tiny_config(), 1);
    auto teacher0 = student;
    // view a single coordinate: theta' = 1.0, theta = 0.0, alpha = 0.5 -> 0.5
    auto tf = teacher0.flatten();
    auto sf = student.flatten();
    tf[0] = 1.0;
    sf[0] = 0.0;
    teacher0.unflatten(tf);
    student.unflatten(sf);
    EmaState ema = make_ema(teacher0, 0.5);
    ema_update(ema, student);
    CHECK(ema.teacher.flatten()[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("ema geometric decay toward a constant student") {
    auto student = DetectorParams::init(tiny_config(), 3);
    auto teacher0 = DetectorParams::init(tiny_config(), 4);
    double alpha = 0.9;
    EmaState ema = make_ema(teacher0, alpha);
    auto sflat = student.flatten();
    auto t0 = teacher0.flatten();
    int n = 7;
    for (int i = 0; i < n; ++i) ema_update(ema, student);
    auto tn = ema.teacher.flatten();
    double decay = std::pow(alpha, n);
    for (size_t i = 0; i < sflat.size(); i += 997) {
        double expect = sflat[i] + decay * (t0[i] - sflat[i]);
        CHECK(std::abs(tn[i] - expect) <= 1e-9);
    }
}

TEST_CASE("ema rejects shape mismatch") {
    auto student = DetectorParams::init(tiny_config(), 1);
    DetectorConfig other = tiny_config();
    other.embed_dim = 8;
    auto small = DetectorParams::init(other, 1);
    EmaState ema = make_ema(small, 0.9);
    CHECK_THROWS(ema_update(ema, student));
}

TEST_CASE("box jitter variance: constant refinement gives zero") {
    BoxSelectionConfig cfg;
    cfg.jitter_count = 10;
    Rng rng(5);
    BatchRefineFn fixed = [](const std::vector<BBox>& in) {
        return std::vector<BBox>(in.size(), BBox(4, 4, 10, 10));
    };
    CHECK(box_jitter_variance(fixed, BBox(2, 2, 12, 12), cfg, rng) == 0.0);
}

TEST_CASE("box jitter variance: direct formula arithmetic") {
    // refined coordinates alternate c +- 2 per coordinate: population std 2
    // for each; with h = w = 20, score = (1/4) * (4 * 2) / (0.5 * 40) = 0.1
    BoxSelectionConfig cfg;
    cfg.jitter_count = 10;
    Rng rng(6);
    int call = 0;
    BatchRefineFn stub = [&call](const std::vector<BBox>& in) {
        std::vector<BBox> out;
        for (size_t i = 0; i < in.size(); ++i) {
            double off = (i % 2 == 0) ? 2.0 : -2.0;
            out.push_back(BBox(10 + off, 10 + off, 40 + off, 40 + off));
        }
        ++call;
        return out;
    };
    BBox candidate(10, 10, 30, 30); // h = w = 20
    CHECK(box_jitter_variance(stub, candidate, cfg, rng) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(call == 1); // jitters refined in one batch, each exactly once
}

TEST_CASE("box jitter variance is scale invariant with an equivariant stub") {
    BoxSelectionConfig cfg;
    cfg.jitter_count = 8;
    // refinement that simply shrinks boxes toward their center by 10%:
    // scale-equivariant, so doubling everything leaves the score unchanged
    BatchRefineFn equivariant = [](const std::vector<BBox>& in) {
        std::vector<BBox> out;
        for (const auto& b : in) out.push_back(b.expanded(0.9));
        return out;
    };
    BBox small(10, 10, 26, 22);
    BBox big(20, 20, 52, 44);
    Rng r1(77), r2(77); // identical jitter streams up to scale
    double a = box_jitter_variance(equivariant, small, cfg, r1);
    double b = box_jitter_variance(equivariant, big, cfg, r2);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("regression jitter variance: fixed point gives zero") {
    BoxSelectionConfig cfg;
    cfg.reg_iters = 4;
    BatchRefineFn idem = [](const std::vector<BBox>& in) {
        return std::vector<BBox>(in.size(), BBox(5, 5, 15, 15));
    };
    CHECK(regression_jitter_variance(idem, BBox(3, 3, 13, 13), cfg) == 0.0);
}

TEST_CASE("regression jitter variance: direct formula arithmetic") {
    // per-coordinate population std 1 over the sequence, final box h = w = 10
    // -> (1/4) * 4 / (100 + 100) = 0.005
    BoxSelectionConfig cfg;
    cfg.reg_iters = 2;
    int step = 0;
    BatchRefineFn stub = [&step](const std::vector<BBox>& in) {
        // two successive outputs offset by +-1 around (10,10,20,20):
        // values 9 and 11 have mean 10 and population std 1
        double off = (step++ % 2 == 0) ? -1.0 : 1.0;
        return std::vector<BBox>{BBox(10 + off, 10 + off, 20 + off, 20 + off)};
    };
    CHECK(regression_jitter_variance(stub, BBox(0, 0, 10, 10), cfg) == doctest::Approx(0.005).epsilon(1e-12));
}

TEST_CASE("select_boxes: rpn threshold keeps only confident proposals") {
    auto params = DetectorParams::init(tiny_config(), 9);
    Image img(32, 32, 0.4);
    DetectorForward fwd(params, img);
    std::vector<Proposal> props{{BBox(4, 4, 14, 14), 0.99}, {BBox(16, 16, 28, 28), 0.4}};
    BoxSelectionConfig cfg;
    cfg.strategy = BoxStrategy::RpnScore;
    cfg.rpn_thresh = 0.95;
    Rng rng(1);
    auto picked = select_boxes(fwd, props, cfg, rng);
    REQUIRE(picked.size() == 1);
    // zero-initialized regression head: refined box equals the proposal
    CHECK(picked[0].x1 == doctest::Approx(4.0));
    CHECK(picked[0].x2 == doctest::Approx(14.0));
}

TEST_CASE("select_boxes: variance filter extremes") {
    auto params = DetectorParams::init(tiny_config(), 10);
    Image img(32, 32, 0.5);
    DetectorForward fwd(params, img);
    std::vector<Proposal> props{{BBox(2, 2, 12, 12), 0.9}, {BBox(14, 6, 26, 20), 0.8}, {BBox(6, 16, 20, 30), 0.7}};
    BoxSelectionConfig cfg;
    cfg.strategy = BoxStrategy::RegJitter;
    cfg.top_k = 5;

    cfg.variance_thresh = std::numeric_limits<double>::infinity();
    Rng rng(2);
    auto all = select_boxes(fwd, props, cfg, rng);
    CHECK(all.size() == props.size());

    cfg.variance_thresh = -1.0; // nothing can pass a negative threshold
    auto none = select_boxes(fwd, props, cfg, rng);
    CHECK(none.empty());

    cfg.variance_thresh = std::numeric_limits<double>::infinity();
    cfg.top_k = 2;
    auto capped = select_boxes(fwd, props, cfg, rng);
    CHECK(capped.size() == 2);
}

TEST_CASE("generate_pseudo_labels contracts on a blank image") {
    auto params = DetectorParams::init(tiny_config(), 12);
    Image blank(32, 32, 0.0);
    std::vector<SemanticEmbedding> table(3);
    Rng erg(3);
    for (auto& e : table) {
        e.vector.assign(16, 0.0);
        for (double& v : e.vector) v = erg.gaussian();
        double n = e.norm();
        for (double& v : e.vector) v /= n;
    }
    PseudoLabelConfig cfg;
    Rng rng(4);
    auto sets = generate_pseudo_labels(params, blank, table, cfg, rng);
    CHECK(static_cast<int>(sets.external_candidates.size()) <= cfg.selection.top_k);
    for (const auto& a : sets.student_targets) {
        CHECK(a.provenance == Provenance::TeacherPseudo);
        REQUIRE(a.score.has_value());
        CHECK(*a.score >= cfg.student_target_thresh);
        CHECK(a.category >= 0);
        CHECK(a.category < 3);
    }
}

TEST_CASE("select_boxes output is a subset of refined proposals") {
    auto params = DetectorParams::init(tiny_config(), 15);
    Image img(32, 32, 0.6);
    DetectorForward fwd(params, img);
    auto props = fwd.proposals();
    REQUIRE(!props.empty());
    BoxSelectionConfig cfg;
    cfg.strategy = BoxStrategy::RpnScore;
    cfg.rpn_thresh = 0.0;
    cfg.top_k = 100;
    Rng rng(5);
    auto picked = select_boxes(fwd, props, cfg, rng);
    CHECK(picked.size() == props.size());
    // zero-init regression head: refined == proposal boxes; check subset
    for (const auto& b : picked) {
        bool found = false;
        for (const auto& p : props)
            if (std::abs(p.box.x1 - b.x1) < 1e-9 && std::abs(p.box.y2 - b.y2) < 1e-9) found = true;
        CHECK(found);
    }
}
