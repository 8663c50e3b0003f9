#include "ovd/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ovd {

EmaState make_ema(const DetectorParams& student, double momentum) {
    if (momentum < 0.0 || momentum >= 1.0) throw std::runtime_error("ema momentum must be in [0,1)");
    EmaState s{student, momentum};
    return s;
}

void ema_update(EmaState& state, const DetectorParams& student) {
    auto tflat = state.teacher.flatten();
    auto sflat = student.flatten();
    if (tflat.size() != sflat.size()) throw std::runtime_error("ema_update: shape mismatch");
    double a = state.momentum;
    for (size_t i = 0; i < tflat.size(); ++i) tflat[i] = a * tflat[i] + (1.0 - a) * sflat[i];
    state.teacher.unflatten(tflat);
}

std::string box_strategy_name(BoxStrategy s) {
    switch (s) {
        case BoxStrategy::RpnScore: return "rpn_score";
        case BoxStrategy::BoxJitter: return "box_jitter";
        case BoxStrategy::RegJitter: return "reg_jitter";
    }
    return "rpn_score";
}

BoxStrategy box_strategy_from_name(const std::string& s) {
    if (s == "rpn_score") return BoxStrategy::RpnScore;
    if (s == "box_jitter") return BoxStrategy::BoxJitter;
    if (s == "reg_jitter") return BoxStrategy::RegJitter;
    throw std::runtime_error("unknown box selection strategy: " + s);
}

BatchRefineFn make_refine_fn(DetectorForward& fwd) {
    return [&fwd](const std::vector<BBox>& boxes) {
        auto rv = fwd.roi_pass(boxes, {});
        const auto& deltas = fwd.tape().value(rv.reg_delta);
        std::vector<BBox> out;
        out.reserve(boxes.size());
        for (size_t i = 0; i < boxes.size(); ++i) {
            std::array<double, 4> d{deltas[i * 4], deltas[i * 4 + 1], deltas[i * 4 + 2], deltas[i * 4 + 3]};
            out.push_back(decode_deltas(d, boxes[i]));
        }
        return out;
    };
}

namespace {

BBox sanitize(BBox b) {
    if (b.x1 > b.x2) std::swap(b.x1, b.x2);
    if (b.y1 > b.y2) std::swap(b.y1, b.y2);
    const double min_side = 0.5;
    if (b.width() < min_side) {
        double c = b.cx();
        b.x1 = c - min_side / 2;
        b.x2 = c + min_side / 2;
    }
    if (b.height() < min_side) {
        double c = b.cy();
        b.y1 = c - min_side / 2;
        b.y2 = c + min_side / 2;
    }
    return b;
}

// Population standard deviation per coordinate over a set of boxes.
// Values are shifted by the first element so a constant sequence yields an
// exact zero.
std::array<double, 4> coordinate_stds(const std::vector<BBox>& boxes) {
    auto coord = [](const BBox& b, int k) {
        switch (k) {
            case 0: return b.x1;
            case 1: return b.y1;
            case 2: return b.x2;
            default: return b.y2;
        }
    };
    double n = static_cast<double>(boxes.size());
    std::array<double, 4> out;
    for (int k = 0; k < 4; ++k) {
        double ref = coord(boxes.front(), k);
        double sum = 0.0;
        for (const auto& b : boxes) sum += coord(b, k) - ref;
        double mean = sum / n;
        double var = 0.0;
        for (const auto& b : boxes) {
            double d = (coord(b, k) - ref) - mean;
            var += d * d;
        }
        out[k] = std::sqrt(var / n);
    }
    return out;
}

} // namespace

double box_jitter_variance(const BatchRefineFn& refine, const BBox& box, const BoxSelectionConfig& cfg, Rng& rng) {
    if (cfg.jitter_count < 2) throw std::runtime_error("box_jitter_variance: jitter_count must be >= 2");
    double half_width = cfg.jitter_scale * 0.5 * (box.height() + box.width());
    std::vector<BBox> jitters;
    jitters.reserve(cfg.jitter_count);
    for (int i = 0; i < cfg.jitter_count; ++i) {
        BBox j(box.x1 + rng.uniform(-half_width, half_width), box.y1 + rng.uniform(-half_width, half_width),
               box.x2 + rng.uniform(-half_width, half_width), box.y2 + rng.uniform(-half_width, half_width));
        jitters.push_back(sanitize(j));
    }
    auto refined = refine(jitters);
    auto stds = coordinate_stds(refined);
    double sum = stds[0] + stds[1] + stds[2] + stds[3];
    return 0.25 * sum / (0.5 * (box.height() + box.width()));
}

double regression_jitter_variance(const BatchRefineFn& refine, const BBox& box, const BoxSelectionConfig& cfg) {
    if (cfg.reg_iters < 2) throw std::runtime_error("regression_jitter_variance: reg_iters must be >= 2");
    std::vector<BBox> sequence;
    sequence.reserve(cfg.reg_iters);
    BBox cur = box;
    for (int t = 0; t < cfg.reg_iters; ++t) {
        cur = sanitize(refine({cur})[0]);
        sequence.push_back(cur);
    }
    auto stds = coordinate_stds(sequence);
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) sum += stds[k] * stds[k];
    const BBox& last = sequence.back();
    double denom = last.height() * last.height() + last.width() * last.width();
    return 0.25 * sum / denom;
}

double box_jitter_variance(const DetectorParams& teacher, const Image& image, const BBox& box,
                           const BoxSelectionConfig& cfg, Rng& rng) {
    DetectorForward fwd(teacher, image);
    return box_jitter_variance(make_refine_fn(fwd), box, cfg, rng);
}

double regression_jitter_variance(const DetectorParams& teacher, const Image& image, const BBox& box,
                                  const BoxSelectionConfig& cfg) {
    DetectorForward fwd(teacher, image);
    return regression_jitter_variance(make_refine_fn(fwd), box, cfg);
}

namespace {

// Top proposals by objectness (order preserved from the proposal list,
// which is already objectness-sorted).
std::vector<Proposal> top_pool(const std::vector<Proposal>& proposals, int pool) {
    std::vector<Proposal> out = proposals;
    if (static_cast<int>(out.size()) > pool) out.resize(pool);
    return out;
}

} // namespace

std::vector<BBox> select_boxes(DetectorForward& fwd, const std::vector<Proposal>& proposals,
                               const BoxSelectionConfig& cfg, Rng& rng) {
    if (proposals.empty()) return {};
    auto refine = make_refine_fn(fwd);

    std::vector<std::pair<BBox, double>> passed; // refined box, objectness
    if (cfg.strategy == BoxStrategy::RpnScore) {
        std::vector<BBox> boxes;
        std::vector<double> scores;
        for (const auto& p : proposals) {
            if (p.objectness >= cfg.rpn_thresh) {
                boxes.push_back(p.box);
                scores.push_back(p.objectness);
            }
        }
        if (!boxes.empty()) {
            auto refined = refine(boxes);
            for (size_t i = 0; i < refined.size(); ++i) passed.emplace_back(sanitize(refined[i]), scores[i]);
        }
    } else {
        auto pool = top_pool(proposals, cfg.variance_pool);
        std::vector<BBox> boxes;
        for (const auto& p : pool) boxes.push_back(p.box);
        auto refined = refine(boxes);
        for (size_t i = 0; i < pool.size(); ++i) {
            double score = cfg.strategy == BoxStrategy::BoxJitter
                               ? box_jitter_variance(refine, pool[i].box, cfg, rng)
                               : regression_jitter_variance(refine, pool[i].box, cfg);
            if (score <= cfg.variance_thresh) passed.emplace_back(sanitize(refined[i]), pool[i].objectness);
        }
    }

    std::stable_sort(passed.begin(), passed.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first.lex_less(b.first);
    });
    if (static_cast<int>(passed.size()) > cfg.top_k) passed.resize(cfg.top_k);
    std::vector<BBox> out;
    out.reserve(passed.size());
    for (auto& [b, s] : passed) out.push_back(b);
    return out;
}

std::vector<BBox> select_boxes(const DetectorParams& teacher, const Image& image,
                               const std::vector<Proposal>& proposals, const BoxSelectionConfig& cfg, Rng& rng) {
    DetectorForward fwd(teacher, image);
    return select_boxes(fwd, proposals, cfg, rng);
}

std::vector<CandidateScore> score_candidates(DetectorForward& fwd, const std::vector<Proposal>& proposals,
                                             const BoxSelectionConfig& cfg, Rng& rng) {
    auto pool = top_pool(proposals, cfg.variance_pool);
    if (pool.empty()) return {};
    auto refine = make_refine_fn(fwd);
    std::vector<BBox> boxes;
    for (const auto& p : pool) boxes.push_back(p.box);
    auto refined = refine(boxes);
    std::vector<CandidateScore> out(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) {
        out[i].refined = sanitize(refined[i]);
        out[i].objectness = pool[i].objectness;
        out[i].bjv = box_jitter_variance(refine, pool[i].box, cfg, rng);
        out[i].rjv = regression_jitter_variance(refine, pool[i].box, cfg);
    }
    return out;
}

PseudoLabelSets generate_pseudo_labels(DetectorForward& fwd, const std::vector<SemanticEmbedding>& embeddings,
                                       const PseudoLabelConfig& cfg, Rng& rng) {
    PseudoLabelSets out;
    auto props = fwd.proposals();
    if (props.empty()) return out;

    // detections for the consistency flow: refine + classify + per-class NMS
    std::vector<BBox> boxes;
    boxes.reserve(props.size());
    for (const auto& p : props) boxes.push_back(p.box);
    auto rv = fwd.roi_pass(boxes, embeddings);
    const auto& scores = fwd.tape().value(rv.cls_scores);
    const auto& deltas = fwd.tape().value(rv.reg_delta);
    int C = static_cast<int>(embeddings.size());
    int M = C + 1;
    double W = fwd.params().cfg.image_size, H = fwd.params().cfg.image_size;

    std::vector<BBox> refined(boxes.size());
    std::vector<std::vector<double>> probs(boxes.size());
    for (size_t i = 0; i < boxes.size(); ++i) {
        std::array<double, 4> d{deltas[i * 4], deltas[i * 4 + 1], deltas[i * 4 + 2], deltas[i * 4 + 3]};
        refined[i] = decode_deltas(d, boxes[i]).clipped(W, H);
        std::vector<double> row(scores.begin() + static_cast<long>(i) * M, scores.begin() + static_cast<long>(i + 1) * M);
        probs[i] = predict_probs(row);
    }
    for (int c = 0; c < C; ++c) {
        std::vector<ScoredBox> per_class;
        for (size_t i = 0; i < refined.size(); ++i) {
            if (!refined[i].valid()) continue;
            per_class.push_back({refined[i], probs[i][c]});
        }
        for (const auto& k : nms(per_class, cfg.nms_thresh)) {
            if (k.score < cfg.student_target_thresh) continue;
            Annotation a;
            a.box = k.box;
            a.category = c;
            a.score = k.score;
            a.provenance = Provenance::TeacherPseudo;
            out.student_targets.push_back(a);
        }
    }

    out.external_candidates = select_boxes(fwd, props, cfg.selection, rng);
    return out;
}

PseudoLabelSets generate_pseudo_labels(const DetectorParams& teacher, const Image& weak_image,
                                       const std::vector<SemanticEmbedding>& embeddings, const PseudoLabelConfig& cfg,
                                       Rng& rng) {
    DetectorForward fwd(teacher, weak_image);
    return generate_pseudo_labels(fwd, embeddings, cfg, rng);
}

std::vector<std::vector<double>> teacher_probs_at(DetectorForward& fwd, const std::vector<BBox>& boxes,
                                                  const std::vector<SemanticEmbedding>& embeddings) {
    if (boxes.empty()) return {};
    auto rv = fwd.roi_pass(boxes, embeddings);
    const auto& scores = fwd.tape().value(rv.cls_scores);
    int M = static_cast<int>(embeddings.size()) + 1;
    std::vector<std::vector<double>> out(boxes.size());
    for (size_t i = 0; i < boxes.size(); ++i) {
        std::vector<double> row(scores.begin() + static_cast<long>(i) * M, scores.begin() + static_cast<long>(i + 1) * M);
        out[i] = predict_probs(row);
    }
    return out;
}

} // namespace ovd
