#pragma once

#include <functional>
#include <string>

#include "ovd/detector.hpp"
#include "ovd/geometry.hpp"
#include "ovd/rng.hpp"
#include "ovd/vocabulary.hpp"

namespace ovd {

// EMA mirror of the student. The teacher only ever changes through
// ema_update; it never sees gradients.
struct EmaState {
    DetectorParams teacher;
    double momentum = 0.999;
};

EmaState make_ema(const DetectorParams& student, double momentum);

// theta' <- alpha * theta' + (1 - alpha) * theta, elementwise over the flat
// view (temperature included). Throws on shape mismatch.
void ema_update(EmaState& state, const DetectorParams& student);

enum class BoxStrategy { RpnScore, BoxJitter, RegJitter };

std::string box_strategy_name(BoxStrategy s);
BoxStrategy box_strategy_from_name(const std::string& s);

struct BoxSelectionConfig {
    BoxStrategy strategy = BoxStrategy::RpnScore;
    double rpn_thresh = 0.95;
    int jitter_count = 10;      // N_jit >= 2
    double jitter_scale = 0.06; // uniform half-width factor on 0.5*(h+w)
    int reg_iters = 4;          // T_reg >= 2
    double variance_thresh = 0.02;
    int top_k = 5;
    // jitter scoring is restricted to the top proposals by objectness to
    // bound its cost; selection output is unchanged whenever at least top_k
    // pool members pass the variance filter
    int variance_pool = 15;
};

// Batched one-step refinement: feed boxes through the RoI head and decode
// the class-agnostic deltas.
using BatchRefineFn = std::function<std::vector<BBox>(const std::vector<BBox>&)>;

BatchRefineFn make_refine_fn(DetectorForward& fwd);

// Mean per-coordinate standard deviation of refined jitter boxes,
// normalized by half the candidate's perimeter: (1/4) sum_k sigma_k /
// (0.5 (h + w)). Standard deviations are population form.
double box_jitter_variance(const BatchRefineFn& refine, const BBox& box, const BoxSelectionConfig& cfg, Rng& rng);

// Iterated-refinement variance: (1/4) sum_k sigma_k^2 / (h_T^2 + w_T^2)
// over the T_reg successive refinements, denominated by the final box.
double regression_jitter_variance(const BatchRefineFn& refine, const BBox& box, const BoxSelectionConfig& cfg);

// Wrappers that build the forward pass themselves.
double box_jitter_variance(const DetectorParams& teacher, const Image& image, const BBox& box,
                           const BoxSelectionConfig& cfg, Rng& rng);
double regression_jitter_variance(const DetectorParams& teacher, const Image& image, const BBox& box,
                                  const BoxSelectionConfig& cfg);

// Filters proposals per the configured strategy and returns the refined
// class-agnostic boxes, truncated to top_k by objectness.
std::vector<BBox> select_boxes(DetectorForward& fwd, const std::vector<Proposal>& proposals,
                               const BoxSelectionConfig& cfg, Rng& rng);
std::vector<BBox> select_boxes(const DetectorParams& teacher, const Image& image,
                               const std::vector<Proposal>& proposals, const BoxSelectionConfig& cfg, Rng& rng);

// Per-candidate quality scores used for box-selection diagnostics.
struct CandidateScore {
    BBox refined;
    double objectness = 0.0;
    double bjv = 0.0;
    double rjv = 0.0;
};
std::vector<CandidateScore> score_candidates(DetectorForward& fwd, const std::vector<Proposal>& proposals,
                                             const BoxSelectionConfig& cfg, Rng& rng);

struct PseudoLabelConfig {
    double student_target_thresh = 0.7; // teacher prob floor for the consistency flow
    double nms_thresh = 0.5;
    BoxSelectionConfig selection;
};

struct PseudoLabelSets {
    std::vector<Annotation> student_targets;  // teacher-pseudo, weak frame
    std::vector<BBox> external_candidates;    // refined boxes destined for crops
};

// Runs the teacher on a weak view: thresholded detections for the
// consistency flow plus selected boxes for the external teacher. Returns a
// still-live forward pass via `fwd` for follow-up queries.
PseudoLabelSets generate_pseudo_labels(DetectorForward& fwd, const std::vector<SemanticEmbedding>& embeddings,
                                       const PseudoLabelConfig& cfg, Rng& rng);
PseudoLabelSets generate_pseudo_labels(const DetectorParams& teacher, const Image& weak_image,
                                       const std::vector<SemanticEmbedding>& embeddings, const PseudoLabelConfig& cfg,
                                       Rng& rng);

// Teacher class probabilities (categories + background) at the given boxes.
std::vector<std::vector<double>> teacher_probs_at(DetectorForward& fwd, const std::vector<BBox>& boxes,
                                                  const std::vector<SemanticEmbedding>& embeddings);

} // namespace ovd
