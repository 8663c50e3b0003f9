#pragma once

#include <array>
#include <string>
#include <vector>

#include "ovd/geometry.hpp"
#include "ovd/tensor.hpp"
#include "ovd/vocabulary.hpp"

namespace ovd {

struct DetectorConfig {
    int image_size = 64;
    std::array<int, 4> channels = {16, 32, 48, 32}; // stride-2,2,2,1 backbone
    int rpn_channels = 32;
    std::vector<double> anchor_sizes = {12.0, 20.0, 32.0};
    int stride = 8;
    int roi_out = 7;
    int roi_hidden = 96;
    int embed_dim = 64;
    int num_proposals = 100;  // post-NMS cap
    int pre_nms_top = 240;
    double rpn_nms_thresh = 0.7;
    double init_inv_tau = 14.0;

    int anchors_per_cell() const { return static_cast<int>(anchor_sizes.size()); }
    int feat_size() const { return image_size / stride; }
};

// All trainable state. The entry list fixes a stable flat ordering used by
// the EMA update, checkpoints and the optimizer.
struct DetectorParams {
    DetectorConfig cfg;

    nn::Tensor conv1_w, conv1_b;
    nn::Tensor conv2_w, conv2_b;
    nn::Tensor conv3_w, conv3_b;
    nn::Tensor conv4_w, conv4_b;
    nn::Tensor rpn_conv_w, rpn_conv_b;
    nn::Tensor rpn_obj_w, rpn_obj_b;
    nn::Tensor rpn_delta_w, rpn_delta_b;
    nn::Tensor fc1_w, fc1_b;
    nn::Tensor fc2_w, fc2_b;
    nn::Tensor reg_w, reg_b;
    nn::Tensor bg_embed;     // learnable background prototype, normalized at use
    nn::Tensor log_inv_tau;  // temperature as log(1/tau)

    static DetectorParams init(const DetectorConfig& cfg, uint64_t seed);

    std::vector<std::pair<std::string, const nn::Tensor*>> entries() const;
    std::vector<std::pair<std::string, nn::Tensor*>> entries();

    size_t flat_size() const;
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);

    void save(const std::string& path) const;
    static DetectorParams load(const std::string& path);
};

struct Proposal {
    BBox box;
    double objectness = 0.0;
};

struct RoIFeature {
    std::vector<double> vector;
};

struct Detection {
    BBox box;
    std::vector<double> class_scores; // categories then background
    std::vector<double> prob;         // softmax of class_scores
};

// Center/size box delta parameterization shared by the RPN and the RoI
// regression head.
std::array<double, 4> encode_deltas(const BBox& target, const BBox& anchor);
BBox decode_deltas(const std::array<double, 4>& deltas, const BBox& anchor);

// One image forward pass. Builds the backbone and RPN graph on an owned
// tape; RoI passes append to the same tape so training can backprop through
// everything in one sweep.
class DetectorForward {
public:
    DetectorForward(const DetectorParams& params, const Image& image);

    const std::vector<BBox>& anchors() const { return anchors_; }
    std::vector<double> anchor_objectness() const; // sigmoid per anchor
    std::vector<Proposal> proposals(int max_out = -1) const;

    struct RoiVars {
        nn::Var features;   // [N, d]
        nn::Var reg_delta;  // [N, 4]
        nn::Var cls_scores; // [N, C+1], categories then background
    };
    // `embeddings` may be empty when only features/regression are needed
    // (cls_scores is left invalid in that case).
    RoiVars roi_pass(const std::vector<BBox>& boxes, const std::vector<SemanticEmbedding>& embeddings);

    nn::Tape& tape() { return tape_; }
    nn::Var feat() const { return feat_; }
    nn::Var rpn_obj() const { return rpn_obj_; }
    nn::Var rpn_delta() const { return rpn_delta_; }
    // Aligned with DetectorParams::entries() order.
    const std::vector<nn::Var>& param_vars() const { return param_vars_; }

    // Flat index helpers into the RPN output maps.
    size_t obj_index(int anchor) const;
    std::array<size_t, 4> delta_indices(int anchor) const;

    const DetectorParams& params() const { return params_; }

private:
    const DetectorParams& params_;
    nn::Tape tape_;
    std::vector<nn::Var> param_vars_;
    nn::Var feat_, rpn_obj_, rpn_delta_;
    std::vector<BBox> anchors_;
    int fh_ = 0, fw_ = 0;
};

// Spec-level operations.
std::vector<Proposal> forward_rpn(const DetectorParams& params, const Image& image);
std::vector<RoIFeature> roi_features(const DetectorParams& params, const Image& image, const std::vector<BBox>& boxes);
std::vector<BBox> regress_boxes(const DetectorParams& params, const std::vector<RoIFeature>& features,
                                const std::vector<BBox>& anchors);
// Score matrix rows: one row per feature, categories then one background
// column, all divided by tau. Throws on zero-norm features.
std::vector<std::vector<double>> classify_semantic(const DetectorParams& params, const std::vector<RoIFeature>& features,
                                                   const std::vector<SemanticEmbedding>& embeddings);
std::vector<double> predict_probs(const std::vector<double>& score_row);

std::vector<std::pair<Detection, int>> detect(const DetectorParams& params, const Image& image,
                                              const std::vector<SemanticEmbedding>& embeddings, double score_thresh,
                                              double nms_thresh, int max_dets = 100);

} // namespace ovd
