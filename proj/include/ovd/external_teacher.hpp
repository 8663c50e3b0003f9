#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ovd/geometry.hpp"
#include "ovd/rng.hpp"
#include "ovd/tensor.hpp"
#include "ovd/vocabulary.hpp"

namespace ovd {

// High-confidence pseudo-label emitted by the external teacher.
struct PseudoLabel {
    BBox box;
    int category = -1;
    double prob = 0.0;
};

struct CropEncoderConfig {
    int resolution = 32;
    std::array<int, 3> channels = {16, 32, 32};
    int embed_dim = 64;
};

struct CropEncoderParams {
    CropEncoderConfig cfg;
    nn::Tensor conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b, fc_w, fc_b;

    static CropEncoderParams init(const CropEncoderConfig& cfg, uint64_t seed);
    std::vector<std::pair<std::string, nn::Tensor*>> entries();
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

// Frozen open-vocabulary crop classifier. Scores crop embeddings against
// the shared vocabulary prototypes; parameters are immutable after load.
// Oracle mode swaps the encoder for ground-truth lookup with label-noise
// rate eta, for controlled studies of pseudo-label quality.
struct ExternalTeacher {
    CropEncoderParams encoder;
    std::vector<SemanticEmbedding> embeddings; // shared with the detector head
    double p0 = 0.8;
    double temperature_scale = 5.0;  // fixed 1/tau
    double crop_expand = 0.1;

    bool oracle_mode = false;
    double oracle_noise = 0.0;
    uint64_t oracle_seed = 0;
    // image_id -> full hidden annotations; required in oracle mode
    std::shared_ptr<const std::map<std::string, std::vector<Annotation>>> oracle_gt;

    int resolution() const { return encoder.cfg.resolution; }
};

// Unit-norm embedding per crop through the frozen encoder.
std::vector<std::vector<double>> encode_crops(const CropEncoderParams& enc, const std::vector<Image>& crops);

// Softmax over vocabulary categories of the scaled cosine scores; no
// background column. Throws on an empty crop list.
std::vector<std::vector<double>> classify_crops(const ExternalTeacher& teacher, const std::vector<Image>& crops);

// Crops each candidate (context-expanded), classifies it and keeps
// (box, argmax, max prob) when the max probability clears p0. In oracle
// mode the class comes from hidden ground truth instead of the encoder.
std::vector<PseudoLabel> make_pseudo_labels(const ExternalTeacher& teacher, const ImageRecord& image,
                                            const std::vector<BBox>& candidates);

void save_external_teacher(const std::string& path, const ExternalTeacher& teacher);
ExternalTeacher load_external_teacher(const std::string& path);

struct CropSample {
    Image image;
    int category = -1;
};

struct PretrainConfig {
    int iters = 2000;
    int batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    uint64_t seed = 1;
};

struct PretrainResult {
    double holdout_accuracy = 0.0;
    std::vector<double> loss_curve;
};

// Offline alignment training: pulls crop embeddings toward their category
// prototype via cross-entropy over scaled cosine scores. The teacher is
// frozen afterwards.
PretrainResult pretrain_external(ExternalTeacher& teacher, const std::vector<CropSample>& train,
                                 const std::vector<CropSample>& holdout, const PretrainConfig& cfg);

} // namespace ovd
