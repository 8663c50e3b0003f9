#pragma once

#include <string>
#include <vector>

#include "ovd/dataset_io.hpp"
#include "ovd/external_teacher.hpp"
#include "ovd/geometry.hpp"
#include "ovd/vocabulary.hpp"

namespace ovd {

// circle / square / triangle are base; star / cross are novel.
Vocabulary shape_vocabulary();

struct SceneConfig {
    int image_size = 64;
    int min_objects = 1;
    int max_objects = 4;
    int n_labeled = 250;
    int n_unlabeled = 250;
    int n_test = 100;
    // Per-category sampling weights; the labeled split renormalizes over
    // base categories only (novel objects never appear there).
    std::vector<double> category_freq = {1.0, 1.0, 1.0, 1.0, 1.0};
    int clutter_max = 3;          // distractor blobs per image
    double base_contrast = 1.0;   // color separation from the background
    double novel_contrast = 0.5;  // novel shapes sit closer to the background
    double min_size = 12.0;
    double max_size = 24.0;
    uint64_t master_seed = 7;
};

struct GeneratedDataset {
    std::string labeled_manifest;
    std::string unlabeled_manifest;
    std::string test_manifest;
    std::string hidden_gt_sidecar;
    std::string vocab_file;
};

// Deterministic from the master seed: three manifests plus PNGs and the
// hidden ground-truth sidecar for unlabeled images (analysis only, never
// training input).
GeneratedDataset generate_dataset(const SceneConfig& cfg, const std::string& out_dir);

struct CropCorpusConfig {
    int crops_per_class_train = 240;
    int crops_per_class_eval = 60;
    int resolution = 32;
    double context_expand = 0.1;
    SceneConfig scene; // rendering knobs; seeds drawn from a disjoint stream
};

struct GeneratedCorpus {
    std::string corpus_manifest;
    std::vector<CropSample> train;
    std::vector<CropSample> eval;
};

GeneratedCorpus generate_crop_corpus(const CropCorpusConfig& cfg, const std::string& out_dir);
GeneratedCorpus load_crop_corpus(const std::string& corpus_manifest);

// Test hook: rasterizes one shape and reports its analytic box alongside
// the mask so geometry can be checked pixel-derived vs analytic.
struct ShapeStamp {
    std::vector<uint8_t> mask; // image_size x image_size
    BBox analytic_box;
};
ShapeStamp rasterize_shape(int category, double cx, double cy, double size, int image_size);

} // namespace ovd
