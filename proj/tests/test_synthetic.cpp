#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "ovd/synthetic.hpp"

using namespace ovd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

SceneConfig small_config() {
    SceneConfig cfg;
    cfg.n_labeled = 6;
    cfg.n_unlabeled = 6;
    cfg.n_test = 4;
    cfg.master_seed = 99;
    return cfg;
}

} // namespace

TEST_CASE("shape masks match analytic boxes within one pixel") {
    for (int category = 0; category < 5; ++category) {
        for (double size : {12.0, 18.0, 24.0}) {
            auto stamp = rasterize_shape(category, 32.0, 30.0, size, 64);
            int x1 = 64, x2 = -1, y1 = 64, y2 = -1;
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x)
                    if (stamp.mask[static_cast<size_t>(y) * 64 + x]) {
                        x1 = std::min(x1, x);
                        x2 = std::max(x2, x);
                        y1 = std::min(y1, y);
                        y2 = std::max(y2, y);
                    }
            REQUIRE(x2 >= 0);
            // rendered extent (pixel coverage) vs analytic box, within 1 px
            CHECK(std::abs(x1 - stamp.analytic_box.x1) <= 1.0);
            CHECK(std::abs((x2 + 1) - stamp.analytic_box.x2) <= 1.0);
            CHECK(std::abs(y1 - stamp.analytic_box.y1) <= 1.0);
            CHECK(std::abs((y2 + 1) - stamp.analytic_box.y2) <= 1.0);
        }
    }
}

TEST_CASE("generation is deterministic under a fixed seed") {
    fs::path dir1 = fs::temp_directory_path() / "ovd_synth_a";
    fs::path dir2 = fs::temp_directory_path() / "ovd_synth_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    auto cfg = small_config();
    auto g1 = generate_dataset(cfg, dir1.string());
    auto g2 = generate_dataset(cfg, dir2.string());
    CHECK(slurp(g1.labeled_manifest) == slurp(g2.labeled_manifest));
    CHECK(slurp(g1.unlabeled_manifest) == slurp(g2.unlabeled_manifest));
    CHECK(slurp(g1.test_manifest) == slurp(g2.test_manifest));
    CHECK(slurp(g1.hidden_gt_sidecar) == slurp(g2.hidden_gt_sidecar));
    // byte-identical images as well
    CHECK(slurp(dir1 / "images" / "lab_0.png") == slurp(dir2 / "images" / "lab_0.png"));
    CHECK(slurp(dir1 / "images" / "unl_3.png") == slurp(dir2 / "images" / "unl_3.png"));
}

TEST_CASE("split discipline: no novel leak into training-visible manifests") {
    fs::path dir = fs::temp_directory_path() / "ovd_synth_c";
    fs::remove_all(dir);
    auto cfg = small_config();
    cfg.n_labeled = 20;
    cfg.n_unlabeled = 20;
    auto gen = generate_dataset(cfg, dir.string());
    Vocabulary vocab = shape_vocabulary();

    Dataset labeled = read_manifest(gen.labeled_manifest, false);
    for (const auto& r : labeled.records)
        for (const auto& a : r.annotations) {
            CHECK(!vocab.is_novel(a.category));
            CHECK(a.provenance == Provenance::GroundTruth);
        }

    Dataset unlabeled = read_manifest(gen.unlabeled_manifest, false);
    for (const auto& r : unlabeled.records) CHECK(r.annotations.empty());

    // hidden sidecar must contain novel objects somewhere
    auto hidden = read_annotation_sidecar(gen.hidden_gt_sidecar);
    bool has_novel = false;
    for (const auto& [id, anns] : hidden)
        for (const auto& a : anns)
            if (vocab.is_novel(a.category)) has_novel = true;
    CHECK(has_novel);

    // test split exposes all ground truth
    Dataset test = read_manifest(gen.test_manifest, false);
    bool test_has_novel = false;
    for (const auto& r : test.records)
        for (const auto& a : r.annotations)
            if (vocab.is_novel(a.category)) test_has_novel = true;
    CHECK(test_has_novel);
}

TEST_CASE("crop corpus is balanced and id-disjoint from detection splits") {
    fs::path dir = fs::temp_directory_path() / "ovd_synth_d";
    fs::remove_all(dir);
    CropCorpusConfig cfg;
    cfg.crops_per_class_train = 8;
    cfg.crops_per_class_eval = 3;
    cfg.scene.master_seed = 99;
    auto corpus = generate_crop_corpus(cfg, dir.string());
    std::map<int, int> train_counts, eval_counts;
    for (const auto& s : corpus.train) train_counts[s.category] += 1;
    for (const auto& s : corpus.eval) eval_counts[s.category] += 1;
    for (int c = 0; c < 5; ++c) {
        CHECK(train_counts[c] == 8);
        CHECK(eval_counts[c] == 3);
    }
    for (const auto& s : corpus.train) {
        CHECK(s.image.width == cfg.resolution);
        CHECK(s.image.height == cfg.resolution);
    }
    // file namespace disjoint from detection split ids (lab_/unl_/tst_)
    std::ifstream in(corpus.corpus_manifest);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("crop_tr_") != std::string::npos);
    CHECK(text.find("lab_") == std::string::npos);
    CHECK(text.find("unl_") == std::string::npos);

    auto reloaded = load_crop_corpus(corpus.corpus_manifest);
    CHECK(reloaded.train.size() == corpus.train.size());
    CHECK(reloaded.eval.size() == corpus.eval.size());
    CHECK(reloaded.train[0].image.data == corpus.train[0].image.data);
}
