#include "ovd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ovd/rng.hpp"

namespace ovd {

namespace fs = std::filesystem;
using nlohmann::json;

Vocabulary shape_vocabulary() {
    Vocabulary v;
    v.names = {"circle", "square", "triangle", "star", "cross"};
    v.base_ids = {0, 1, 2};
    v.novel_ids = {3, 4};
    return v;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Poly {
    std::vector<double> xs, ys;
    bool contains(double x, double y) const {
        bool in = false;
        size_t n = xs.size();
        for (size_t i = 0, j = n - 1; i < n; j = i++) {
            if ((ys[i] > y) != (ys[j] > y)) {
                double t = (y - ys[i]) / (ys[j] - ys[i]);
                if (x < xs[i] + t * (xs[j] - xs[i])) in = !in;
            }
        }
        return in;
    }
    BBox bbox() const {
        double x1 = xs[0], x2 = xs[0], y1 = ys[0], y2 = ys[0];
        for (size_t i = 1; i < xs.size(); ++i) {
            x1 = std::min(x1, xs[i]);
            x2 = std::max(x2, xs[i]);
            y1 = std::min(y1, ys[i]);
            y2 = std::max(y2, ys[i]);
        }
        return BBox(x1, y1, x2, y2);
    }
};

Poly star_polygon(double cx, double cy, double R) {
    Poly p;
    double r = 0.45 * R;
    for (int k = 0; k < 10; ++k) {
        double rad = (k % 2 == 0) ? R : r;
        double ang = -kPi / 2 + k * kPi / 5;
        p.xs.push_back(cx + rad * std::cos(ang));
        p.ys.push_back(cy + rad * std::sin(ang));
    }
    return p;
}

struct ShapeTest {
    int category;
    double cx, cy, size; // size = full extent (diameter / side)
    Poly poly;           // star only

    static ShapeTest make(int category, double cx, double cy, double size) {
        ShapeTest s{category, cx, cy, size, {}};
        if (category == 3) s.poly = star_polygon(cx, cy, size / 2);
        return s;
    }

    bool contains(double x, double y) const {
        double dx = x - cx, dy = y - cy;
        double h = size / 2;
        switch (category) {
            case 0: return dx * dx + dy * dy <= h * h;
            case 1: return std::abs(dx) <= h && std::abs(dy) <= h;
            case 2: { // upward triangle: apex on top, base at the bottom
                if (dy < -h || dy > h) return false;
                double frac = (dy + h) / (2 * h); // 0 at apex, 1 at base
                return std::abs(dx) <= h * frac;
            }
            case 3: return poly.contains(x, y);
            case 4: { // plus sign with arms 36% of the extent wide
                double arm = 0.18 * size;
                return (std::abs(dx) <= arm && std::abs(dy) <= h) || (std::abs(dy) <= arm && std::abs(dx) <= h);
            }
            default: return false;
        }
    }

    BBox analytic_box() const {
        double h = size / 2;
        if (category == 3) return poly.bbox();
        return BBox(cx - h, cy - h, cx + h, cy + h);
    }
};

Image render_background(int size, Rng& rng) {
    Image img(size, size);
    std::array<double, 3> base;
    for (double& b : base) b = rng.uniform(0.30, 0.55);
    // a few smooth sinusoidal fields plus fine per-pixel noise
    struct Wave {
        double fx, fy, phase, amp;
        int channel;
    };
    std::vector<Wave> waves;
    int n_waves = 3 + static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < n_waves; ++i)
        waves.push_back({rng.uniform(0.02, 0.12), rng.uniform(0.02, 0.12), rng.uniform(0, 2 * kPi),
                         rng.uniform(0.02, 0.06), static_cast<int>(rng.uniform_int(3))});
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            std::array<double, 3> v = base;
            for (const auto& w : waves) v[w.channel] += w.amp * std::sin(2 * kPi * (w.fx * x + w.fy * y) + w.phase);
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(v[c] + rng.uniform(-0.02, 0.02), 0.0, 1.0);
        }
    return img;
}

std::array<double, 3> region_mean(const Image& img, const BBox& box) {
    int x1 = std::clamp(static_cast<int>(box.x1), 0, img.width - 1);
    int x2 = std::clamp(static_cast<int>(box.x2), x1 + 1, img.width);
    int y1 = std::clamp(static_cast<int>(box.y1), 0, img.height - 1);
    int y2 = std::clamp(static_cast<int>(box.y2), y1 + 1, img.height);
    std::array<double, 3> m{0, 0, 0};
    int n = 0;
    for (int y = y1; y < y2; ++y)
        for (int x = x1; x < x2; ++x) {
            for (int c = 0; c < 3; ++c) m[c] += img.at(x, y, c);
            ++n;
        }
    for (double& v : m) v /= std::max(1, n);
    return m;
}

// Shape color: push away from the local background mean by `contrast`.
// Low contrast camouflages the shape against its surroundings.
std::array<double, 3> pick_color(const std::array<double, 3>& bg_mean, double contrast, Rng& rng) {
    std::array<double, 3> dir;
    double n = 0.0;
    for (double& d : dir) {
        d = rng.gaussian();
        n += d * d;
    }
    n = std::sqrt(std::max(n, 1e-12));
    std::array<double, 3> out;
    double mag = 0.38 * contrast + 0.10 * contrast * rng.uniform();
    for (int c = 0; c < 3; ++c) out[c] = std::clamp(bg_mean[c] + mag * dir[c] / n, 0.02, 0.98);
    return out;
}

void stamp_shape(Image& img, const ShapeTest& shape, const std::array<double, 3>& color, Rng& rng) {
    BBox b = shape.analytic_box();
    int x1 = std::max(0, static_cast<int>(std::floor(b.x1)));
    int y1 = std::max(0, static_cast<int>(std::floor(b.y1)));
    int x2 = std::min(img.width, static_cast<int>(std::ceil(b.x2)));
    int y2 = std::min(img.height, static_cast<int>(std::ceil(b.y2)));
    for (int y = y1; y < y2; ++y)
        for (int x = x1; x < x2; ++x)
            if (shape.contains(x + 0.5, y + 0.5)) {
                double jitter = rng.uniform(-0.03, 0.03);
                for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(color[c] + jitter, 0.0, 1.0);
            }
}

// Distractor clutter: elongated bars and rings with object-like contrast.
void stamp_clutter(Image& img, Rng& rng) {
    auto bgm = region_mean(img, BBox(0, 0, img.width, img.height));
    auto color = pick_color(bgm, 1.0, rng);
    int kind = static_cast<int>(rng.uniform_int(2));
    double cx = rng.uniform(6, img.width - 6.0);
    double cy = rng.uniform(6, img.height - 6.0);
    if (kind == 0) { // thin bar
        double len = rng.uniform(10, 26);
        double thick = rng.uniform(1.0, 2.5);
        double ang = rng.uniform(0, kPi);
        double ca = std::cos(ang), sa = std::sin(ang);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                double u = dx * ca + dy * sa, v = -dx * sa + dy * ca;
                if (std::abs(u) <= len / 2 && std::abs(v) <= thick / 2)
                    for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(color[c], 0.0, 1.0);
            }
    } else { // ring
        double r = rng.uniform(4, 9);
        double thick = rng.uniform(1.0, 2.0);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                if (std::abs(d - r) <= thick / 2)
                    for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(color[c], 0.0, 1.0);
            }
    }
}

int sample_category(const std::vector<double>& freq, const std::vector<int>& allowed, Rng& rng) {
    double total = 0.0;
    for (int id : allowed) total += freq.at(id);
    double draw = rng.uniform() * total;
    for (int id : allowed) {
        draw -= freq.at(id);
        if (draw <= 0.0) return id;
    }
    return allowed.back();
}

struct SceneResult {
    Image image;
    std::vector<Annotation> annotations;
};

SceneResult render_scene(const SceneConfig& cfg, const std::vector<int>& allowed_categories, Rng& rng) {
    SceneResult out;
    out.image = render_background(cfg.image_size, rng);

    int n_clutter = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(cfg.clutter_max + 1)));
    for (int i = 0; i < n_clutter; ++i) stamp_clutter(out.image, rng);

    int n_objects = cfg.min_objects + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(cfg.max_objects - cfg.min_objects + 1)));
    Vocabulary vocab = shape_vocabulary();
    for (int i = 0; i < n_objects; ++i) {
        int category = sample_category(cfg.category_freq, allowed_categories, rng);
        double size = rng.uniform(cfg.min_size, cfg.max_size);
        bool placed = false;
        for (int attempt = 0; attempt < 40 && !placed; ++attempt) {
            double margin = size / 2 + 2.0;
            double cx = rng.uniform(margin, cfg.image_size - margin);
            double cy = rng.uniform(margin, cfg.image_size - margin);
            ShapeTest shape = ShapeTest::make(category, cx, cy, size);
            BBox box = shape.analytic_box();
            bool clear = true;
            for (const auto& a : out.annotations)
                if (iou(a.box, box) > 0.15) clear = false;
            if (!clear) continue;
            double contrast = vocab.is_novel(category) ? cfg.novel_contrast : cfg.base_contrast;
            auto color = pick_color(region_mean(out.image, box), contrast, rng);
            stamp_shape(out.image, shape, color, rng);
            Annotation a;
            a.box = box;
            a.category = category;
            a.provenance = Provenance::GroundTruth;
            out.annotations.push_back(a);
            placed = true;
        }
    }
    quantize_u8(out.image);
    return out;
}

} // namespace

ShapeStamp rasterize_shape(int category, double cx, double cy, double size, int image_size) {
    ShapeTest shape = ShapeTest::make(category, cx, cy, size);
    ShapeStamp out;
    out.analytic_box = shape.analytic_box();
    out.mask.assign(static_cast<size_t>(image_size) * image_size, 0);
    for (int y = 0; y < image_size; ++y)
        for (int x = 0; x < image_size; ++x)
            if (shape.contains(x + 0.5, y + 0.5)) out.mask[static_cast<size_t>(y) * image_size + x] = 1;
    return out;
}

GeneratedDataset generate_dataset(const SceneConfig& cfg, const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "images");
    Vocabulary vocab = shape_vocabulary();

    GeneratedDataset out;
    out.vocab_file = (fs::path(out_dir) / "vocab.json").string();
    write_vocabulary(out.vocab_file, vocab);

    auto make_split = [&](const std::string& tag, int count, Split split, const std::vector<int>& allowed) {
        Dataset ds;
        ds.root = out_dir;
        for (int i = 0; i < count; ++i) {
            Rng rng(mix_seed(cfg.master_seed, fnv1a64(tag), static_cast<uint64_t>(i)));
            SceneResult scene = render_scene(cfg, allowed, rng);
            ImageRecord r;
            r.image_id = tag + "_" + std::to_string(i);
            r.file = "images/" + r.image_id + ".png";
            r.width = cfg.image_size;
            r.height = cfg.image_size;
            r.pixels = scene.image;
            r.annotations = scene.annotations;
            r.split = split;
            write_png((fs::path(out_dir) / r.file).string(), r.pixels);
            ds.records.push_back(std::move(r));
        }
        return ds;
    };

    std::vector<int> all_ids(vocab.names.size());
    for (size_t i = 0; i < all_ids.size(); ++i) all_ids[i] = static_cast<int>(i);

    Dataset labeled = make_split("lab", cfg.n_labeled, Split::Labeled, vocab.base_ids);
    Dataset unlabeled = make_split("unl", cfg.n_unlabeled, Split::Unlabeled, all_ids);
    Dataset test = make_split("tst", cfg.n_test, Split::Test, all_ids);

    out.labeled_manifest = (fs::path(out_dir) / "labeled.json").string();
    write_manifest(out.labeled_manifest, labeled, Split::Labeled);

    // hidden ground truth goes to the sidecar; the training-visible
    // manifest exposes no annotations for unlabeled images
    out.hidden_gt_sidecar = (fs::path(out_dir) / "hidden_gt.json").string();
    write_annotation_sidecar(out.hidden_gt_sidecar, unlabeled.records);
    Dataset unlabeled_visible = unlabeled;
    for (auto& r : unlabeled_visible.records) r.annotations.clear();
    out.unlabeled_manifest = (fs::path(out_dir) / "unlabeled.json").string();
    write_manifest(out.unlabeled_manifest, unlabeled_visible, Split::Unlabeled);

    out.test_manifest = (fs::path(out_dir) / "test.json").string();
    write_manifest(out.test_manifest, test, Split::Test);
    return out;
}

GeneratedCorpus generate_crop_corpus(const CropCorpusConfig& cfg, const std::string& out_dir) {
    fs::create_directories(fs::path(out_dir) / "images");
    Vocabulary vocab = shape_vocabulary();
    const SceneConfig& scene_cfg = cfg.scene;

    GeneratedCorpus out;
    json manifest;
    manifest["resolution"] = cfg.resolution;
    json samples = json::array();

    auto make_crop = [&](int category, const std::string& tag, uint64_t index) {
        // crop corpus uses a seed stream disjoint from the detection splits
        Rng rng(mix_seed(scene_cfg.master_seed, fnv1a64("crop-corpus"), fnv1a64(tag),
                         static_cast<uint64_t>(category) * 1000003ull + index));
        Image img = render_background(scene_cfg.image_size, rng);
        int n_clutter = static_cast<int>(rng.uniform_int(2));
        for (int i = 0; i < n_clutter; ++i) stamp_clutter(img, rng);
        double size = rng.uniform(scene_cfg.min_size, scene_cfg.max_size);
        double margin = size / 2 + 3.0;
        double cx = rng.uniform(margin, scene_cfg.image_size - margin);
        double cy = rng.uniform(margin, scene_cfg.image_size - margin);
        ShapeTest shape = ShapeTest::make(category, cx, cy, size);
        double contrast = vocab.is_novel(category) ? scene_cfg.novel_contrast : scene_cfg.base_contrast;
        auto color = pick_color(region_mean(img, shape.analytic_box()), contrast, rng);
        stamp_shape(img, shape, color, rng);
        quantize_u8(img);
        Image cropped = crop(img, shape.analytic_box(), cfg.context_expand, cfg.resolution, cfg.resolution);
        quantize_u8(cropped);
        return cropped;
    };

    for (int category = 0; category < vocab.size(); ++category) {
        for (int i = 0; i < cfg.crops_per_class_train; ++i) {
            CropSample s;
            s.category = category;
            s.image = make_crop(category, "train", static_cast<uint64_t>(i));
            std::string file = "images/crop_tr_" + std::to_string(category) + "_" + std::to_string(i) + ".png";
            write_png((fs::path(out_dir) / file).string(), s.image);
            json js;
            js["file"] = file;
            js["category"] = category;
            js["split"] = "train";
            samples.push_back(js);
            out.train.push_back(std::move(s));
        }
        for (int i = 0; i < cfg.crops_per_class_eval; ++i) {
            CropSample s;
            s.category = category;
            s.image = make_crop(category, "eval", static_cast<uint64_t>(i));
            std::string file = "images/crop_ev_" + std::to_string(category) + "_" + std::to_string(i) + ".png";
            write_png((fs::path(out_dir) / file).string(), s.image);
            json js;
            js["file"] = file;
            js["category"] = category;
            js["split"] = "eval";
            samples.push_back(js);
            out.eval.push_back(std::move(s));
        }
    }
    manifest["samples"] = samples;
    out.corpus_manifest = (fs::path(out_dir) / "corpus.json").string();
    std::ofstream f(out.corpus_manifest);
    f << manifest.dump(2) << "\n";
    return out;
}

GeneratedCorpus load_crop_corpus(const std::string& corpus_manifest) {
    std::ifstream in(corpus_manifest);
    if (!in) throw std::runtime_error("cannot read crop corpus: " + corpus_manifest);
    json manifest = json::parse(in);
    GeneratedCorpus out;
    out.corpus_manifest = corpus_manifest;
    fs::path root = fs::path(corpus_manifest).parent_path();
    for (const auto& js : manifest.at("samples")) {
        CropSample s;
        s.category = js.at("category").get<int>();
        s.image = read_png((root / js.at("file").get<std::string>()).string());
        if (js.at("split").get<std::string>() == "train")
            out.train.push_back(std::move(s));
        else
            out.eval.push_back(std::move(s));
    }
    return out;
}

} // namespace ovd
