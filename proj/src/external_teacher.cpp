#include "ovd/external_teacher.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace ovd {

using nn::Tensor;
using nn::Var;
using nlohmann::json;

CropEncoderParams CropEncoderParams::init(const CropEncoderConfig& cfg, uint64_t seed) {
    Rng rng(mix_seed(seed, fnv1a64("crop-encoder-init")));
    auto he = [](int fan_in) { return std::sqrt(2.0 / fan_in); };
    auto gauss = [&rng](std::vector<int> shape, double scale) {
        Tensor t(std::move(shape));
        for (double& v : t.data) v = rng.gaussian() * scale;
        return t;
    };
    CropEncoderParams p;
    p.cfg = cfg;
    p.conv1_w = gauss({cfg.channels[0], 3, 3, 3}, he(27));
    p.conv1_b = Tensor({cfg.channels[0]});
    p.conv2_w = gauss({cfg.channels[1], cfg.channels[0], 3, 3}, he(cfg.channels[0] * 9));
    p.conv2_b = Tensor({cfg.channels[1]});
    p.conv3_w = gauss({cfg.channels[2], cfg.channels[1], 3, 3}, he(cfg.channels[1] * 9));
    p.conv3_b = Tensor({cfg.channels[2]});
    p.fc_w = gauss({cfg.embed_dim, cfg.channels[2]}, std::sqrt(1.0 / cfg.channels[2]));
    p.fc_b = Tensor({cfg.embed_dim});
    for (double& v : p.fc_b.data) v = 0.01;
    return p;
}

std::vector<std::pair<std::string, Tensor*>> CropEncoderParams::entries() {
    return {
        {"conv1_w", &conv1_w}, {"conv1_b", &conv1_b}, {"conv2_w", &conv2_w}, {"conv2_b", &conv2_b},
        {"conv3_w", &conv3_w}, {"conv3_b", &conv3_b}, {"fc_w", &fc_w},       {"fc_b", &fc_b},
    };
}

std::vector<double> CropEncoderParams::flatten() const {
    std::vector<double> flat;
    for (auto& [name, t] : const_cast<CropEncoderParams*>(this)->entries())
        flat.insert(flat.end(), t->data.begin(), t->data.end());
    return flat;
}

void CropEncoderParams::unflatten(const std::vector<double>& flat) {
    size_t off = 0;
    for (auto& [name, t] : entries()) {
        if (off + t->numel() > flat.size()) throw std::runtime_error("crop encoder unflatten: size mismatch");
        std::copy(flat.begin() + off, flat.begin() + off + t->numel(), t->data.begin());
        off += t->numel();
    }
    if (off != flat.size()) throw std::runtime_error("crop encoder unflatten: size mismatch");
}

namespace {

Tensor image_to_chw(const Image& img) {
    Tensor x({3, img.height, img.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int xx = 0; xx < img.width; ++xx)
                x.data[(static_cast<size_t>(c) * img.height + y) * img.width + xx] = img.at(xx, y, c);
    return x;
}

struct EncoderVars {
    std::vector<Var> params;
    Var embedding; // [1, d]
};

EncoderVars encoder_forward(nn::Tape& tape, CropEncoderParams& enc, const Image& crop) {
    EncoderVars ev;
    for (auto& [name, t] : enc.entries()) ev.params.push_back(tape.leaf(*t));
    Var x = tape.leaf(image_to_chw(crop));
    Var h1 = tape.relu(tape.conv2d(x, ev.params[0], ev.params[1], 2, 1));
    Var h2 = tape.relu(tape.conv2d(h1, ev.params[2], ev.params[3], 2, 1));
    Var h3 = tape.relu(tape.conv2d(h2, ev.params[4], ev.params[5], 2, 1));
    Var pooled = tape.mean_pool_all(h3);
    ev.embedding = tape.linear(pooled, ev.params[6], ev.params[7]);
    return ev;
}

} // namespace

std::vector<std::vector<double>> encode_crops(const CropEncoderParams& enc, const std::vector<Image>& crops) {
    std::vector<std::vector<double>> out;
    out.reserve(crops.size());
    auto& mut_enc = const_cast<CropEncoderParams&>(enc);
    for (const auto& crop : crops) {
        if (crop.width != enc.cfg.resolution || crop.height != enc.cfg.resolution)
            throw std::runtime_error("encode_crops: crop does not match encoder resolution");
        nn::Tape tape;
        auto ev = encoder_forward(tape, mut_enc, crop);
        auto v = tape.value(ev.embedding);
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(std::max(n, 1e-24));
        std::vector<double> unit(v.size());
        for (size_t i = 0; i < v.size(); ++i) unit[i] = v[i] / n;
        out.push_back(std::move(unit));
    }
    return out;
}

std::vector<std::vector<double>> classify_crops(const ExternalTeacher& teacher, const std::vector<Image>& crops) {
    if (crops.empty()) throw std::runtime_error("classify_crops: empty crop list");
    auto embs = encode_crops(teacher.encoder, crops);
    std::vector<std::vector<double>> out;
    out.reserve(crops.size());
    for (const auto& v : embs) {
        std::vector<double> scores(teacher.embeddings.size());
        for (size_t j = 0; j < teacher.embeddings.size(); ++j) {
            double dot = 0.0;
            for (size_t k = 0; k < v.size(); ++k) dot += v[k] * teacher.embeddings[j].vector[k];
            scores[j] = teacher.temperature_scale * dot; // prototypes are unit norm
        }
        out.push_back(nn::softmax_row(scores));
    }
    return out;
}

namespace {

// Oracle rows: ground-truth category with tight probability, label noise at
// rate eta, and a deliberately uncertain row when no object overlaps.
std::vector<double> oracle_row(const ExternalTeacher& teacher, const ImageRecord& image, const BBox& candidate,
                               size_t candidate_index) {
    if (!teacher.oracle_gt) throw std::runtime_error("oracle mode requires a ground-truth table");
    auto it = teacher.oracle_gt->find(image.image_id);
    int n_cats = static_cast<int>(teacher.embeddings.size());
    std::vector<double> row(n_cats, 1.0 / n_cats);
    int best_cat = -1;
    double best_iou = 0.0;
    if (it != teacher.oracle_gt->end()) {
        for (const auto& a : it->second) {
            double v = iou(a.box, candidate);
            if (v > best_iou) {
                best_iou = v;
                best_cat = a.category;
            }
        }
    }
    if (best_cat < 0 || best_iou < 0.5) return row; // uniform: stays under any sane p0
    Rng rng(mix_seed(teacher.oracle_seed, fnv1a64(image.image_id), candidate_index));
    int cat = best_cat;
    if (teacher.oracle_noise > 0.0 && rng.bernoulli(teacher.oracle_noise) && n_cats > 1) {
        int shift = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n_cats - 1)));
        cat = (best_cat + shift) % n_cats;
    }
    double p = 0.95;
    for (int j = 0; j < n_cats; ++j) row[j] = (1.0 - p) / (n_cats - 1);
    row[cat] = p;
    return row;
}

} // namespace

std::vector<PseudoLabel> make_pseudo_labels(const ExternalTeacher& teacher, const ImageRecord& image,
                                            const std::vector<BBox>& candidates) {
    std::vector<PseudoLabel> out;
    if (candidates.empty()) return out;

    std::vector<std::vector<double>> rows;
    if (teacher.oracle_mode) {
        rows.reserve(candidates.size());
        for (size_t i = 0; i < candidates.size(); ++i) rows.push_back(oracle_row(teacher, image, candidates[i], i));
    } else {
        std::vector<Image> crops;
        crops.reserve(candidates.size());
        for (const auto& b : candidates)
            crops.push_back(crop(image.pixels, b, teacher.crop_expand, teacher.resolution(), teacher.resolution()));
        rows = classify_crops(teacher, crops);
    }

    for (size_t i = 0; i < candidates.size(); ++i) {
        auto& row = rows[i];
        size_t arg = std::max_element(row.begin(), row.end()) - row.begin();
        if (row[arg] >= teacher.p0) {
            PseudoLabel pl;
            pl.box = candidates[i];
            pl.category = static_cast<int>(arg);
            pl.prob = row[arg];
            out.push_back(pl);
        }
    }
    return out;
}

void save_external_teacher(const std::string& path, const ExternalTeacher& teacher) {
    json header;
    header["resolution"] = teacher.encoder.cfg.resolution;
    header["channels"] = teacher.encoder.cfg.channels;
    header["embed_dim"] = teacher.encoder.cfg.embed_dim;
    header["temperature_scale"] = teacher.temperature_scale;
    header["crop_expand"] = teacher.crop_expand;
    json embs = json::array();
    for (const auto& e : teacher.embeddings) embs.push_back(e.vector);
    header["embeddings"] = embs;
    std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write external teacher: " + path);
    const char magic[8] = {'O', 'V', 'D', 'X', 'T', 'C', 'H', '1'};
    out.write(magic, 8);
    uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    auto flat = teacher.encoder.flatten();
    uint64_t n = flat.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * 8));
}

ExternalTeacher load_external_teacher(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read external teacher: " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "OVDXTCH1", 8) != 0) throw std::runtime_error("bad external teacher file: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    json header = json::parse(hs);

    ExternalTeacher t;
    CropEncoderConfig cfg;
    header.at("resolution").get_to(cfg.resolution);
    auto ch = header.at("channels").get<std::vector<int>>();
    for (size_t i = 0; i < 3; ++i) cfg.channels[i] = ch.at(i);
    header.at("embed_dim").get_to(cfg.embed_dim);
    t.encoder = CropEncoderParams::init(cfg, 0);
    header.at("temperature_scale").get_to(t.temperature_scale);
    header.at("crop_expand").get_to(t.crop_expand);
    for (const auto& je : header.at("embeddings")) {
        SemanticEmbedding e;
        e.vector = je.get<std::vector<double>>();
        t.embeddings.push_back(std::move(e));
    }
    uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    std::vector<double> flat(n);
    in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(n * 8));
    if (!in) throw std::runtime_error("truncated external teacher file: " + path);
    t.encoder.unflatten(flat);
    return t;
}

PretrainResult pretrain_external(ExternalTeacher& teacher, const std::vector<CropSample>& train,
                                 const std::vector<CropSample>& holdout, const PretrainConfig& cfg) {
    if (train.empty()) throw std::runtime_error("pretrain_external: empty training corpus");
    int n_cats = static_cast<int>(teacher.embeddings.size());
    int d = teacher.encoder.cfg.embed_dim;

    Tensor table({n_cats, d});
    for (int j = 0; j < n_cats; ++j)
        std::copy(teacher.embeddings[j].vector.begin(), teacher.embeddings[j].vector.end(),
                  table.data.begin() + static_cast<size_t>(j) * d);

    Rng rng(mix_seed(cfg.seed, fnv1a64("pretrain-external")));
    nn::SgdState opt;
    auto flat = teacher.encoder.flatten();
    PretrainResult result;

    for (int it = 0; it < cfg.iters; ++it) {
        std::vector<double> grad(flat.size(), 0.0);
        double loss_acc = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& sample = train[rng.uniform_int(train.size())];
            nn::Tape tape;
            auto ev = encoder_forward(tape, teacher.encoder, sample.image);
            Var unit = tape.l2_normalize_rows(ev.embedding);
            Var tv = tape.leaf(table);
            Var cos = tape.matmul_nt(unit, tv);
            Var scores = tape.mul_const(cos, teacher.temperature_scale);
            Var loss = tape.softmax_cross_entropy(scores, {sample.category}, {1.0 / cfg.batch_size});
            tape.backward(loss);
            loss_acc += tape.scalar(loss);
            size_t off = 0;
            for (size_t pi = 0; pi < ev.params.size(); ++pi) {
                const auto& g = tape.grad(ev.params[pi]);
                for (size_t k = 0; k < g.size(); ++k) grad[off + k] += g[k];
                off += g.size();
            }
        }
        opt.step(flat, grad, cfg.learning_rate, cfg.momentum, cfg.weight_decay);
        teacher.encoder.unflatten(flat);
        result.loss_curve.push_back(loss_acc);
    }

    if (!holdout.empty()) {
        std::vector<Image> crops;
        crops.reserve(holdout.size());
        for (const auto& s : holdout) crops.push_back(s.image);
        auto rows = classify_crops(teacher, crops);
        int correct = 0;
        for (size_t i = 0; i < holdout.size(); ++i) {
            size_t arg = std::max_element(rows[i].begin(), rows[i].end()) - rows[i].begin();
            if (static_cast<int>(arg) == holdout[i].category) ++correct;
        }
        result.holdout_accuracy = static_cast<double>(correct) / holdout.size();
    }
    return result;
}

} // namespace ovd
