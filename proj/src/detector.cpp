#include "ovd/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ovd/rng.hpp"

namespace ovd {

using nn::Tensor;
using nn::Var;
using nlohmann::json;

namespace {

Tensor gaussian_tensor(std::vector<int> shape, Rng& rng, double scale) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.gaussian() * scale;
    return t;
}

constexpr double kDeltaClamp = 4.0; // caps exp() growth when decoding boxes

json config_to_json(const DetectorConfig& c) {
    json j;
    j["image_size"] = c.image_size;
    j["channels"] = c.channels;
    j["rpn_channels"] = c.rpn_channels;
    j["anchor_sizes"] = c.anchor_sizes;
    j["stride"] = c.stride;
    j["roi_out"] = c.roi_out;
    j["roi_hidden"] = c.roi_hidden;
    j["embed_dim"] = c.embed_dim;
    j["num_proposals"] = c.num_proposals;
    j["pre_nms_top"] = c.pre_nms_top;
    j["rpn_nms_thresh"] = c.rpn_nms_thresh;
    j["init_inv_tau"] = c.init_inv_tau;
    return j;
}

DetectorConfig config_from_json(const json& j) {
    DetectorConfig c;
    j.at("image_size").get_to(c.image_size);
    auto ch = j.at("channels").get<std::vector<int>>();
    for (size_t i = 0; i < 4; ++i) c.channels[i] = ch.at(i);
    j.at("rpn_channels").get_to(c.rpn_channels);
    j.at("anchor_sizes").get_to(c.anchor_sizes);
    j.at("stride").get_to(c.stride);
    j.at("roi_out").get_to(c.roi_out);
    j.at("roi_hidden").get_to(c.roi_hidden);
    j.at("embed_dim").get_to(c.embed_dim);
    j.at("num_proposals").get_to(c.num_proposals);
    j.at("pre_nms_top").get_to(c.pre_nms_top);
    j.at("rpn_nms_thresh").get_to(c.rpn_nms_thresh);
    j.at("init_inv_tau").get_to(c.init_inv_tau);
    return c;
}

} // namespace

DetectorParams DetectorParams::init(const DetectorConfig& cfg, uint64_t seed) {
    Rng rng(mix_seed(seed, fnv1a64("detector-init")));
    DetectorParams p;
    p.cfg = cfg;
    auto he = [](int fan_in) { return std::sqrt(2.0 / fan_in); };

    p.conv1_w = gaussian_tensor({cfg.channels[0], 3, 3, 3}, rng, he(3 * 9));
    p.conv1_b = Tensor({cfg.channels[0]});
    p.conv2_w = gaussian_tensor({cfg.channels[1], cfg.channels[0], 3, 3}, rng, he(cfg.channels[0] * 9));
    p.conv2_b = Tensor({cfg.channels[1]});
    p.conv3_w = gaussian_tensor({cfg.channels[2], cfg.channels[1], 3, 3}, rng, he(cfg.channels[1] * 9));
    p.conv3_b = Tensor({cfg.channels[2]});
    p.conv4_w = gaussian_tensor({cfg.channels[3], cfg.channels[2], 3, 3}, rng, he(cfg.channels[2] * 9));
    p.conv4_b = Tensor({cfg.channels[3]});

    int A = cfg.anchors_per_cell();
    p.rpn_conv_w = gaussian_tensor({cfg.rpn_channels, cfg.channels[3], 3, 3}, rng, he(cfg.channels[3] * 9));
    p.rpn_conv_b = Tensor({cfg.rpn_channels});
    p.rpn_obj_w = gaussian_tensor({A, cfg.rpn_channels, 1, 1}, rng, 0.01);
    p.rpn_obj_b = Tensor({A});
    for (double& v : p.rpn_obj_b.data) v = -2.0; // low-objectness prior
    p.rpn_delta_w = Tensor({4 * A, cfg.rpn_channels, 1, 1});
    p.rpn_delta_b = Tensor({4 * A});

    int roi_in = cfg.channels[3] * cfg.roi_out * cfg.roi_out;
    p.fc1_w = gaussian_tensor({cfg.roi_hidden, roi_in}, rng, he(roi_in));
    p.fc1_b = Tensor({cfg.roi_hidden});
    p.fc2_w = gaussian_tensor({cfg.embed_dim, cfg.roi_hidden}, rng, std::sqrt(1.0 / cfg.roi_hidden));
    p.fc2_b = Tensor({cfg.embed_dim});
    // keeps RoI features off the exact-zero point on all-black inputs so the
    // cosine head stays defined
    for (double& v : p.fc2_b.data) v = 0.01;

    // zero delta == identity refinement at initialization
    p.reg_w = Tensor({4, cfg.embed_dim});
    p.reg_b = Tensor({4});

    p.bg_embed = gaussian_tensor({1, cfg.embed_dim}, rng, 1.0);
    p.log_inv_tau = Tensor({1});
    p.log_inv_tau.data[0] = std::log(cfg.init_inv_tau);
    return p;
}

std::vector<std::pair<std::string, nn::Tensor*>> DetectorParams::entries() {
    return {
        {"conv1_w", &conv1_w}, {"conv1_b", &conv1_b}, {"conv2_w", &conv2_w}, {"conv2_b", &conv2_b},
        {"conv3_w", &conv3_w}, {"conv3_b", &conv3_b}, {"conv4_w", &conv4_w}, {"conv4_b", &conv4_b},
        {"rpn_conv_w", &rpn_conv_w}, {"rpn_conv_b", &rpn_conv_b}, {"rpn_obj_w", &rpn_obj_w}, {"rpn_obj_b", &rpn_obj_b},
        {"rpn_delta_w", &rpn_delta_w}, {"rpn_delta_b", &rpn_delta_b}, {"fc1_w", &fc1_w}, {"fc1_b", &fc1_b},
        {"fc2_w", &fc2_w}, {"fc2_b", &fc2_b}, {"reg_w", &reg_w}, {"reg_b", &reg_b},
        {"bg_embed", &bg_embed}, {"log_inv_tau", &log_inv_tau},
    };
}

std::vector<std::pair<std::string, const nn::Tensor*>> DetectorParams::entries() const {
    std::vector<std::pair<std::string, const nn::Tensor*>> out;
    for (auto& [name, t] : const_cast<DetectorParams*>(this)->entries()) out.emplace_back(name, t);
    return out;
}

size_t DetectorParams::flat_size() const {
    size_t n = 0;
    for (auto& [name, t] : entries()) n += t->numel();
    return n;
}

std::vector<double> DetectorParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(flat_size());
    for (auto& [name, t] : entries()) flat.insert(flat.end(), t->data.begin(), t->data.end());
    return flat;
}

void DetectorParams::unflatten(const std::vector<double>& flat) {
    if (flat.size() != flat_size()) throw std::runtime_error("unflatten: size mismatch");
    size_t off = 0;
    for (auto& [name, t] : entries()) {
        std::copy(flat.begin() + off, flat.begin() + off + t->numel(), t->data.begin());
        off += t->numel();
    }
}

void DetectorParams::save(const std::string& path) const {
    json header;
    header["config"] = config_to_json(cfg);
    json ents = json::array();
    for (auto& [name, t] : entries()) {
        json e;
        e["name"] = name;
        e["shape"] = t->shape;
        ents.push_back(e);
    }
    header["entries"] = ents;
    std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    const char magic[8] = {'O', 'V', 'D', 'C', 'K', 'P', 'T', '1'};
    out.write(magic, 8);
    uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (auto& [name, t] : entries())
        out.write(reinterpret_cast<const char*>(t->data.data()), static_cast<std::streamsize>(t->data.size() * 8));
}

DetectorParams DetectorParams::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "OVDCKPT1", 8) != 0) throw std::runtime_error("bad checkpoint magic: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    json header = json::parse(hs);

    DetectorParams p;
    p.cfg = config_from_json(header.at("config"));
    auto ents = p.entries();
    const auto& jents = header.at("entries");
    if (jents.size() != ents.size()) throw std::runtime_error("checkpoint entry count mismatch");
    for (size_t i = 0; i < ents.size(); ++i) {
        if (jents[i].at("name").get<std::string>() != ents[i].first)
            throw std::runtime_error("checkpoint entry order mismatch at " + ents[i].first);
        auto shape = jents[i].at("shape").get<std::vector<int>>();
        *ents[i].second = Tensor(shape);
        in.read(reinterpret_cast<char*>(ents[i].second->data.data()),
                static_cast<std::streamsize>(ents[i].second->data.size() * 8));
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return p;
}

std::array<double, 4> encode_deltas(const BBox& target, const BBox& anchor) {
    double aw = anchor.width(), ah = anchor.height();
    return {
        (target.cx() - anchor.cx()) / aw,
        (target.cy() - anchor.cy()) / ah,
        std::log(target.width() / aw),
        std::log(target.height() / ah),
    };
}

BBox decode_deltas(const std::array<double, 4>& d, const BBox& anchor) {
    double dx = d[0], dy = d[1];
    double dw = std::clamp(d[2], -kDeltaClamp, kDeltaClamp);
    double dh = std::clamp(d[3], -kDeltaClamp, kDeltaClamp);
    double cx = anchor.cx() + dx * anchor.width();
    double cy = anchor.cy() + dy * anchor.height();
    double w = anchor.width() * std::exp(dw);
    double h = anchor.height() * std::exp(dh);
    return BBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h);
}

DetectorForward::DetectorForward(const DetectorParams& params, const Image& image) : params_(params) {
    const auto& cfg = params.cfg;
    if (image.width != cfg.image_size || image.height != cfg.image_size)
        throw std::runtime_error("detector: image does not match configured input size");

    // image -> [3,H,W]
    Tensor x({3, image.height, image.width});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < image.height; ++y)
            for (int xx = 0; xx < image.width; ++xx)
                x.data[(static_cast<size_t>(c) * image.height + y) * image.width + xx] = image.at(xx, y, c);

    auto ents = params.entries();
    param_vars_.reserve(ents.size());
    for (auto& [name, t] : ents) param_vars_.push_back(tape_.leaf(*t));
    auto pv = [&](int i) { return param_vars_[static_cast<size_t>(i)]; };

    Var img = tape_.leaf(x);
    Var h1 = tape_.relu(tape_.conv2d(img, pv(0), pv(1), 2, 1));
    Var h2 = tape_.relu(tape_.conv2d(h1, pv(2), pv(3), 2, 1));
    Var h3 = tape_.relu(tape_.conv2d(h2, pv(4), pv(5), 2, 1));
    feat_ = tape_.relu(tape_.conv2d(h3, pv(6), pv(7), 1, 1));

    Var r = tape_.relu(tape_.conv2d(feat_, pv(8), pv(9), 1, 1));
    rpn_obj_ = tape_.conv2d(r, pv(10), pv(11), 1, 0);
    rpn_delta_ = tape_.conv2d(r, pv(12), pv(13), 1, 0);

    fh_ = tape_.shape(feat_)[1];
    fw_ = tape_.shape(feat_)[2];
    anchors_.reserve(static_cast<size_t>(cfg.anchors_per_cell()) * fh_ * fw_);
    for (int a = 0; a < cfg.anchors_per_cell(); ++a) {
        double s = cfg.anchor_sizes[a];
        for (int y = 0; y < fh_; ++y)
            for (int xx = 0; xx < fw_; ++xx) {
                double cx = (xx + 0.5) * cfg.stride;
                double cy = (y + 0.5) * cfg.stride;
                anchors_.push_back(BBox(cx - s / 2, cy - s / 2, cx + s / 2, cy + s / 2));
            }
    }
}

size_t DetectorForward::obj_index(int anchor) const {
    return static_cast<size_t>(anchor); // obj map is [A,fh,fw], anchors enumerated in the same order
}

std::array<size_t, 4> DetectorForward::delta_indices(int anchor) const {
    size_t cell = static_cast<size_t>(anchor) % (static_cast<size_t>(fh_) * fw_);
    size_t a = static_cast<size_t>(anchor) / (static_cast<size_t>(fh_) * fw_);
    std::array<size_t, 4> out;
    for (size_t k = 0; k < 4; ++k) out[k] = (a * 4 + k) * (static_cast<size_t>(fh_) * fw_) + cell;
    return out;
}

std::vector<double> DetectorForward::anchor_objectness() const {
    const auto& logits = tape_.value(rpn_obj_);
    std::vector<double> out(anchors_.size());
    for (size_t i = 0; i < anchors_.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-logits[i]));
    return out;
}

std::vector<Proposal> DetectorForward::proposals(int max_out) const {
    const auto& cfg = params_.cfg;
    if (max_out < 0) max_out = cfg.num_proposals;
    const auto& logits = tape_.value(rpn_obj_);
    const auto& deltas = tape_.value(rpn_delta_);
    double W = cfg.image_size, H = cfg.image_size;

    std::vector<ScoredBox> cand;
    cand.reserve(anchors_.size());
    for (size_t i = 0; i < anchors_.size(); ++i) {
        auto di = delta_indices(static_cast<int>(i));
        std::array<double, 4> d{deltas[di[0]], deltas[di[1]], deltas[di[2]], deltas[di[3]]};
        BBox b = decode_deltas(d, anchors_[i]).clipped(W, H);
        if (b.width() < 1e-3 || b.height() < 1e-3) continue;
        double score = 1.0 / (1.0 + std::exp(-logits[i]));
        cand.push_back({b, score});
    }
    std::stable_sort(cand.begin(), cand.end(), [](const ScoredBox& a, const ScoredBox& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.box.lex_less(b.box);
    });
    if (static_cast<int>(cand.size()) > cfg.pre_nms_top) cand.resize(cfg.pre_nms_top);
    auto kept = nms(cand, cfg.rpn_nms_thresh);
    if (static_cast<int>(kept.size()) > max_out) kept.resize(max_out);
    std::vector<Proposal> out;
    out.reserve(kept.size());
    for (const auto& k : kept) out.push_back({k.box, k.score});
    return out;
}

DetectorForward::RoiVars DetectorForward::roi_pass(const std::vector<BBox>& boxes,
                                                   const std::vector<SemanticEmbedding>& embeddings) {
    if (boxes.empty()) throw std::runtime_error("roi_pass: empty box list");
    const auto& cfg = params_.cfg;
    auto pv = [&](int i) { return param_vars_[static_cast<size_t>(i)]; };

    Var pooled = tape_.roi_align(feat_, boxes, cfg.roi_out, 1.0 / cfg.stride);
    Var h = tape_.relu(tape_.linear(pooled, pv(14), pv(15)));
    Var feats = tape_.linear(h, pv(16), pv(17)); // [N, d]

    RoiVars rv;
    rv.features = feats;
    rv.reg_delta = tape_.linear(feats, pv(18), pv(19));

    if (!embeddings.empty()) {
        int C = static_cast<int>(embeddings.size());
        Tensor table({C, cfg.embed_dim});
        for (int j = 0; j < C; ++j) {
            if (static_cast<int>(embeddings[j].vector.size()) != cfg.embed_dim)
                throw std::runtime_error("roi_pass: embedding dim mismatch");
            std::copy(embeddings[j].vector.begin(), embeddings[j].vector.end(),
                      table.data.begin() + static_cast<size_t>(j) * cfg.embed_dim);
        }
        Var tv = tape_.leaf(table);
        Var fn = tape_.l2_normalize_rows(feats);
        Var cos_cat = tape_.matmul_nt(fn, tv);
        Var bgn = tape_.l2_normalize_rows(pv(20));
        Var cos_bg = tape_.matmul_nt(fn, bgn);
        Var cos = tape_.concat_cols(cos_cat, cos_bg);
        rv.cls_scores = tape_.scale_by_exp(cos, pv(21));
    }
    return rv;
}

std::vector<Proposal> forward_rpn(const DetectorParams& params, const Image& image) {
    DetectorForward fwd(params, image);
    return fwd.proposals();
}

std::vector<RoIFeature> roi_features(const DetectorParams& params, const Image& image, const std::vector<BBox>& boxes) {
    if (boxes.empty()) throw std::runtime_error("roi_features: empty box list");
    DetectorForward fwd(params, image);
    auto rv = fwd.roi_pass(boxes, {});
    const auto& vals = fwd.tape().value(rv.features);
    int d = params.cfg.embed_dim;
    std::vector<RoIFeature> out(boxes.size());
    for (size_t i = 0; i < boxes.size(); ++i)
        out[i].vector.assign(vals.begin() + static_cast<long>(i) * d, vals.begin() + static_cast<long>(i + 1) * d);
    return out;
}

std::vector<BBox> regress_boxes(const DetectorParams& params, const std::vector<RoIFeature>& features,
                                const std::vector<BBox>& anchors) {
    if (features.size() != anchors.size()) throw std::runtime_error("regress_boxes: feature/anchor count mismatch");
    std::vector<BBox> out;
    out.reserve(features.size());
    const auto& w = params.reg_w.data;
    const auto& b = params.reg_b.data;
    int d = params.cfg.embed_dim;
    for (size_t i = 0; i < features.size(); ++i) {
        std::array<double, 4> delta;
        for (int k = 0; k < 4; ++k) {
            double acc = b[k];
            for (int j = 0; j < d; ++j) acc += w[static_cast<size_t>(k) * d + j] * features[i].vector[j];
            delta[k] = acc;
        }
        out.push_back(decode_deltas(delta, anchors[i]));
    }
    return out;
}

std::vector<std::vector<double>> classify_semantic(const DetectorParams& params, const std::vector<RoIFeature>& features,
                                                   const std::vector<SemanticEmbedding>& embeddings) {
    if (embeddings.empty()) throw std::runtime_error("classify_semantic: empty embedding list");
    int d = params.cfg.embed_dim;
    double inv_tau = std::exp(params.log_inv_tau.data[0]);

    double bg_norm = 0.0;
    for (double v : params.bg_embed.data) bg_norm += v * v;
    bg_norm = std::sqrt(bg_norm);

    std::vector<std::vector<double>> out;
    out.reserve(features.size());
    for (const auto& f : features) {
        double fn = 0.0;
        for (double v : f.vector) fn += v * v;
        fn = std::sqrt(fn);
        if (fn < 1e-12) throw std::runtime_error("classify_semantic: zero-norm feature");
        std::vector<double> row(embeddings.size() + 1);
        for (size_t j = 0; j < embeddings.size(); ++j) {
            double dot = 0.0;
            for (int k = 0; k < d; ++k) dot += f.vector[k] * embeddings[j].vector[k];
            row[j] = inv_tau * dot / (fn * embeddings[j].norm());
        }
        double dotbg = 0.0;
        for (int k = 0; k < d; ++k) dotbg += f.vector[k] * params.bg_embed.data[k];
        row[embeddings.size()] = inv_tau * dotbg / (fn * bg_norm);
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<double> predict_probs(const std::vector<double>& score_row) {
    return nn::softmax_row(score_row);
}

std::vector<std::pair<Detection, int>> detect(const DetectorParams& params, const Image& image,
                                              const std::vector<SemanticEmbedding>& embeddings, double score_thresh,
                                              double nms_thresh, int max_dets) {
    if (embeddings.empty()) throw std::runtime_error("detect: empty embedding list");
    DetectorForward fwd(params, image);
    auto props = fwd.proposals();
    if (props.empty()) return {};

    std::vector<BBox> boxes;
    boxes.reserve(props.size());
    for (const auto& p : props) boxes.push_back(p.box);
    auto rv = fwd.roi_pass(boxes, embeddings);

    const auto& scores = fwd.tape().value(rv.cls_scores);
    const auto& deltas = fwd.tape().value(rv.reg_delta);
    int C = static_cast<int>(embeddings.size());
    int M = C + 1;
    double W = params.cfg.image_size, H = params.cfg.image_size;

    struct Cand {
        BBox box;
        std::vector<double> score_row, prob;
    };
    std::vector<Cand> cands(boxes.size());
    for (size_t i = 0; i < boxes.size(); ++i) {
        std::array<double, 4> d{deltas[i * 4], deltas[i * 4 + 1], deltas[i * 4 + 2], deltas[i * 4 + 3]};
        cands[i].box = decode_deltas(d, boxes[i]).clipped(W, H);
        cands[i].score_row.assign(scores.begin() + static_cast<long>(i) * M, scores.begin() + static_cast<long>(i + 1) * M);
        cands[i].prob = predict_probs(cands[i].score_row);
    }

    std::vector<std::pair<Detection, int>> out;
    for (int c = 0; c < C; ++c) {
        std::vector<ScoredBox> per_class;
        std::vector<size_t> src;
        for (size_t i = 0; i < cands.size(); ++i) {
            if (!cands[i].box.valid()) continue;
            per_class.push_back({cands[i].box, cands[i].prob[c]});
            src.push_back(i);
        }
        auto kept = nms(per_class, nms_thresh);
        for (const auto& k : kept) {
            if (k.score < score_thresh) continue;
            // recover the candidate to copy its score vectors
            for (size_t i = 0; i < per_class.size(); ++i) {
                if (per_class[i].box == k.box && per_class[i].score == k.score) {
                    Detection det;
                    det.box = k.box;
                    det.class_scores = cands[src[i]].score_row;
                    det.prob = cands[src[i]].prob;
                    out.emplace_back(std::move(det), c);
                    break;
                }
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        double sa = a.first.prob[a.second], sb = b.first.prob[b.second];
        if (sa != sb) return sa > sb;
        return a.first.box.lex_less(b.first.box);
    });
    if (static_cast<int>(out.size()) > max_dets) out.resize(max_dets);
    return out;
}

} // namespace ovd
