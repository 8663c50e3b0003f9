#include "ovd/dataset_io.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace ovd {

using nlohmann::json;
namespace fs = std::filesystem;

static json annotation_to_json(const Annotation& a) {
    json j;
    j["bbox"] = {a.box.x1, a.box.y1, a.box.x2, a.box.y2};
    j["category"] = a.category;
    j["provenance"] = provenance_name(a.provenance);
    if (a.score) j["score"] = *a.score;
    return j;
}

static Annotation annotation_from_json(const json& j) {
    Annotation a;
    auto& b = j.at("bbox");
    a.box = BBox(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>());
    a.category = j.at("category").get<int>();
    a.provenance = provenance_from_name(j.at("provenance").get<std::string>());
    if (j.contains("score")) a.score = j.at("score").get<double>();
    return a;
}

void write_manifest(const std::string& path, const Dataset& ds, Split split) {
    json j;
    j["split"] = split_name(split);
    json recs = json::array();
    for (const auto& r : ds.records) {
        json jr;
        jr["image_id"] = r.image_id;
        jr["file"] = r.file;
        jr["width"] = r.width;
        jr["height"] = r.height;
        json anns = json::array();
        for (const auto& a : r.annotations) anns.push_back(annotation_to_json(a));
        jr["annotations"] = anns;
        recs.push_back(jr);
    }
    j["records"] = recs;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

Dataset read_manifest(const std::string& path, bool load_pixels) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read manifest: " + path);
    json j = json::parse(in);
    Dataset ds;
    ds.root = fs::path(path).parent_path().string();
    Split split = split_from_name(j.at("split").get<std::string>());
    for (const auto& jr : j.at("records")) {
        ImageRecord r;
        r.image_id = jr.at("image_id").get<std::string>();
        r.file = jr.at("file").get<std::string>();
        r.width = jr.at("width").get<int>();
        r.height = jr.at("height").get<int>();
        r.split = split;
        for (const auto& ja : jr.at("annotations")) r.annotations.push_back(annotation_from_json(ja));
        if (load_pixels) r.pixels = read_png((fs::path(ds.root) / r.file).string());
        ds.records.push_back(std::move(r));
    }
    return ds;
}

void write_annotation_sidecar(const std::string& path, const std::vector<ImageRecord>& records) {
    json j = json::object();
    for (const auto& r : records) {
        json anns = json::array();
        for (const auto& a : r.annotations) anns.push_back(annotation_to_json(a));
        j[r.image_id] = anns;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write sidecar: " + path);
    out << j.dump(2) << "\n";
}

std::vector<std::pair<std::string, std::vector<Annotation>>> read_annotation_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read sidecar: " + path);
    json j = json::parse(in);
    std::vector<std::pair<std::string, std::vector<Annotation>>> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::vector<Annotation> anns;
        for (const auto& ja : it.value()) anns.push_back(annotation_from_json(ja));
        out.emplace_back(it.key(), std::move(anns));
    }
    return out;
}

} // namespace ovd
