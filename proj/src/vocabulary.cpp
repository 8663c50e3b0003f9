#include "ovd/vocabulary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "ovd/rng.hpp"

namespace ovd {

using nlohmann::json;

bool Vocabulary::is_novel(int category) const {
    return std::find(novel_ids.begin(), novel_ids.end(), category) != novel_ids.end();
}

void Vocabulary::validate() const {
    std::set<int> base(base_ids.begin(), base_ids.end());
    std::set<int> novel(novel_ids.begin(), novel_ids.end());
    if (base.size() != base_ids.size() || novel.size() != novel_ids.size())
        throw std::runtime_error("vocabulary: duplicate ids in partition");
    std::set<int> all;
    all.insert(base.begin(), base.end());
    all.insert(novel.begin(), novel.end());
    if (all.size() != base.size() + novel.size())
        throw std::runtime_error("vocabulary: base and novel ids overlap");
    if (all.size() != names.size())
        throw std::runtime_error("vocabulary: partition does not cover all categories");
    for (int id : all)
        if (id < 0 || id >= size()) throw std::runtime_error("vocabulary: id out of range");
}

void write_vocabulary(const std::string& path, const Vocabulary& vocab) {
    json j;
    j["names"] = vocab.names;
    j["base_ids"] = vocab.base_ids;
    j["novel_ids"] = vocab.novel_ids;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write vocabulary: " + path);
    out << j.dump(2) << "\n";
}

Vocabulary read_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read vocabulary: " + path);
    json j = json::parse(in);
    Vocabulary v;
    v.names = j.at("names").get<std::vector<std::string>>();
    v.base_ids = j.at("base_ids").get<std::vector<int>>();
    v.novel_ids = j.at("novel_ids").get<std::vector<int>>();
    v.validate();
    return v;
}

double SemanticEmbedding::norm() const {
    double s = 0.0;
    for (double v : vector) s += v * v;
    return std::sqrt(s);
}

double SemanticEmbedding::dot(const SemanticEmbedding& o) const {
    double s = 0.0;
    for (size_t i = 0; i < vector.size(); ++i) s += vector[i] * o.vector[i];
    return s;
}

std::vector<std::string> build_prompts(const Vocabulary& vocab) {
    if (vocab.names.empty()) throw std::runtime_error("build_prompts: empty vocabulary");
    std::vector<std::string> prompts;
    prompts.reserve(vocab.names.size());
    for (const auto& name : vocab.names) prompts.push_back("a photo of " + name);
    return prompts;
}

SemanticEmbedding HashTextEncoder::encode(const std::string& prompt) const {
    Rng rng(mix_seed(seed_, fnv1a64(prompt)));
    SemanticEmbedding e;
    e.vector.resize(dim_);
    for (int i = 0; i < dim_; ++i) e.vector[i] = rng.gaussian();
    double n = e.norm();
    if (n < 1e-12) { // astronomically unlikely; keep the contract anyway
        e.vector.assign(dim_, 0.0);
        e.vector[0] = 1.0;
        return e;
    }
    for (double& v : e.vector) v /= n;
    return e;
}

std::vector<SemanticEmbedding> encode_vocabulary(const std::vector<std::string>& prompts,
                                                 const HashTextEncoder& encoder) {
    std::vector<SemanticEmbedding> out;
    out.reserve(prompts.size());
    for (const auto& p : prompts) out.push_back(encoder.encode(p));
    return out;
}

void write_embeddings(const std::string& path, const std::vector<SemanticEmbedding>& table) {
    json j = json::array();
    for (const auto& e : table) j.push_back(e.vector);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embeddings: " + path);
    out << j.dump() << "\n";
}

std::vector<SemanticEmbedding> read_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read embeddings: " + path);
    json j = json::parse(in);
    std::vector<SemanticEmbedding> table;
    for (const auto& je : j) {
        SemanticEmbedding e;
        e.vector = je.get<std::vector<double>>();
        table.push_back(std::move(e));
    }
    return table;
}

} // namespace ovd
