#include "ovd/label_queue.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace ovd {

using nlohmann::json;

void LabelQueue::unindex(const QueueEntry& e) {
    for (const auto& pl : e.labels) {
        auto it = index_.find(pl.category);
        if (it == index_.end()) continue;
        auto& ids = it->second;
        auto pos = std::lower_bound(ids.begin(), ids.end(), e.image_id);
        if (pos != ids.end() && *pos == e.image_id) ids.erase(pos);
        if (ids.empty()) index_.erase(it);
    }
}

void LabelQueue::index_entry(const QueueEntry& e) {
    for (const auto& pl : e.labels) {
        auto& ids = index_[pl.category];
        auto pos = std::lower_bound(ids.begin(), ids.end(), e.image_id);
        if (pos == ids.end() || *pos != e.image_id) ids.insert(pos, e.image_id);
    }
}

void LabelQueue::push(const std::string& image_id, const std::string& image_path, std::vector<PseudoLabel> labels) {
    if (labels.empty()) throw std::runtime_error("label queue: empty label list");
    auto it = entries_.find(image_id);
    if (it != entries_.end()) {
        unindex(it->second);
        it->second.image_path = image_path;
        it->second.labels = std::move(labels);
        it->second.version += 1;
        ++overwrites_;
        index_entry(it->second);
    } else {
        QueueEntry e;
        e.image_id = image_id;
        e.image_path = image_path;
        e.labels = std::move(labels);
        e.version = 0;
        index_entry(e);
        entries_.emplace(image_id, std::move(e));
    }
}

const QueueEntry* LabelQueue::find(const std::string& image_id) const {
    auto it = entries_.find(image_id);
    return it == entries_.end() ? nullptr : &it->second;
}

std::vector<const QueueEntry*> LabelQueue::sample(int n, Rng& rng) const {
    std::vector<const QueueEntry*> out;
    if (n <= 0 || entries_.empty() || index_.empty()) return out;
    std::vector<const std::vector<std::string>*> lists;
    lists.reserve(index_.size());
    for (const auto& [cat, ids] : index_)
        if (!ids.empty()) lists.push_back(&ids);
    if (lists.empty()) return out;
    for (int i = 0; i < n; ++i) {
        const auto& ids = *lists[rng.uniform_int(lists.size())];
        const std::string& id = ids[rng.uniform_int(ids.size())];
        out.push_back(&entries_.at(id));
    }
    return out;
}

LabelQueue::Stats LabelQueue::stats() const {
    Stats s;
    s.total_entries = entries_.size();
    s.overwrites = overwrites_;
    for (const auto& [cat, ids] : index_) s.images_per_class[cat] = static_cast<int>(ids.size());
    for (const auto& [id, e] : entries_)
        for (const auto& pl : e.labels) s.labels_per_class[pl.category] += 1;
    return s;
}

std::string LabelQueue::snapshot() const {
    json j;
    json ents = json::array();
    for (const auto& [id, e] : entries_) {
        json je;
        je["image_id"] = e.image_id;
        je["image_path"] = e.image_path;
        je["version"] = e.version;
        json labels = json::array();
        for (const auto& pl : e.labels) {
            json jl;
            jl["bbox"] = {pl.box.x1, pl.box.y1, pl.box.x2, pl.box.y2};
            jl["category"] = pl.category;
            jl["prob"] = pl.prob;
            labels.push_back(jl);
        }
        je["labels"] = labels;
        ents.push_back(je);
    }
    j["entries"] = ents;
    json idx = json::object();
    for (const auto& [cat, ids] : index_) idx[std::to_string(cat)] = ids;
    j["index"] = idx;
    j["overwrites"] = overwrites_;
    return j.dump(2);
}

LabelQueue LabelQueue::from_snapshot(const std::string& text) {
    json j = json::parse(text);
    LabelQueue q;
    for (const auto& je : j.at("entries")) {
        QueueEntry e;
        e.image_id = je.at("image_id").get<std::string>();
        e.image_path = je.at("image_path").get<std::string>();
        e.version = je.at("version").get<int64_t>();
        for (const auto& jl : je.at("labels")) {
            PseudoLabel pl;
            auto& b = jl.at("bbox");
            pl.box = BBox(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>());
            pl.category = jl.at("category").get<int>();
            pl.prob = jl.at("prob").get<double>();
            e.labels.push_back(pl);
        }
        q.index_entry(e);
        q.entries_.emplace(e.image_id, std::move(e));
    }
    q.overwrites_ = j.at("overwrites").get<int64_t>();
    return q;
}

} // namespace ovd
