#pragma once

#include <map>
#include <string>
#include <vector>

#include "ovd/external_teacher.hpp"
#include "ovd/rng.hpp"

namespace ovd {

struct QueueEntry {
    std::string image_id;
    std::string image_path;
    std::vector<PseudoLabel> labels; // non-empty
    int64_t version = 0;             // bumped on every overwrite
};

// Keyed pseudo-label store with overwrite-on-reinsert plus a category ->
// image-id index used for class-balanced sampling. Single writer.
class LabelQueue {
public:
    // Replaces any existing entry wholesale and re-derives the index for
    // this image. Throws on an empty label list.
    void push(const std::string& image_id, const std::string& image_path, std::vector<PseudoLabel> labels);

    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    int64_t overwrite_count() const { return overwrites_; }

    const QueueEntry* find(const std::string& image_id) const;

    // Class-balanced draws with replacement: uniform over classes with
    // non-empty lists, then uniform within the class's list. Empty queue
    // yields an empty result.
    std::vector<const QueueEntry*> sample(int n, Rng& rng) const;

    struct Stats {
        std::map<int, int> images_per_class;
        std::map<int, int> labels_per_class;
        size_t total_entries = 0;
        int64_t overwrites = 0;
    };
    Stats stats() const;

    const std::map<int, std::vector<std::string>>& index() const { return index_; }
    const std::map<std::string, QueueEntry>& entries() const { return entries_; }

    std::string snapshot() const;                     // deterministic JSON dump
    static LabelQueue from_snapshot(const std::string& json_text);

private:
    std::map<std::string, QueueEntry> entries_;
    std::map<int, std::vector<std::string>> index_; // sorted id lists, no duplicates
    int64_t overwrites_ = 0;

    void unindex(const QueueEntry& e);
    void index_entry(const QueueEntry& e);
};

} // namespace ovd
