#pragma once

#include <string>
#include <vector>

namespace ovd {

// Category vocabulary with a disjoint base/novel partition.
struct Vocabulary {
    std::vector<std::string> names;
    std::vector<int> base_ids;
    std::vector<int> novel_ids;

    int size() const { return static_cast<int>(names.size()); }
    bool is_novel(int category) const;

    // Throws unless base_ids and novel_ids are disjoint and cover all indices.
    void validate() const;
};

void write_vocabulary(const std::string& path, const Vocabulary& vocab);
Vocabulary read_vocabulary(const std::string& path);

// Unit-norm prototype vector.
struct SemanticEmbedding {
    std::vector<double> vector;

    double norm() const;
    double dot(const SemanticEmbedding& o) const;
};

// "a photo of {name}" per category, order preserving. Throws on empty input.
std::vector<std::string> build_prompts(const Vocabulary& vocab);

// Frozen text encoder stand-in: a deterministic pseudo-random unit vector
// keyed by the prompt string. The same (prompt, seed, dim) always yields the
// same embedding, so the detector head and the crop teacher share one table.
class HashTextEncoder {
public:
    HashTextEncoder(int dim, uint64_t seed) : dim_(dim), seed_(seed) {}

    SemanticEmbedding encode(const std::string& prompt) const;
    int dim() const { return dim_; }
    uint64_t seed() const { return seed_; }

private:
    int dim_;
    uint64_t seed_;
};

std::vector<SemanticEmbedding> encode_vocabulary(const std::vector<std::string>& prompts,
                                                 const HashTextEncoder& encoder);

// Round-trip exact snapshot of an embedding table.
void write_embeddings(const std::string& path, const std::vector<SemanticEmbedding>& table);
std::vector<SemanticEmbedding> read_embeddings(const std::string& path);

} // namespace ovd
