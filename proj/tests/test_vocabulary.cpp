#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ovd/vocabulary.hpp"

using namespace ovd;
namespace fs = std::filesystem;

namespace {
Vocabulary toy_vocab() {
    Vocabulary v;
    v.names = {"circle", "square", "triangle", "star", "cross"};
    v.base_ids = {0, 1, 2};
    v.novel_ids = {3, 4};
    return v;
}
} // namespace

TEST_CASE("prompt template and ordering") {
    Vocabulary v;
    v.names = {"airport"};
    v.base_ids = {0};
    auto p = build_prompts(v);
    REQUIRE(p.size() == 1);
    CHECK(p[0] == "a photo of airport");

    v.names = {"windmill", "harbor"};
    v.base_ids = {0, 1};
    p = build_prompts(v);
    REQUIRE(p.size() == 2);
    CHECK(p[0] == "a photo of windmill");
    CHECK(p[1] == "a photo of harbor");
}

TEST_CASE("empty vocabulary rejected") {
    Vocabulary v;
    CHECK_THROWS(build_prompts(v));
}

TEST_CASE("partition invariant enforced") {
    Vocabulary v = toy_vocab();
    CHECK_NOTHROW(v.validate());
    v.novel_ids = {2, 3, 4}; // overlaps base
    CHECK_THROWS(v.validate());
    v.novel_ids = {3}; // does not cover
    CHECK_THROWS(v.validate());
}

TEST_CASE("hash encoder is deterministic and unit norm") {
    HashTextEncoder enc(64, 1234);
    auto a = enc.encode("a photo of star");
    auto b = enc.encode("a photo of star");
    CHECK(a.vector == b.vector);
    CHECK(std::abs(a.norm() - 1.0) <= 1e-6);
}

TEST_CASE("vocabulary embeddings are spread out") {
    Vocabulary v = toy_vocab();
    HashTextEncoder enc(64, 20240401);
    auto table = encode_vocabulary(build_prompts(v), enc);
    REQUIRE(table.size() == v.names.size());
    for (const auto& e : table) CHECK(std::abs(e.norm() - 1.0) <= 1e-6);
    for (size_t i = 0; i < table.size(); ++i)
        for (size_t j = i + 1; j < table.size(); ++j) CHECK(std::abs(table[i].dot(table[j])) < 0.5);
}

TEST_CASE("vocabulary and embedding files round trip") {
    fs::path dir = fs::temp_directory_path() / "ovd_test_vocab";
    fs::create_directories(dir);
    Vocabulary v = toy_vocab();
    write_vocabulary((dir / "vocab.json").string(), v);
    Vocabulary back = read_vocabulary((dir / "vocab.json").string());
    CHECK(back.names == v.names);
    CHECK(back.base_ids == v.base_ids);
    CHECK(back.novel_ids == v.novel_ids);

    HashTextEncoder enc(32, 77);
    auto table = encode_vocabulary(build_prompts(v), enc);
    write_embeddings((dir / "emb.json").string(), table);
    auto tback = read_embeddings((dir / "emb.json").string());
    REQUIRE(tback.size() == table.size());
    for (size_t i = 0; i < table.size(); ++i) CHECK(tback[i].vector == table[i].vector);
}
