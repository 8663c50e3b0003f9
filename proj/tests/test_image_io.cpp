#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ovd/dataset_io.hpp"
#include "ovd/image.hpp"
#include "ovd/rng.hpp"

using namespace ovd;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
    fs::path p = fs::temp_directory_path() / "ovd_test_io";
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}
} // namespace

TEST_CASE("png write-read round trip is exact on the 8-bit grid") {
    Image img(13, 9);
    Rng rng(42);
    for (double& v : img.data) v = rng.uniform();
    quantize_u8(img);
    fs::path p = temp_dir() / "rt.png";
    write_png(p.string(), img);
    Image back = read_png(p.string());
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("manifest round trip is bit exact") {
    fs::path dir = temp_dir();
    Dataset ds;
    ds.root = dir.string();
    Rng rng(3);
    for (int i = 0; i < 3; ++i) {
        ImageRecord r;
        r.image_id = "img_" + std::to_string(i);
        r.file = r.image_id + ".png";
        r.width = 8;
        r.height = 8;
        r.pixels = Image(8, 8, 0.25);
        quantize_u8(r.pixels);
        write_png((dir / r.file).string(), r.pixels);
        Annotation a;
        a.box = BBox(rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(4, 8), rng.uniform(4, 8));
        a.category = static_cast<int>(rng.uniform_int(5));
        if (i > 0) {
            a.score = rng.uniform();
            a.provenance = Provenance::ExternalPseudo;
        }
        r.annotations.push_back(a);
        ds.records.push_back(std::move(r));
    }
    fs::path m1 = dir / "manifest1.json";
    fs::path m2 = dir / "manifest2.json";
    write_manifest(m1.string(), ds, Split::Unlabeled);
    Dataset back = read_manifest(m1.string(), true);
    write_manifest(m2.string(), back, Split::Unlabeled);
    CHECK(slurp(m1) == slurp(m2));
    REQUIRE(back.records.size() == ds.records.size());
    for (size_t i = 0; i < ds.records.size(); ++i) {
        CHECK(back.records[i].image_id == ds.records[i].image_id);
        CHECK(back.records[i].annotations.size() == ds.records[i].annotations.size());
        for (size_t k = 0; k < ds.records[i].annotations.size(); ++k) {
            CHECK(back.records[i].annotations[k].box == ds.records[i].annotations[k].box);
            CHECK(back.records[i].annotations[k].category == ds.records[i].annotations[k].category);
        }
        CHECK(back.records[i].pixels.data == ds.records[i].pixels.data);
    }
}

TEST_CASE("annotation sidecar round trips") {
    fs::path dir = temp_dir();
    std::vector<ImageRecord> recs(2);
    recs[0].image_id = "u_0";
    recs[1].image_id = "u_1";
    Annotation a;
    a.box = BBox(1, 2, 3, 4);
    a.category = 4;
    recs[0].annotations.push_back(a);
    fs::path p = dir / "sidecar.json";
    write_annotation_sidecar(p.string(), recs);
    auto back = read_annotation_sidecar(p.string());
    REQUIRE(back.size() == 2);
    CHECK(back[0].first == "u_0");
    REQUIRE(back[0].second.size() == 1);
    CHECK(back[0].second[0].box == a.box);
    CHECK(back[1].second.empty());
}

TEST_CASE("bilinear sampling hits pixel centers exactly") {
    Image img(4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = x * 10 + y;
    CHECK(bilinear_sample(img, 2.5, 3.5, 0) == doctest::Approx(2 * 10 + 3));
    // midpoint between pixel 1 and 2 in x
    CHECK(bilinear_sample(img, 2.0, 0.5, 0) == doctest::Approx(15.0));
}
