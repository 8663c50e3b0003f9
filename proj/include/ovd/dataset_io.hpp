#pragma once

#include <string>
#include <vector>

#include "ovd/geometry.hpp"

namespace ovd {

// One split = one JSON manifest listing image metadata plus PNG files next
// to it. Manifests round-trip bit-exactly (ordered keys, exact doubles).
struct Dataset {
    std::vector<ImageRecord> records;
    std::string root; // directory the image paths are relative to
};

void write_manifest(const std::string& path, const Dataset& ds, Split split);

// Loads a manifest; when `load_pixels` is set the PNGs are read as well.
Dataset read_manifest(const std::string& path, bool load_pixels = true);

// Annotation sidecars (e.g. hidden ground truth for unlabeled images),
// keyed by image_id.
void write_annotation_sidecar(const std::string& path, const std::vector<ImageRecord>& records);
std::vector<std::pair<std::string, std::vector<Annotation>>> read_annotation_sidecar(const std::string& path);

} // namespace ovd
