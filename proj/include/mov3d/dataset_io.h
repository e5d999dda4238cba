#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mov3d/datagen.h"

namespace mov3d {

struct ManifestEntry {
    std::string id;
    Split split = Split::train;
    std::uint64_t seed = 0;
    std::string scene;  // empty for single-view samples
};

// <dir>/frames/NNN.pgm, spectrograms/NNN.spg, boxes.csv, voxels.vxg, audio.wav, meta.txt
void write_sample(const std::filesystem::path& dir, const Sample& s);
Sample read_sample(const std::filesystem::path& dir);

// <root>/manifest names every sample; samples live in <root>/samples/<id>/.
void write_manifest(const std::filesystem::path& root, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& root);

struct Dataset {
    std::vector<ManifestEntry> entries;
    std::vector<Sample> samples;

    std::vector<const Sample*> split(Split s) const;
};

Dataset read_dataset(const std::filesystem::path& root);

}  // namespace mov3d
