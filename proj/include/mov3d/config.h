#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mov3d/datagen.h"
#include "mov3d/model.h"
#include "mov3d/signal.h"
#include "mov3d/training.h"

namespace mov3d {

enum class DataKind { scene, single, ablation };
std::string_view data_kind_name(DataKind k);

// Everything a pipeline command may read. One flat key=value file drives
// every command; keys a command does not use are still validated.
struct RunConfig {
    std::uint64_t seed = 1;

    // gen-data
    DataKind data_kind = DataKind::scene;
    std::size_t samples = 8;
    std::size_t objects = 1;
    std::size_t frames = 10;
    std::size_t window_stride = 0;  // 0: one window per track

    // inputs of later stages
    std::filesystem::path data_dir;
    std::filesystem::path pretrained;
    std::filesystem::path checkpoint;
    std::filesystem::path sample;
    std::filesystem::path predictions;
    std::filesystem::path audio;

    ModelConfig model;
    TrainConfig train;
    std::optional<Split> train_split = Split::train;  // empty: every sample
    std::optional<Split> split = Split::test;        // evaluated split

    // synth-audio / spectrogram
    Material material = Material::granite;
    ShapeKind shape = ShapeKind::solid_box;
    double size_scale = 1.0;
    double duration = 1.0;
    double gain = 0.5;
    SegmentMode segment = SegmentMode::multi;
};

// Blank lines and '#' comments are skipped. Unknown or repeated keys and
// malformed values raise ConfigParseError with the line number.
RunConfig parse_config(std::string_view text);
RunConfig read_config(const std::filesystem::path& path);

// Every key with its resolved value; parses back to the same config.
std::string format_config(const RunConfig& cfg);

const std::vector<std::string>& config_keys();

}  // namespace mov3d
