#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mov3d/audio.h"
#include "mov3d/image.h"
#include "mov3d/signal.h"
#include "mov3d/voxel.h"

namespace mov3d {

enum class ShapeKind { solid_box, hollow_box, sphere, shell_sphere, l_beam, table_like };

inline constexpr std::array<ShapeKind, 6> kAllShapes = {ShapeKind::solid_box, ShapeKind::hollow_box,
                                                        ShapeKind::sphere,    ShapeKind::shell_sphere,
                                                        ShapeKind::l_beam,    ShapeKind::table_like};

std::string_view shape_name(ShapeKind kind);
std::optional<ShapeKind> parse_shape(std::string_view name);

inline constexpr double kWallThickness = 2.0;  // voxels, hollow variants

// Binary grid centered in the 30^3 volume, outer extent 30 * size_scale.
// size_scale must lie in (0.3, 1].
VoxelGrid gen_shape(ShapeKind kind, double size_scale);

struct ObjectSpec {
    ShapeKind shape = ShapeKind::solid_box;
    double size_scale = 0.5;
    Material material = Material::granite;
    double x = 96.0;   // sprite center, pixels
    double y = 72.0;
    double vx = 0.0;   // pixels per second
    double vy = 0.0;
    double yaw = 0.0;  // radians about the height axis
    double spin = 0.0; // radians per second
};

struct SceneConfig {
    std::vector<ObjectSpec> objects;
    std::size_t frame_count = 10;
    double fps = kDefaultVideoFps;
    std::size_t frame_width = 192;
    std::size_t frame_height = 144;
    std::size_t pixels_per_voxel = 2;
    double gravity = 0.0;          // pixels per second^2, +y is down
    double gain_per_speed = 1e-3;  // impulse gain per pixel/s of normal speed
    double impact_seconds = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

// Everything the networks see for one object, plus its targets.
struct Sample {
    std::string id;
    std::vector<Image> frames;              // 88 x 88, values in [0, 1]
    std::vector<Spectrogram> spectrograms;  // one per frame
    std::vector<Box> boxes;                 // frame coordinates
    VoxelGrid voxels;
    Material material = Material::granite;
    ShapeKind shape = ShapeKind::solid_box;
    double size_scale = 1.0;
    AudioClip track;                        // unmixed audio
    std::vector<double> impact_times;       // seconds

    std::size_t frame_count() const { return frames.size(); }
};

struct Scene {
    std::vector<Sample> objects;
    AudioClip mixed;
};

// Frame n shows time n / fps; an object's track covers every 0.03 s window.
std::size_t scene_track_samples(const SceneConfig& cfg);
Scene gen_scene_sequence(const SceneConfig& cfg);
// Random object specs (1 to 3 objects) drawn from `seed`.
SceneConfig random_scene_config(std::uint64_t seed, std::size_t objects, std::size_t frame_count);

// Every stride-th frame, `window` frames per sequence, windows advancing by one frame.
std::vector<Sample> augment_windows(const Sample& seq, std::size_t stride, std::size_t window = 10);

struct SingleViewSpec {
    ShapeKind shape = ShapeKind::solid_box;
    double size_scale = 1.0;
    Material material = Material::granite;
    View view = View::front();
    double impact_gain = 0.5;
};

// One silhouette, one 3 s impact spectrogram, voxel target.
Sample gen_single_view(const SingleViewSpec& spec);

// Hollow/solid pairs with identical silhouettes. Solid objects are granite or
// marble, hollow ones slate or oak, so only the audio reveals the interior.
std::vector<SingleViewSpec> ablation_specs(std::size_t count, std::uint64_t seed);
// Any shape and material, front or yawed views.
std::vector<SingleViewSpec> random_single_view_specs(std::size_t count, std::uint64_t seed);

enum class Split { train, val, test };
std::string_view split_name(Split s);
// 80/10/10 partition keyed on a hash of the sample seed.
Split split_of(std::uint64_t sample_seed);
// Seed of the index-th item of a run.
std::uint64_t sample_seed(std::uint64_t run_seed, std::size_t index);

}  // namespace mov3d
