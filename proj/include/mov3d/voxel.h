#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "mov3d/audio.h"
#include "mov3d/image.h"
#include "mov3d/io.h"

namespace mov3d {

inline constexpr std::size_t kVoxelRes = 30;
inline constexpr std::size_t kVoxelCount = kVoxelRes * kVoxelRes * kVoxelRes;
inline constexpr std::size_t kImageSize = 88;

// Axes: i = depth (front to back), j = height (bottom to top), k = width.
struct VoxelGrid {
    std::vector<float> occupancy = std::vector<float>(kVoxelCount, 0.0f);
    std::optional<Material> material;

    static std::size_t index(std::size_t i, std::size_t j, std::size_t k) { return (i * kVoxelRes + j) * kVoxelRes + k; }
    float& at(std::size_t i, std::size_t j, std::size_t k) { return occupancy[index(i, j, k)]; }
    float at(std::size_t i, std::size_t j, std::size_t k) const { return occupancy[index(i, j, k)]; }

    std::size_t occupied_count() const;
    bool is_binary() const;
    // Throws ValidationError on a wrong size or value outside [0, 1].
    void validate() const;
    bool operator==(const VoxelGrid&) const = default;
};

// Jaccard index of {p > t} against {y = 1}; 1 when both sets are empty.
double iou(const VoxelGrid& pred, const VoxelGrid& gt, double threshold);
VoxelGrid binarize(const VoxelGrid& grid, double threshold);

enum class ViewKind { front, side, top, rotated };

struct View {
    ViewKind kind = ViewKind::front;
    double angle = 0.0;  // radians about the height axis, rotated views only

    static View front() { return {ViewKind::front, 0.0}; }
    static View side() { return {ViewKind::side, 0.0}; }
    static View top() { return {ViewKind::top, 0.0}; }
    static View rotated(double radians) { return {ViewKind::rotated, radians}; }
};

// Projection plane before fitting: 30 x 30 for axis views; rotated views
// widen to 44 columns so any yaw keeps the grid in frame.
Image project_plane(const VoxelGrid& grid, const View& view);
Image project_silhouette(const VoxelGrid& grid, const View& view, std::size_t out_size = kImageSize);

// "VXG1" | u8 material (0-3, 255 = none) | 27000 f32
Bytes encode_voxels(const VoxelGrid& grid);
VoxelGrid decode_voxels(std::span<const std::uint8_t> bytes);
void write_voxels(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_voxels(const std::filesystem::path& path);

}  // namespace mov3d
