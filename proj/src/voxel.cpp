#include "mov3d/voxel.h"

#include <cmath>

#include "mov3d/error.h"

namespace mov3d {

std::size_t VoxelGrid::occupied_count() const {
    std::size_t n = 0;
    for (float v : occupancy) n += v > 0.5f;
    return n;
}

bool VoxelGrid::is_binary() const {
    for (float v : occupancy) {
        if (v != 0.0f && v != 1.0f) return false;
    }
    return true;
}

void VoxelGrid::validate() const {
    if (occupancy.size() != kVoxelCount) throw ValidationError("voxel grid must hold 30^3 values");
    for (float v : occupancy) {
        if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("voxel occupancy outside [0, 1]");
    }
}

double iou(const VoxelGrid& pred, const VoxelGrid& gt, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("iou threshold must lie in (0, 1)");
    if (!gt.is_binary()) throw ValidationError("iou: ground truth must be binary");
    pred.validate();
    const auto t = static_cast<float>(threshold);
    std::size_t inter = 0, uni = 0;
    for (std::size_t n = 0; n < kVoxelCount; ++n) {
        const bool p = pred.occupancy[n] > t;
        const bool y = gt.occupancy[n] == 1.0f;
        inter += p && y;
        uni += p || y;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

VoxelGrid binarize(const VoxelGrid& grid, double threshold) {
    const auto t = static_cast<float>(threshold);
    VoxelGrid out;
    out.material = grid.material;
    for (std::size_t n = 0; n < kVoxelCount; ++n) out.occupancy[n] = grid.occupancy[n] > t ? 1.0f : 0.0f;
    return out;
}

Image project_plane(const VoxelGrid& grid, const View& view) {
    constexpr std::size_t R = kVoxelRes;
    auto occupied = [&](std::size_t i, std::size_t j, std::size_t k) { return grid.at(i, j, k) > 0.5f; };
    if (view.kind != ViewKind::rotated) {
        Image img(R, R);
        for (std::size_t i = 0; i < R; ++i) {
            for (std::size_t j = 0; j < R; ++j) {
                for (std::size_t k = 0; k < R; ++k) {
                    if (!occupied(i, j, k)) continue;
                    switch (view.kind) {
                        case ViewKind::front: img.at(R - 1 - j, k) = 1.0f; break;
                        case ViewKind::side: img.at(R - 1 - j, i) = 1.0f; break;
                        default: img.at(i, k) = 1.0f; break;
                    }
                }
            }
        }
        return img;
    }
    constexpr std::size_t W = 44;
    const double c = R / 2.0;
    const double half = W / 2.0;
    const double cs = std::cos(view.angle), sn = std::sin(view.angle);
    Image img(W, R);
    for (std::size_t u = 0; u < W; ++u) {
        const double a = (u + 0.5) - half;
        for (double t = 0.25 - half; t < half; t += 0.5) {
            const double k = std::floor(c + a * cs - t * sn);
            const double i = std::floor(c + a * sn + t * cs);
            if (k < 0 || i < 0 || k >= R || i >= R) continue;
            for (std::size_t j = 0; j < R; ++j) {
                if (occupied(static_cast<std::size_t>(i), j, static_cast<std::size_t>(k))) img.at(R - 1 - j, u) = 1.0f;
            }
        }
    }
    return img;
}

Image project_silhouette(const VoxelGrid& grid, const View& view, std::size_t out_size) {
    return fit_to_square(project_plane(grid, view), out_size);
}

Bytes encode_voxels(const VoxelGrid& grid) {
    grid.validate();
    ByteWriter w;
    w.raw("VXG1");
    w.u8(grid.material ? static_cast<std::uint8_t>(*grid.material) : 255);
    for (float v : grid.occupancy) w.f32(v);
    return w.take();
}

VoxelGrid decode_voxels(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "voxel grid");
    r.expect_magic("VXG1");
    VoxelGrid g;
    const auto m = r.u8();
    if (m < kMaterialCount) {
        g.material = static_cast<Material>(m);
    } else if (m != 255) {
        throw FormatError("voxel grid: unknown material byte " + std::to_string(m));
    }
    for (auto& v : g.occupancy) v = r.f32();
    if (!r.done()) throw FormatError("voxel grid: trailing bytes");
    return g;
}

void write_voxels(const std::filesystem::path& path, const VoxelGrid& grid) {
    write_file_atomic(path, encode_voxels(grid));
}

VoxelGrid read_voxels(const std::filesystem::path& path) { return decode_voxels(read_file(path)); }

}  // namespace mov3d
