#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "mov3d/io.h"

namespace mov3d {

// Grayscale image, row-major, values in [0, 1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), pixels(w * h, fill) {}

    float& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
    float at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
    bool empty() const { return pixels.empty(); }
};

struct Box {
    long x = 0;  // column of the left edge
    long y = 0;  // row of the top edge
    long w = 0;
    long h = 0;

    bool operator==(const Box&) const = default;
};

// Tight box around pixels > 0; a zero-area box when the image is blank.
Box foreground_box(const Image& img);
Image crop(const Image& img, const Box& box);
// Nearest-neighbour resize into out x out, aspect preserved and centered on a
// zero background.
Image fit_to_square(const Image& img, std::size_t out);

// Binary 8-bit PGM (P5, maxval 255).
Bytes encode_pgm(const Image& img);
Image decode_pgm(std::span<const std::uint8_t> bytes);
void write_pgm(const std::filesystem::path& path, const Image& img);
Image read_pgm(const std::filesystem::path& path);

}  // namespace mov3d
