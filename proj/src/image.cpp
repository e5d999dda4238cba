#include "mov3d/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "mov3d/error.h"

namespace mov3d {

Box foreground_box(const Image& img) {
    long r0 = static_cast<long>(img.height), r1 = -1, c0 = static_cast<long>(img.width), c1 = -1;
    for (std::size_t r = 0; r < img.height; ++r) {
        for (std::size_t c = 0; c < img.width; ++c) {
            if (img.at(r, c) > 0.0f) {
                r0 = std::min(r0, static_cast<long>(r));
                r1 = std::max(r1, static_cast<long>(r));
                c0 = std::min(c0, static_cast<long>(c));
                c1 = std::max(c1, static_cast<long>(c));
            }
        }
    }
    if (r1 < 0) return {};
    return {c0, r0, c1 - c0 + 1, r1 - r0 + 1};
}

Image crop(const Image& img, const Box& box) {
    if (box.w <= 0 || box.h <= 0) throw ValidationError("crop: empty box");
    if (box.x < 0 || box.y < 0 || box.x + box.w > static_cast<long>(img.width) ||
        box.y + box.h > static_cast<long>(img.height)) {
        throw ValidationError("crop: box outside image");
    }
    Image out(static_cast<std::size_t>(box.w), static_cast<std::size_t>(box.h));
    for (std::size_t r = 0; r < out.height; ++r) {
        for (std::size_t c = 0; c < out.width; ++c) {
            out.at(r, c) = img.at(r + static_cast<std::size_t>(box.y), c + static_cast<std::size_t>(box.x));
        }
    }
    return out;
}

Image fit_to_square(const Image& img, std::size_t out) {
    Image dst(out, out);
    if (img.empty()) return dst;
    const double scale = static_cast<double>(out) / static_cast<double>(std::max(img.width, img.height));
    const auto w = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(img.width * scale)), 1, out);
    const auto h = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(img.height * scale)), 1, out);
    const std::size_t off_c = (out - w) / 2, off_r = (out - h) / 2;
    for (std::size_t r = 0; r < h; ++r) {
        const auto sr = std::min(img.height - 1, static_cast<std::size_t>((r + 0.5) * img.height / h));
        for (std::size_t c = 0; c < w; ++c) {
            const auto sc = std::min(img.width - 1, static_cast<std::size_t>((c + 0.5) * img.width / w));
            dst.at(r + off_r, c + off_c) = img.at(sr, sc);
        }
    }
    return dst;
}

Bytes encode_pgm(const Image& img) {
    std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    Bytes out(header.begin(), header.end());
    for (float v : img.pixels) {
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    }
    return out;
}

Image decode_pgm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
        if (t.empty()) throw FormatError("pgm: truncated header");
        return t;
    };
    if (token() != "P5") throw FormatError("pgm: bad magic");
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(token());
        h = std::stoul(token());
        maxval = std::stoul(token());
    } catch (const std::logic_error&) {
        throw FormatError("pgm: malformed header");
    }
    if (maxval == 0 || maxval > 255 || w == 0 || h == 0) throw FormatError("pgm: unsupported header");
    ++pos;
    if (bytes.size() - std::min(pos, bytes.size()) != w * h) throw FormatError("pgm: truncated pixel data");
    Image img(w, h);
    for (std::size_t i = 0; i < w * h; ++i) img.pixels[i] = static_cast<float>(bytes[pos + i]) / static_cast<float>(maxval);
    return img;
}

void write_pgm(const std::filesystem::path& path, const Image& img) { write_file_atomic(path, encode_pgm(img)); }

Image read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }

}  // namespace mov3d
