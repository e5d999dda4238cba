#include <algorithm>
#include <cmath>

#include "mov3d/audio.h"
#include "mov3d/error.h"

namespace mov3d {

namespace {
constexpr double kPcmScale = 32767.0;
}

Bytes encode_wav(const AudioClip& clip) {
    const auto rate = static_cast<std::uint32_t>(std::llround(clip.sample_rate));
    const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
    ByteWriter w;
    w.raw("RIFF");
    w.u32(36 + data_bytes);
    w.raw("WAVE");
    w.raw("fmt ");
    w.u32(16);
    w.u16(1);  // PCM
    w.u16(1);  // mono
    w.u32(rate);
    w.u32(rate * 2);
    w.u16(2);
    w.u16(16);
    w.raw("data");
    w.u32(data_bytes);
    for (double s : clip.samples) {
        const double q = std::round(std::clamp(s, -1.0, 1.0) * kPcmScale);
        w.i16(static_cast<std::int16_t>(q));
    }
    return w.take();
}

AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "wav");
    r.expect_magic("RIFF");
    r.u32();
    r.expect_magic("WAVE");
    AudioClip clip;
    bool have_fmt = false;
    while (!r.done()) {
        const std::string id = r.raw(4);
        const std::uint32_t size = r.u32();
        if (id == "fmt ") {
            if (size < 16) throw FormatError("wav: short fmt chunk");
            const auto format = r.u16();
            const auto channels = r.u16();
            clip.sample_rate = r.u32();
            r.u32();
            r.u16();
            const auto bits = r.u16();
            if (format != 1 || channels != 1 || bits != 16) throw FormatError("wav: only 16-bit PCM mono is supported");
            r.raw(size - 16);
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
            if (size % 2 != 0 || size > r.remaining()) throw FormatError("wav: truncated data chunk");
            clip.samples.resize(size / 2);
            for (auto& s : clip.samples) s = static_cast<double>(r.i16()) / kPcmScale;
            return clip;
        } else {
            r.raw(size + (size & 1));
        }
    }
    throw FormatError("wav: missing data chunk");
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) { write_file_atomic(path, encode_wav(clip)); }

AudioClip read_wav(const std::filesystem::path& path) { return decode_wav(read_file(path)); }

}  // namespace mov3d
