#include "mov3d/signal.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mov3d/error.h"

namespace mov3d {

namespace {

using cplx = std::complex<double>;

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

// In-place iterative radix-2 FFT, forward sign convention.
void fft_radix2(std::vector<cplx>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                // Twiddles evaluated directly rather than by recurrence to
                // keep the error flat across large transforms.
                const cplx w(std::cos(angle * static_cast<double>(k)), std::sin(angle * static_cast<double>(k)));
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

void dft_direct(std::vector<cplx>& a, std::size_t bins) {
    const std::size_t n = a.size();
    std::vector<cplx> out(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        cplx acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            acc += a[t] * cplx(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    a = std::move(out);
}

}  // namespace

void StftConfig::validate() const {
    if (window_length < 2) throw ValidationError("STFT window length must be >= 2");
    if (hop == 0 || hop > window_length) throw ValidationError("STFT hop must satisfy 0 < H <= N");
}

std::vector<double> StftConfig::window() const {
    std::vector<double> w(window_length);
    const double denom = static_cast<double>(window_length - 1);
    for (std::size_t n = 0; n < window_length; ++n) {
        w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom));
    }
    // cos(2 pi) is not exactly 1 in floating point.
    w.front() = 0.0;
    w.back() = 0.0;
    return w;
}

std::size_t StftConfig::frame_count(std::size_t samples) const {
    if (samples < window_length) return 0;
    return (samples - window_length) / hop + 1;
}

namespace {

StftResult stft_frames(const AudioClip& clip, const StftConfig& cfg) {
    const std::size_t n = cfg.window_length;
    if (clip.samples.size() < n) {
        throw ValidationError("clip of " + std::to_string(clip.samples.size()) + " samples is shorter than one " +
                              std::to_string(n) + "-sample window");
    }
    StftResult out;
    out.bins = n / 2 + 1;
    out.frames = cfg.frame_count(clip.samples.size());
    out.window_length = n;
    out.sample_rate = clip.sample_rate;
    out.values.resize(out.bins * out.frames);
    const auto w = cfg.window();
    std::vector<cplx> buf(n);
    for (std::size_t m = 0; m < out.frames; ++m) {
        buf.assign(n, cplx(0.0));
        for (std::size_t t = 0; t < n; ++t) buf[t] = clip.samples[t + m * cfg.hop] * w[t];
        if (is_power_of_two(n)) {
            fft_radix2(buf);
        } else {
            dft_direct(buf, out.bins);
        }
        std::copy(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(out.bins),
                  out.values.begin() + static_cast<std::ptrdiff_t>(m * out.bins));
    }
    return out;
}

}  // namespace

StftResult stft(const AudioClip& clip, const StftConfig& cfg) {
    cfg.validate();
    return stft_frames(clip, cfg);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(std::size_t n_mels, std::size_t bins, std::size_t window_length,
                                   double sample_rate, double f_low, double f_high) {
    const double m_lo = hz_to_mel(f_low), m_hi = hz_to_mel(f_high);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
    }
    std::vector<double> fb(n_mels * bins, 0.0);
    for (std::size_t b = 0; b < n_mels; ++b) {
        const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / static_cast<double>(window_length);
            const double rise = (f - lo) / (mid - lo);
            const double fall = (hi - f) / (hi - mid);
            fb[b * bins + k] = std::max(0.0, std::min(rise, fall));
        }
    }
    return fb;
}

Spectrogram mel_spectrogram(const StftResult& stft_out, std::size_t n_mels, double f_low, double f_high) {
    if (f_high <= 0.0) f_high = stft_out.sample_rate / 2.0;
    if (stft_out.bins < n_mels) throw ValidationError("mel_spectrogram: fewer STFT bins than mel bins");
    const auto fb = mel_filterbank(n_mels, stft_out.bins, stft_out.window_length, stft_out.sample_rate, f_low, f_high);
    Spectrogram s;
    s.mels = n_mels;
    s.frames = kSpectrogramFrames;
    s.mel_low = f_low;
    s.mel_high = f_high;
    s.values.assign(n_mels * s.frames, static_cast<float>(kDbFloor));
    const std::size_t used = std::min(stft_out.frames, s.frames);
    std::vector<double> power(stft_out.bins);
    for (std::size_t m = 0; m < used; ++m) {
        for (std::size_t k = 0; k < stft_out.bins; ++k) power[k] = std::norm(stft_out.at(m, k));
        for (std::size_t b = 0; b < n_mels; ++b) {
            double p = 0.0;
            for (std::size_t k = 0; k < stft_out.bins; ++k) p += fb[b * stft_out.bins + k] * power[k];
            const double db = p > 0.0 ? 10.0 * std::log10(p) : kDbFloor;
            s.values[b * s.frames + m] = static_cast<float>(std::max(db, kDbFloor));
        }
    }
    return s;
}

double Spectrogram::mean() const {
    double acc = 0.0;
    for (float v : values) acc += v;
    return values.empty() ? 0.0 : acc / static_cast<double>(values.size());
}

std::vector<double> Spectrogram::unit_scaled() const {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::clamp((static_cast<double>(values[i]) - kDbFloor) / 160.0, 0.0, 1.0);
    }
    return out;
}

Spectrogram Spectrogram::silent() {
    Spectrogram s;
    s.values.assign(s.mels * s.frames, static_cast<float>(kDbFloor));
    return s;
}

std::size_t multi_window_start(std::size_t frame, double video_fps, double sample_rate) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(frame) * sample_rate / video_fps));
}

std::size_t multi_window_samples(double sample_rate) {
    return static_cast<std::size_t>(std::llround(kMultiFrameSeconds * sample_rate));
}

Spectrogram spectrogram_of_window(const AudioClip& window, SegmentMode mode) {
    StftConfig cfg;
    if (mode == SegmentMode::single) {
        const auto len = static_cast<std::size_t>(std::llround(kSingleFrameSeconds * window.sample_rate));
        AudioClip padded = window;
        padded.samples.resize(len, 0.0);
        cfg.window_length = kSingleWindowLength;
        // 25 frames spread over 3 s: the hop exceeds the window, so frames leave gaps.
        cfg.hop = (len - cfg.window_length) / (kSpectrogramFrames - 1);
        return mel_spectrogram(stft_frames(padded, cfg));
    }
    AudioClip padded = window;
    padded.samples.resize(multi_window_samples(window.sample_rate), 0.0);
    cfg.window_length = kMultiWindowLength;
    cfg.hop = kMultiHop;
    return mel_spectrogram(stft(padded, cfg));
}

std::vector<Spectrogram> segment_audio(const AudioClip& track, SegmentMode mode, double video_fps) {
    if (track.samples.empty()) throw ValidationError("segment_audio: empty track");
    if (mode == SegmentMode::single) return {spectrogram_of_window(track, mode)};
    if (!(video_fps > 0.0)) throw ValidationError("segment_audio: video fps must be positive");
    const std::size_t len = multi_window_samples(track.sample_rate);
    std::vector<Spectrogram> out;
    for (std::size_t n = 0;; ++n) {
        const std::size_t start = multi_window_start(n, video_fps, track.sample_rate);
        if (start + len > track.samples.size()) break;
        AudioClip window;
        window.sample_rate = track.sample_rate;
        window.samples.assign(track.samples.begin() + static_cast<std::ptrdiff_t>(start),
                              track.samples.begin() + static_cast<std::ptrdiff_t>(start + len));
        out.push_back(spectrogram_of_window(window, mode));
    }
    if (out.empty()) out.push_back(spectrogram_of_window(track, mode));
    return out;
}

Bytes encode_spectrogram(const Spectrogram& s) {
    ByteWriter w;
    w.raw("SPG1");
    w.u32(static_cast<std::uint32_t>(s.mels));
    w.u32(static_cast<std::uint32_t>(s.frames));
    w.f32(static_cast<float>(s.mel_low));
    w.f32(static_cast<float>(s.mel_high));
    for (float v : s.values) w.f32(v);
    return w.take();
}

Spectrogram decode_spectrogram(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "spectrogram");
    r.expect_magic("SPG1");
    Spectrogram s;
    s.mels = r.u32();
    s.frames = r.u32();
    s.mel_low = r.f32();
    s.mel_high = r.f32();
    if (s.mels == 0 || s.frames == 0) throw FormatError("spectrogram: zero dimension");
    if (r.remaining() != s.mels * s.frames * 4) throw FormatError("spectrogram: payload size mismatch");
    s.values.resize(s.mels * s.frames);
    for (auto& v : s.values) v = r.f32();
    return s;
}

void write_spectrogram(const std::filesystem::path& path, const Spectrogram& s) {
    write_file_atomic(path, encode_spectrogram(s));
}

Spectrogram read_spectrogram(const std::filesystem::path& path) { return decode_spectrogram(read_file(path)); }

std::string spectrogram_csv(const Spectrogram& s) {
    std::ostringstream os;
    os.precision(9);
    for (std::size_t b = 0; b < s.mels; ++b) {
        for (std::size_t t = 0; t < s.frames; ++t) {
            if (t) os << ',';
            os << s.at(b, t);
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace mov3d
