#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include "mov3d/audio.h"
#include "mov3d/io.h"

namespace mov3d {

struct StftConfig {
    std::size_t window_length = 256;  // N
    std::size_t hop = 44;             // H, 0 < H <= N

    void validate() const;
    // w(n) = 0.5 (1 - cos(2 pi n / (N - 1)))
    std::vector<double> window() const;
    // M = floor((L - N) / H) + 1 for a clip of L samples (L >= N).
    std::size_t frame_count(std::size_t samples) const;
};

// Complex STFT coefficients, frame-major: value(m, k) = values[m * bins + k].
struct StftResult {
    std::size_t bins = 0;  // N/2 + 1
    std::size_t frames = 0;
    std::size_t window_length = 0;
    double sample_rate = kDefaultSampleRate;
    std::vector<std::complex<double>> values;

    const std::complex<double>& at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
};

// X(m, k) = sum_{n=0}^{N-1} x(n + mH) w(n) exp(-2 pi i k n / N), k <= N/2.
StftResult stft(const AudioClip& clip, const StftConfig& cfg);

inline constexpr std::size_t kMelBins = 64;
inline constexpr std::size_t kSpectrogramFrames = 25;
inline constexpr double kDbFloor = -80.0;

// Log-power mel spectrogram, mel-major: value(b, t) = values[b * frames + t].
struct Spectrogram {
    std::size_t mels = kMelBins;
    std::size_t frames = kSpectrogramFrames;
    double mel_low = 20.0;   // Hz
    double mel_high = 22050.0;
    std::vector<float> values;

    float at(std::size_t mel, std::size_t frame) const { return values[mel * frames + frame]; }
    double mean() const;
    // Maps dB in [floor, floor + 160] onto [0, 1] for the audio encoder.
    std::vector<double> unit_scaled() const;
    static Spectrogram silent();
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filterbank weights [n_mels x bins] on the FFT bin grid.
std::vector<double> mel_filterbank(std::size_t n_mels, std::size_t bins, std::size_t window_length,
                                   double sample_rate, double f_low, double f_high);

// Mel filterbank on |X|^2, 10 log10 with an -80 dB floor, time axis cut or
// padded with floor values to exactly 25 frames. f_high <= 0 selects
// sample_rate / 2.
Spectrogram mel_spectrogram(const StftResult& stft_out, std::size_t n_mels = kMelBins, double f_low = 20.0,
                            double f_high = 0.0);

enum class SegmentMode { single, multi };

inline constexpr double kSingleFrameSeconds = 3.0;
inline constexpr double kMultiFrameSeconds = 0.03;
inline constexpr double kMultiFrameHopSeconds = 0.0225;  // 25% overlap
inline constexpr double kDefaultVideoFps = 1.0 / kMultiFrameHopSeconds;
inline constexpr std::size_t kSingleWindowLength = 4096;
inline constexpr std::size_t kMultiWindowLength = 256;
inline constexpr std::size_t kMultiHop = 44;

// Sample offset of the multi-mode window aligned with video frame n.
std::size_t multi_window_start(std::size_t frame, double video_fps, double sample_rate);
std::size_t multi_window_samples(double sample_rate);

// single: one spectrogram of the first 3 s (zero-padded when shorter).
// multi: one 0.03 s window per video frame timestamp n / video_fps for every
// window that fits inside the track; a track shorter than one window yields
// a single zero-padded window.
std::vector<Spectrogram> segment_audio(const AudioClip& track, SegmentMode mode,
                                       double video_fps = kDefaultVideoFps);
Spectrogram spectrogram_of_window(const AudioClip& window, SegmentMode mode);

// "SPG1" | u32 mels | u32 frames | f32 mel_low | f32 mel_high | mels*frames f32
Bytes encode_spectrogram(const Spectrogram& s);
Spectrogram decode_spectrogram(std::span<const std::uint8_t> bytes);
void write_spectrogram(const std::filesystem::path& path, const Spectrogram& s);
Spectrogram read_spectrogram(const std::filesystem::path& path);
// One CSV row per mel bin, one column per frame.
std::string spectrogram_csv(const Spectrogram& s);

}  // namespace mov3d
