#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mov3d/io.h"

namespace mov3d {

enum class Material : std::uint8_t { granite = 0, slate = 1, oak = 2, marble = 3 };

inline constexpr std::size_t kMaterialCount = 4;
inline constexpr std::array<Material, kMaterialCount> kAllMaterials = {Material::granite, Material::slate,
                                                                        Material::oak, Material::marble};

std::string_view material_name(Material m);
std::optional<Material> parse_material(std::string_view name);

inline constexpr double kDefaultSampleRate = 44100.0;
inline constexpr double kMinModeFrequency = 20.0;
inline constexpr double kMaxModeFrequency = 20000.0;
inline constexpr std::size_t kMaxModes = 64;

// One damped sinusoid a e^{-d t} sin(2 pi f t + theta).
struct Mode {
    double frequency = 0.0;  // Hz
    double damping = 0.0;    // 1/s
    double amplitude = 0.0;
    double phase = 0.0;      // radians in [0, 2 pi)
};

struct ModalModel {
    std::vector<Mode> modes;  // sorted ascending by frequency
    Material material = Material::granite;

    // Throws ValidationError when a mode or the mode list breaks its invariants.
    void validate() const;
};

struct AudioClip {
    std::vector<double> samples;
    double sample_rate = kDefaultSampleRate;
    // Factor already applied by peak normalization (1 when untouched), so
    // samples / normalization recovers the raw signal.
    double normalization = 1.0;

    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
    double peak() const;
};

// Scales samples so the peak is exactly 1 when it exceeds 1; records the factor.
void peak_normalize(AudioClip& clip);

// samples[n] = gain * sum_i a_i e^{-d_i t} sin(2 pi f_i t + theta_i), t = n / rate,
// followed by peak normalization.
AudioClip synthesize_impact(const ModalModel& model, double impulse_gain, double duration,
                            double sample_rate = kDefaultSampleRate);

// Rows of the modal table file, keyed by material.
struct ModalTable {
    std::array<std::vector<Mode>, kMaterialCount> base_modes;

    const std::vector<Mode>& modes(Material m) const { return base_modes[static_cast<std::size_t>(m)]; }
};

// Parses "material mode_index frequency damping amplitude" rows; '#' starts a comment.
ModalTable parse_modal_table(std::string_view text);
const ModalTable& builtin_modal_table();

// Table lookup with frequencies scaled by 1/size_scale.
ModalModel material_modal_params(Material material, double size_scale);
ModalModel material_modal_params(const ModalTable& table, Material material, double size_scale);

// Sums the raw (pre-normalization) signals of `clips`, each delayed by its
// offset in seconds, then peak-normalizes the result.
AudioClip mix_tracks(const std::vector<AudioClip>& clips, const std::vector<double>& offsets);

// 16-bit PCM mono RIFF/WAVE.
Bytes encode_wav(const AudioClip& clip);
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);
AudioClip read_wav(const std::filesystem::path& path);

}  // namespace mov3d
