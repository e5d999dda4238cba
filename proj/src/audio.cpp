#include "mov3d/audio.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mov3d/error.h"

namespace mov3d {

namespace detail {
extern const std::string_view kBuiltinModalTable;
}

std::string_view material_name(Material m) {
    switch (m) {
        case Material::granite: return "granite";
        case Material::slate: return "slate";
        case Material::oak: return "oak";
        case Material::marble: return "marble";
    }
    return "unknown";
}

std::optional<Material> parse_material(std::string_view name) {
    for (auto m : kAllMaterials) {
        if (material_name(m) == name) return m;
    }
    return std::nullopt;
}

void ModalModel::validate() const {
    if (modes.empty() || modes.size() > kMaxModes) {
        throw ValidationError("modal model needs 1.." + std::to_string(kMaxModes) + " modes, got " +
                              std::to_string(modes.size()));
    }
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const Mode& m = modes[i];
        if (!(m.frequency >= kMinModeFrequency && m.frequency <= kMaxModeFrequency)) {
            throw ValidationError("mode frequency " + std::to_string(m.frequency) + " Hz outside audible range");
        }
        if (!(m.damping >= 0.0) || !(m.amplitude >= 0.0)) {
            throw ValidationError("mode damping and amplitude must be non-negative");
        }
        if (!(m.phase >= 0.0 && m.phase < 2.0 * std::numbers::pi)) {
            throw ValidationError("mode phase must lie in [0, 2pi)");
        }
        if (i > 0 && modes[i - 1].frequency > m.frequency) throw ValidationError("modes must be sorted by frequency");
    }
}

double AudioClip::peak() const {
    double p = 0.0;
    for (double s : samples) p = std::max(p, std::abs(s));
    return p;
}

void peak_normalize(AudioClip& clip) {
    const double p = clip.peak();
    if (p <= 1.0) return;
    const double factor = 1.0 / p;
    for (auto& s : clip.samples) s *= factor;
    clip.normalization *= factor;
}

AudioClip synthesize_impact(const ModalModel& model, double impulse_gain, double duration, double sample_rate) {
    model.validate();
    if (!(duration > 0.0)) throw ValidationError("impact duration must be positive");
    if (!(sample_rate > 0.0)) throw ValidationError("sample rate must be positive");
    if (!(impulse_gain >= 0.0)) throw ValidationError("impulse gain must be non-negative");
    for (const auto& m : model.modes) {
        if (2.0 * m.frequency > sample_rate) {
            throw ValidationError("mode at " + std::to_string(m.frequency) + " Hz exceeds Nyquist for " +
                                  std::to_string(sample_rate) + " Hz sampling");
        }
    }
    AudioClip clip;
    clip.sample_rate = sample_rate;
    const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
    clip.samples.assign(n, 0.0);
    if (impulse_gain == 0.0) return clip;
    for (const auto& m : model.modes) {
        const double w = 2.0 * std::numbers::pi * m.frequency;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / sample_rate;
            clip.samples[i] += m.amplitude * std::exp(-m.damping * t) * std::sin(w * t + m.phase);
        }
    }
    for (auto& s : clip.samples) s *= impulse_gain;
    peak_normalize(clip);
    return clip;
}

ModalTable parse_modal_table(std::string_view text) {
    ModalTable table;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    std::array<std::vector<std::pair<int, Mode>>, kMaterialCount> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::string name;
        if (!(fields >> name)) continue;
        int index = 0;
        Mode mode;
        if (!(fields >> index >> mode.frequency >> mode.damping >> mode.amplitude)) {
            throw ValidationError("modal table line " + std::to_string(line_no) + ": expected 5 columns");
        }
        auto material = parse_material(name);
        if (!material) throw ValidationError("modal table line " + std::to_string(line_no) + ": unknown material " + name);
        rows[static_cast<std::size_t>(*material)].emplace_back(index, mode);
    }
    for (std::size_t m = 0; m < kMaterialCount; ++m) {
        auto& r = rows[m];
        std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto& [idx, mode] : r) table.base_modes[m].push_back(mode);
        if (table.base_modes[m].empty()) {
            throw ValidationError("modal table has no modes for " + std::string(material_name(kAllMaterials[m])));
        }
    }
    return table;
}

const ModalTable& builtin_modal_table() {
    static const ModalTable table = parse_modal_table(detail::kBuiltinModalTable);
    return table;
}

ModalModel material_modal_params(Material material, double size_scale) {
    return material_modal_params(builtin_modal_table(), material, size_scale);
}

ModalModel material_modal_params(const ModalTable& table, Material material, double size_scale) {
    if (!(size_scale > 0.0 && size_scale <= 1.0)) throw ValidationError("size_scale must lie in (0, 1]");
    ModalModel model;
    model.material = material;
    model.modes = table.modes(material);
    for (auto& m : model.modes) m.frequency /= size_scale;
    std::sort(model.modes.begin(), model.modes.end(),
              [](const Mode& a, const Mode& b) { return a.frequency < b.frequency; });
    return model;
}

AudioClip mix_tracks(const std::vector<AudioClip>& clips, const std::vector<double>& offsets) {
    if (clips.size() != offsets.size()) throw ValidationError("mix_tracks: one offset per clip required");
    AudioClip out;
    if (clips.empty()) return out;
    out.sample_rate = clips.front().sample_rate;
    std::vector<std::size_t> starts(clips.size());
    std::size_t length = 0;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        if (clips[i].sample_rate != out.sample_rate) throw ValidationError("mix_tracks: mismatched sample rates");
        if (!(offsets[i] >= 0.0)) throw ValidationError("mix_tracks: offsets must be non-negative");
        starts[i] = static_cast<std::size_t>(std::llround(offsets[i] * out.sample_rate));
        length = std::max(length, starts[i] + clips[i].samples.size());
    }
    out.samples.assign(length, 0.0);
    for (std::size_t i = 0; i < clips.size(); ++i) {
        const double undo = 1.0 / clips[i].normalization;
        for (std::size_t n = 0; n < clips[i].samples.size(); ++n) {
            out.samples[starts[i] + n] += clips[i].samples[n] * undo;
        }
    }
    peak_normalize(out);
    return out;
}

}  // namespace mov3d
