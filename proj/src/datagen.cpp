#include "mov3d/datagen.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mov3d/error.h"
#include "mov3d/layers.h"

namespace mov3d {

namespace {

constexpr std::array<std::string_view, 6> kShapeNames = {"solid_box",    "hollow_box", "sphere",
                                                         "shell_sphere", "l_beam",     "table_like"};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Sprite extents relative to the object center, in frame pixels.
struct Extent {
    double left = 0, right = 0, top = 0, bottom = 0;
};

struct Sprite {
    Image image;  // upscaled projection plane
    Extent extent;
};

Sprite make_sprite(const VoxelGrid& grid, double angle, std::size_t ppv) {
    const Image plane = project_plane(grid, View::rotated(angle));
    Sprite s;
    s.image = Image(plane.width * ppv, plane.height * ppv);
    for (std::size_t r = 0; r < s.image.height; ++r)
        for (std::size_t c = 0; c < s.image.width; ++c) s.image.at(r, c) = plane.at(r / ppv, c / ppv);
    const Box b = foreground_box(s.image);
    const double cx = static_cast<double>(s.image.width / 2), cy = static_cast<double>(s.image.height / 2);
    s.extent = {b.x - cx, b.x + b.w - cx, b.y - cy, b.y + b.h - cy};
    return s;
}

struct Body {
    double x, y, vx, vy;
    Extent extent;
};

void keep_inside(Body& b, double width, double height) {
    if (b.x + b.extent.left < 0) b.x = -b.extent.left;
    if (b.x + b.extent.right > width) b.x = width - b.extent.right;
    if (b.y + b.extent.top < 0) b.y = -b.extent.top;
    if (b.y + b.extent.bottom > height) b.y = height - b.extent.bottom;
}

// Pixel origin of a sprite centered at (x, y).
std::pair<long, long> sprite_origin(const Sprite& s, double x, double y) {
    return {std::lround(std::floor(x)) - static_cast<long>(s.image.width / 2),
            std::lround(std::floor(y)) - static_cast<long>(s.image.height / 2)};
}

}  // namespace

std::string_view shape_name(ShapeKind kind) { return kShapeNames[static_cast<std::size_t>(kind)]; }

std::optional<ShapeKind> parse_shape(std::string_view name) {
    for (std::size_t i = 0; i < kShapeNames.size(); ++i) {
        if (kShapeNames[i] == name) return static_cast<ShapeKind>(i);
    }
    return std::nullopt;
}

VoxelGrid gen_shape(ShapeKind kind, double size_scale) {
    if (!(size_scale > 0.3 && size_scale <= 1.0)) throw ValidationError("size_scale must lie in (0.3, 1]");
    const double h = 15.0 * size_scale;
    const double t = std::max(kWallThickness, 0.8 * h);
    const double slab = std::max(kWallThickness, 0.4 * h);
    VoxelGrid g;
    for (std::size_t i = 0; i < kVoxelRes; ++i) {
        const double pi = i + 0.5 - 15.0;
        for (std::size_t j = 0; j < kVoxelRes; ++j) {
            const double pj = j + 0.5 - 15.0;
            for (std::size_t k = 0; k < kVoxelRes; ++k) {
                const double pk = k + 0.5 - 15.0;
                const bool in_box = std::abs(pi) < h && std::abs(pj) < h && std::abs(pk) < h;
                const double r2 = pi * pi + pj * pj + pk * pk;
                bool on = false;
                switch (kind) {
                    case ShapeKind::solid_box: on = in_box; break;
                    case ShapeKind::hollow_box: {
                        const double c = h - kWallThickness;
                        on = in_box && !(std::abs(pi) < c && std::abs(pj) < c && std::abs(pk) < c);
                        break;
                    }
                    case ShapeKind::sphere: on = r2 <= h * h; break;
                    case ShapeKind::shell_sphere: {
                        const double inner = h - kWallThickness;
                        on = r2 <= h * h && r2 > inner * inner;
                        break;
                    }
                    case ShapeKind::l_beam: on = in_box && (pj < -h + t || pi < -h + t); break;
                    case ShapeKind::table_like:
                        on = in_box && (pj > h - slab || (std::abs(pi) > h - slab && std::abs(pk) > h - slab));
                        break;
                }
                if (on) g.at(i, j, k) = 1.0f;
            }
        }
    }
    return g;
}

void SceneConfig::validate() const {
    if (objects.empty() || objects.size() > 3) throw ConfigurationError("a scene holds 1 to 3 objects");
    if (!(fps > 0.0)) throw ConfigurationError("fps must be positive");
    if (frame_count < 10) throw ConfigurationError("frame_count must be at least 10");
    if (pixels_per_voxel == 0) throw ConfigurationError("pixels_per_voxel must be positive");
    if (!(impact_seconds > 0.0) || !(gain_per_speed >= 0.0)) throw ConfigurationError("bad impact parameters");
    for (const auto& o : objects) {
        if (!(o.size_scale > 0.3 && o.size_scale <= 1.0)) throw ConfigurationError("size_scale must lie in (0.3, 1]");
        const double side = std::ceil(30.0 * o.size_scale) * static_cast<double>(pixels_per_voxel);
        const double reach = (o.yaw != 0.0 || o.spin != 0.0) ? side * std::numbers::sqrt2 : side;
        if (reach > static_cast<double>(frame_width) || side > static_cast<double>(frame_height)) {
            throw ConfigurationError("object " + std::string(shape_name(o.shape)) + " at scale " +
                                     std::to_string(o.size_scale) + " does not fit the frame");
        }
    }
}

std::size_t scene_track_samples(const SceneConfig& cfg) {
    return multi_window_start(cfg.frame_count - 1, cfg.fps, kDefaultSampleRate) +
           multi_window_samples(kDefaultSampleRate);
}

Scene gen_scene_sequence(const SceneConfig& cfg) {
    cfg.validate();
    const std::size_t n_obj = cfg.objects.size();
    const double width = static_cast<double>(cfg.frame_width), height = static_cast<double>(cfg.frame_height);
    std::vector<VoxelGrid> grids;
    std::vector<Body> bodies;
    for (const auto& o : cfg.objects) {
        grids.push_back(gen_shape(o.shape, o.size_scale));
        grids.back().material = o.material;
        bodies.push_back({o.x, o.y, o.vx, o.vy, make_sprite(grids.back(), o.yaw, cfg.pixels_per_voxel).extent});
        keep_inside(bodies.back(), width, height);
    }

    struct Impact {
        double time, speed;
    };
    std::vector<std::vector<Impact>> impacts(n_obj);
    std::vector<Sample> out(n_obj);
    constexpr int kSubsteps = 16;
    const double dt = 1.0 / (cfg.fps * kSubsteps);

    for (std::size_t f = 0; f < cfg.frame_count; ++f) {
        const double t_frame = static_cast<double>(f) / cfg.fps;
        for (std::size_t o = 0; o < n_obj; ++o) {
            const auto& spec = cfg.objects[o];
            const Sprite sprite = make_sprite(grids[o], spec.yaw + spec.spin * t_frame, cfg.pixels_per_voxel);
            bodies[o].extent = sprite.extent;
            keep_inside(bodies[o], width, height);
            Image canvas(cfg.frame_width, cfg.frame_height);
            const auto [ox, oy] = sprite_origin(sprite, bodies[o].x, bodies[o].y);
            for (std::size_t r = 0; r < sprite.image.height; ++r) {
                const long fr = oy + static_cast<long>(r);
                if (fr < 0 || fr >= static_cast<long>(cfg.frame_height)) continue;
                for (std::size_t c = 0; c < sprite.image.width; ++c) {
                    const long fc = ox + static_cast<long>(c);
                    if (fc < 0 || fc >= static_cast<long>(cfg.frame_width)) continue;
                    if (sprite.image.at(r, c) > 0.0f) canvas.at(static_cast<std::size_t>(fr), static_cast<std::size_t>(fc)) = 1.0f;
                }
            }
            const Box box = foreground_box(canvas);
            out[o].boxes.push_back(box);
            out[o].frames.push_back(fit_to_square(crop(canvas, box), kImageSize));
        }
        if (f + 1 == cfg.frame_count) break;
        for (int s = 0; s < kSubsteps; ++s) {
            const double t = t_frame + (s + 1) * dt;
            for (std::size_t o = 0; o < n_obj; ++o) {
                auto& b = bodies[o];
                b.vy += cfg.gravity * dt;
                b.x += b.vx * dt;
                b.y += b.vy * dt;
                if ((b.x + b.extent.left < 0 && b.vx < 0) || (b.x + b.extent.right > width && b.vx > 0)) {
                    impacts[o].push_back({t, std::abs(b.vx)});
                    b.vx = -b.vx;
                }
                if ((b.y + b.extent.top < 0 && b.vy < 0) || (b.y + b.extent.bottom > height && b.vy > 0)) {
                    impacts[o].push_back({t, std::abs(b.vy)});
                    b.vy = -b.vy;
                }
            }
            for (std::size_t a = 0; a < n_obj; ++a) {
                for (std::size_t c = a + 1; c < n_obj; ++c) {
                    auto& p = bodies[a];
                    auto& q = bodies[c];
                    const double ox = std::min(p.x + p.extent.right, q.x + q.extent.right) -
                                      std::max(p.x + p.extent.left, q.x + q.extent.left);
                    const double oy = std::min(p.y + p.extent.bottom, q.y + q.extent.bottom) -
                                      std::max(p.y + p.extent.top, q.y + q.extent.top);
                    if (ox <= 0 || oy <= 0) continue;
                    const bool along_x = ox < oy;
                    const double rel = along_x ? (q.vx - p.vx) * (q.x - p.x) : (q.vy - p.vy) * (q.y - p.y);
                    if (rel >= 0) continue;  // separating
                    const double speed = along_x ? std::abs(q.vx - p.vx) : std::abs(q.vy - p.vy);
                    if (along_x) {
                        std::swap(p.vx, q.vx);
                    } else {
                        std::swap(p.vy, q.vy);
                    }
                    impacts[a].push_back({t, speed});
                    impacts[c].push_back({t, speed});
                }
            }
        }
    }

    const std::size_t track_len = scene_track_samples(cfg);
    Scene scene;
    std::vector<AudioClip> tracks;
    for (std::size_t o = 0; o < n_obj; ++o) {
        const auto& spec = cfg.objects[o];
        const auto model = material_modal_params(spec.material, spec.size_scale);
        AudioClip track;
        track.samples.assign(track_len, 0.0);
        for (const auto& ev : impacts[o]) {
            const auto clip = synthesize_impact(model, cfg.gain_per_speed * ev.speed, cfg.impact_seconds);
            const auto start = static_cast<std::size_t>(std::llround(ev.time * kDefaultSampleRate));
            for (std::size_t n = 0; n < clip.samples.size() && start + n < track_len; ++n) {
                track.samples[start + n] += clip.samples[n] / clip.normalization;
            }
            out[o].impact_times.push_back(ev.time);
        }
        peak_normalize(track);
        auto& sample = out[o];
        sample.spectrograms = segment_audio(track, SegmentMode::multi, cfg.fps);
        if (sample.spectrograms.size() != cfg.frame_count) throw NumericError("spectrogram count does not match frames");
        sample.voxels = grids[o];
        sample.material = spec.material;
        sample.shape = spec.shape;
        sample.size_scale = spec.size_scale;
        sample.id = "scene" + std::to_string(cfg.seed) + "_obj" + std::to_string(o);
        sample.track = track;
        tracks.push_back(std::move(track));
    }
    scene.mixed = mix_tracks(tracks, std::vector<double>(n_obj, 0.0));
    scene.objects = std::move(out);
    return scene;
}

SceneConfig random_scene_config(std::uint64_t seed, std::size_t objects, std::size_t frame_count) {
    if (objects < 1 || objects > 3) throw ConfigurationError("a scene holds 1 to 3 objects");
    Rng rng(splitmix64(seed));
    SceneConfig cfg;
    cfg.seed = seed;
    cfg.frame_count = frame_count;
    cfg.gravity = 600.0;
    const double width = static_cast<double>(cfg.frame_width), height = static_cast<double>(cfg.frame_height);
    const double span = static_cast<double>(frame_count - 1) / cfg.fps;
    const double lane = width / static_cast<double>(objects);
    for (std::size_t i = 0; i < objects; ++i) {
        ObjectSpec o;
        o.shape = kAllShapes[rng.below(kAllShapes.size())];
        o.size_scale = rng.uniform(0.35, 0.8);
        o.material = kAllMaterials[rng.below(kMaterialCount)];
        o.yaw = rng.uniform(0.0, std::numbers::pi);
        o.spin = rng.uniform(-3.0, 3.0);
        o.vx = rng.uniform(-150.0, 150.0);
        o.vy = rng.uniform(100.0, 400.0);
        // Drop each object so it strikes the floor partway through the sequence.
        const Extent e = make_sprite(gen_shape(o.shape, o.size_scale), o.yaw, cfg.pixels_per_voxel).extent;
        const double hit = rng.uniform(0.2, 0.7) * span;
        o.y = std::max(height - e.bottom - o.vy * hit - 0.5 * cfg.gravity * hit * hit, -e.top);
        const double lo = std::max(static_cast<double>(i) * lane, static_cast<double>(i) * lane - e.left);
        const double hi = std::min(static_cast<double>(i + 1) * lane, width - e.right);
        o.x = lo < hi ? rng.uniform(lo, hi) : 0.5 * (lo + hi);
        cfg.objects.push_back(o);
    }
    return cfg;
}

std::vector<Sample> augment_windows(const Sample& seq, std::size_t stride, std::size_t window) {
    if (stride < 1 || stride > 3) throw ValidationError("window stride must be 1, 2 or 3");
    if (window == 0) throw ValidationError("window length must be positive");
    std::vector<Sample> out;
    const std::size_t span = stride * (window - 1) + 1;
    if (seq.frame_count() < span) return out;
    for (std::size_t start = 0; start + span <= seq.frame_count(); ++start) {
        Sample w;
        w.id = seq.id + "_s" + std::to_string(stride) + "_w" + std::to_string(start);
        for (std::size_t k = 0; k < window; ++k) {
            const std::size_t f = start + k * stride;
            w.frames.push_back(seq.frames[f]);
            w.spectrograms.push_back(seq.spectrograms[f]);
            w.boxes.push_back(seq.boxes[f]);
        }
        w.voxels = seq.voxels;
        w.material = seq.material;
        w.shape = seq.shape;
        w.size_scale = seq.size_scale;
        w.impact_times = seq.impact_times;
        out.push_back(std::move(w));
    }
    return out;
}

Sample gen_single_view(const SingleViewSpec& spec) {
    Sample s;
    s.voxels = gen_shape(spec.shape, spec.size_scale);
    s.voxels.material = spec.material;
    s.material = spec.material;
    s.shape = spec.shape;
    s.size_scale = spec.size_scale;
    s.frames.push_back(project_silhouette(s.voxels, spec.view));
    s.boxes.push_back(foreground_box(s.frames.back()));
    s.track = synthesize_impact(material_modal_params(spec.material, spec.size_scale), spec.impact_gain,
                                kSingleFrameSeconds);
    s.spectrograms = segment_audio(s.track, SegmentMode::single);
    s.impact_times = {0.0};
    return s;
}

std::vector<SingleViewSpec> ablation_specs(std::size_t count, std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0xab1a7e));
    std::vector<SingleViewSpec> out;
    while (out.size() < count) {
        const bool boxy = rng.below(2) == 0;
        SingleViewSpec solid;
        solid.shape = boxy ? ShapeKind::solid_box : ShapeKind::sphere;
        solid.size_scale = rng.uniform(0.5, 1.0);
        solid.material = rng.below(2) == 0 ? Material::granite : Material::marble;
        solid.view = View::rotated(rng.uniform(0.0, std::numbers::pi / 2));
        solid.impact_gain = rng.uniform(0.3, 1.0);
        SingleViewSpec hollow = solid;
        hollow.shape = boxy ? ShapeKind::hollow_box : ShapeKind::shell_sphere;
        hollow.material = rng.below(2) == 0 ? Material::slate : Material::oak;
        hollow.impact_gain = rng.uniform(0.3, 1.0);
        out.push_back(solid);
        if (out.size() < count) out.push_back(hollow);
    }
    return out;
}

std::vector<SingleViewSpec> random_single_view_specs(std::size_t count, std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0x5171e));
    std::vector<SingleViewSpec> out(count);
    for (auto& s : out) {
        s.shape = kAllShapes[rng.below(kAllShapes.size())];
        s.size_scale = rng.uniform(0.35, 1.0);
        s.material = kAllMaterials[rng.below(kMaterialCount)];
        s.view = View::rotated(rng.uniform(0.0, std::numbers::pi));
        s.impact_gain = rng.uniform(0.3, 1.0);
    }
    return out;
}

std::string_view split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        default: return "test";
    }
}

Split split_of(std::uint64_t sample_seed) {
    const auto bucket = splitmix64(sample_seed) % 10;
    if (bucket < 8) return Split::train;
    return bucket == 8 ? Split::val : Split::test;
}

std::uint64_t sample_seed(std::uint64_t run_seed, std::size_t index) {
    return splitmix64(splitmix64(run_seed) + index);
}

}  // namespace mov3d
