#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>

#include "mov3d/dataset_io.h"
#include "mov3d/datagen.h"
#include "mov3d/error.h"

using namespace mov3d;

namespace {

SceneConfig one_object(double x, double vx, std::size_t frames) {
    SceneConfig cfg;
    cfg.frame_count = frames;
    ObjectSpec o;
    o.shape = ShapeKind::solid_box;
    o.size_scale = 0.5;
    o.material = Material::granite;
    o.x = x;
    o.y = 72.0;
    o.vx = vx;
    cfg.objects.push_back(o);
    return cfg;
}

}  // namespace

TEST(ShapeTest, SolidBoxFillsGrid) {
    auto g = gen_shape(ShapeKind::solid_box, 1.0);
    EXPECT_EQ(g.occupied_count(), kVoxelCount);
}

TEST(ShapeTest, HollowBoxSharesSilhouettes) {
    auto solid = gen_shape(ShapeKind::solid_box, 1.0);
    auto hollow = gen_shape(ShapeKind::hollow_box, 1.0);
    EXPECT_EQ(hollow.occupied_count(), kVoxelCount - 26u * 26u * 26u);
    for (auto v : {View::front(), View::side(), View::top()}) {
        EXPECT_EQ(project_silhouette(solid, v).pixels, project_silhouette(hollow, v).pixels);
    }
}

TEST(ShapeTest, SphereMatchesDistanceEnumeration) {
    auto g = gen_shape(ShapeKind::sphere, 0.5);
    for (std::size_t i = 0; i < kVoxelRes; ++i)
        for (std::size_t j = 0; j < kVoxelRes; ++j)
            for (std::size_t k = 0; k < kVoxelRes; ++k) {
                const double di = i + 0.5 - 15, dj = j + 0.5 - 15, dk = k + 0.5 - 15;
                const bool inside = di * di + dj * dj + dk * dk <= 7.5 * 7.5;
                EXPECT_EQ(g.at(i, j, k), inside ? 1.0f : 0.0f);
            }
}

TEST(ShapeTest, HollowVariantsKeepOuterHull) {
    for (double s : {0.4, 0.55, 0.7, 0.85, 1.0}) {
        auto sphere = gen_shape(ShapeKind::sphere, s), shell = gen_shape(ShapeKind::shell_sphere, s);
        auto box = gen_shape(ShapeKind::solid_box, s), hbox = gen_shape(ShapeKind::hollow_box, s);
        EXPECT_LT(shell.occupied_count(), sphere.occupied_count());
        EXPECT_LT(hbox.occupied_count(), box.occupied_count());
        for (auto v : {View::front(), View::side(), View::top(), View::rotated(0.6)}) {
            EXPECT_EQ(project_plane(sphere, v).pixels, project_plane(shell, v).pixels) << s;
            EXPECT_EQ(project_plane(box, v).pixels, project_plane(hbox, v).pixels) << s;
        }
    }
}

TEST(ShapeTest, AllShapesBinaryNonEmptyDeterministic) {
    for (auto kind : kAllShapes)
        for (double s : {0.31, 0.5, 1.0}) {
            auto g = gen_shape(kind, s);
            EXPECT_TRUE(g.is_binary());
            EXPECT_GT(g.occupied_count(), 0u) << shape_name(kind) << ' ' << s;
            EXPECT_EQ(g, gen_shape(kind, s));
        }
    EXPECT_THROW(gen_shape(ShapeKind::sphere, 0.3), ValidationError);
    EXPECT_THROW(gen_shape(ShapeKind::sphere, 1.01), ValidationError);
}

TEST(SceneTest, StaticObjectIsSilent) {
    auto scene = gen_scene_sequence(one_object(96.0, 0.0, 10));
    ASSERT_EQ(scene.objects.size(), 1u);
    const auto& s = scene.objects[0];
    EXPECT_TRUE(s.impact_times.empty());
    for (double v : s.track.samples) EXPECT_EQ(v, 0.0);
    ASSERT_EQ(s.spectrograms.size(), 10u);
    for (const auto& spec : s.spectrograms)
        for (float v : spec.values) EXPECT_EQ(v, -80.0f);
}

TEST(SceneTest, SingleBounceRaisesLaterSpectrograms) {
    auto cfg = one_object(150.0, 300.0, 20);
    auto scene = gen_scene_sequence(cfg);
    const auto& s = scene.objects[0];
    ASSERT_EQ(s.impact_times.size(), 1u);
    const double t_hit = s.impact_times[0];
    const double fs = kDefaultSampleRate;
    double before = -1e9, after = 1e9;
    int n_before = 0, n_after = 0;
    for (std::size_t n = 0; n < s.spectrograms.size(); ++n) {
        const double start = multi_window_start(n, cfg.fps, fs) / fs;
        const double end = start + kMultiFrameSeconds;
        if (end < t_hit) {
            before = std::max(before, s.spectrograms[n].mean());
            ++n_before;
        } else if (start > t_hit) {
            after = std::min(after, s.spectrograms[n].mean());
            ++n_after;
        }
    }
    ASSERT_GT(n_before, 0);
    ASSERT_GT(n_after, 0);
    EXPECT_GT(after, before);
}

TEST(SceneTest, DeterministicForSameConfig) {
    auto cfg = random_scene_config(42, 3, 12);
    auto a = gen_scene_sequence(cfg), b = gen_scene_sequence(cfg);
    ASSERT_EQ(a.objects.size(), b.objects.size());
    for (std::size_t o = 0; o < a.objects.size(); ++o) {
        EXPECT_EQ(a.objects[o].track.samples, b.objects[o].track.samples);
        EXPECT_EQ(a.objects[o].boxes, b.objects[o].boxes);
        for (std::size_t f = 0; f < a.objects[o].frames.size(); ++f) {
            EXPECT_EQ(a.objects[o].frames[f].pixels, b.objects[o].frames[f].pixels);
            EXPECT_EQ(a.objects[o].spectrograms[f].values, b.objects[o].spectrograms[f].values);
        }
    }
    EXPECT_EQ(a.mixed.samples, b.mixed.samples);
}

TEST(SceneTest, SequenceInvariants) {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u, 6u}) {
        auto cfg = random_scene_config(seed, 1 + seed % 3, 10 + seed);
        auto scene = gen_scene_sequence(cfg);
        for (const auto& s : scene.objects) {
            ASSERT_EQ(s.frames.size(), cfg.frame_count);
            ASSERT_EQ(s.spectrograms.size(), cfg.frame_count);
            ASSERT_EQ(s.boxes.size(), cfg.frame_count);
            EXPECT_TRUE(s.voxels.is_binary());
            EXPECT_GT(s.voxels.occupied_count(), 0u);
            for (std::size_t f = 0; f < s.frames.size(); ++f) {
                const auto& img = s.frames[f];
                ASSERT_EQ(img.width, 88u);
                ASSERT_EQ(img.height, 88u);
                for (float v : img.pixels) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
                const auto& b = s.boxes[f];
                EXPECT_GT(b.w, 0);
                EXPECT_GT(b.h, 0);
                EXPECT_GE(b.x, 0);
                EXPECT_GE(b.y, 0);
                EXPECT_LE(b.x + b.w, static_cast<long>(cfg.frame_width));
                EXPECT_LE(b.y + b.h, static_cast<long>(cfg.frame_height));
                // the cropped silhouette touches both edges of its longer axis
                const auto fb = foreground_box(img);
                EXPECT_TRUE(fb.w == 88 || fb.h == 88);
            }
        }
        // mixed track is the raw sum of unmixed tracks
        for (std::size_t n = 0; n < scene.mixed.samples.size(); ++n) {
            double sum = 0.0;
            for (const auto& s : scene.objects) sum += s.track.samples[n] / s.track.normalization;
            ASSERT_NEAR(scene.mixed.samples[n] / scene.mixed.normalization, sum, 1e-6);
        }
    }
}

TEST(SceneTest, CollidingObjectsBothHear) {
    SceneConfig cfg;
    cfg.frame_count = 20;
    ObjectSpec a;
    a.size_scale = 0.4;
    a.x = 60;
    a.vx = 200;
    ObjectSpec b = a;
    b.x = 130;
    b.vx = -200;
    b.material = Material::oak;
    cfg.objects = {a, b};
    auto scene = gen_scene_sequence(cfg);
    ASSERT_FALSE(scene.objects[0].impact_times.empty());
    EXPECT_EQ(scene.objects[0].impact_times.front(), scene.objects[1].impact_times.front());
}

TEST(SceneTest, RejectsBadConfigs) {
    auto cfg = one_object(96.0, 0.0, 10);
    cfg.frame_width = 24;
    EXPECT_THROW(gen_scene_sequence(cfg), ConfigurationError);
    cfg = one_object(96.0, 0.0, 9);
    EXPECT_THROW(gen_scene_sequence(cfg), ConfigurationError);
    cfg = one_object(96.0, 0.0, 10);
    cfg.objects.resize(4, cfg.objects[0]);
    EXPECT_THROW(gen_scene_sequence(cfg), ConfigurationError);
}

TEST(AugmentTest, WindowCounts) {
    Sample seq;
    for (std::size_t f = 0; f < 19; ++f) {
        Image img(88, 88, static_cast<float>(f) / 19.0f);
        seq.frames.push_back(img);
        seq.spectrograms.push_back(Spectrogram::silent());
        seq.boxes.push_back({static_cast<long>(f), 0, 1, 1});
    }
    auto take = [&](std::size_t n) {
        Sample s = seq;
        s.frames.resize(n);
        s.spectrograms.resize(n);
        s.boxes.resize(n);
        return s;
    };
    EXPECT_EQ(augment_windows(take(10), 1).size(), 1u);
    auto w12 = augment_windows(take(12), 1);
    ASSERT_EQ(w12.size(), 3u);
    EXPECT_EQ(w12[2].boxes.front().x, 2);
    auto w19 = augment_windows(seq, 2);
    ASSERT_EQ(w19.size(), 1u);
    for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(w19[0].boxes[k].x, static_cast<long>(2 * k));
    EXPECT_TRUE(augment_windows(take(18), 2).empty());
    EXPECT_EQ(augment_windows(seq, 3).size(), 0u);
}

TEST(SingleViewTest, PairsShareSilhouetteNotSound) {
    auto specs = ablation_specs(6, 7);
    ASSERT_EQ(specs.size(), 6u);
    for (std::size_t p = 0; p < 6; p += 2) {
        auto solid = gen_single_view(specs[p]), hollow = gen_single_view(specs[p + 1]);
        EXPECT_TRUE(solid.material == Material::granite || solid.material == Material::marble);
        EXPECT_TRUE(hollow.material == Material::slate || hollow.material == Material::oak);
        EXPECT_EQ(solid.frames[0].pixels, hollow.frames[0].pixels);
        EXPECT_NE(solid.spectrograms[0].values, hollow.spectrograms[0].values);
        EXPECT_LT(hollow.voxels.occupied_count(), solid.voxels.occupied_count());
        EXPECT_EQ(solid.spectrograms.size(), 1u);
        EXPECT_EQ(hollow.voxels.material, hollow.material);
    }
}

TEST(SplitTest, RoughlyEightyTenTen) {
    std::map<Split, int> counts;
    for (std::uint64_t s = 0; s < 10000; ++s) ++counts[split_of(s)];
    EXPECT_NEAR(counts[Split::train], 8000, 200);
    EXPECT_NEAR(counts[Split::val], 1000, 120);
    EXPECT_NEAR(counts[Split::test], 1000, 120);
}

TEST(DatasetIoTest, SampleRoundTrip) {
    auto scene = gen_scene_sequence(random_scene_config(9, 2, 10));
    const auto& s = scene.objects[1];
    auto root = std::filesystem::temp_directory_path() / "mov3d_dataset_io";
    std::filesystem::remove_all(root);
    write_sample(root / "samples" / s.id, s);
    write_manifest(root, {{s.id, Split::val, 9, "scene9"}});
    auto d = read_dataset(root);
    ASSERT_EQ(d.samples.size(), 1u);
    const auto& r = d.samples[0];
    EXPECT_EQ(d.entries[0].split, Split::val);
    EXPECT_EQ(r.id, s.id);
    EXPECT_EQ(r.material, s.material);
    EXPECT_EQ(r.shape, s.shape);
    EXPECT_EQ(r.size_scale, s.size_scale);
    EXPECT_EQ(r.boxes, s.boxes);
    EXPECT_EQ(r.voxels, s.voxels);
    EXPECT_EQ(r.impact_times, s.impact_times);
    for (std::size_t f = 0; f < s.frames.size(); ++f) {
        EXPECT_EQ(r.frames[f].pixels, s.frames[f].pixels);
        EXPECT_EQ(r.spectrograms[f].values, s.spectrograms[f].values);
    }
    EXPECT_EQ(d.split(Split::val).size(), 1u);
    EXPECT_THROW(read_manifest(root / "nope"), MissingPrerequisite);
    std::filesystem::remove_all(root);
}

TEST(SceneTest, RandomScenesSoundWithinTheSequence) {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        auto cfg = random_scene_config(seed, 1 + seed % 3, 10);
        auto scene = gen_scene_sequence(cfg);
        const double span = static_cast<double>(cfg.frame_count - 1) / cfg.fps;
        for (const auto& s : scene.objects) {
            ASSERT_FALSE(s.impact_times.empty()) << "seed " << seed;
            EXPECT_LT(s.impact_times.front(), span) << "seed " << seed;
            float loudest = -80.0f;
            for (const auto& spec : s.spectrograms) {
                loudest = std::max(loudest, *std::max_element(spec.values.begin(), spec.values.end()));
            }
            EXPECT_GT(loudest, -80.0f) << "seed " << seed;
        }
    }
}
