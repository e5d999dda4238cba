#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mov3d/dataset_io.h"
#include "mov3d/io.h"
#include "mov3d/pipeline.h"

namespace fs = std::filesystem;
using namespace mov3d;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mov3d_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string(MOV3D_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(out), read_text(err)};
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

// Every regular file under root, keyed by relative path.
std::map<std::string, Bytes> snapshot(const fs::path& root) {
    std::map<std::string, Bytes> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
    }
    return out;
}

}  // namespace

TEST(CliTest, UnknownKeyIsConfigError) {
    const auto dir = scratch("badkey");
    const auto cfg = write_config(dir, "run.cfg", "varant=AV\n");
    const auto r = cli("eval --config " + cfg.string() + " --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err, "error: config: line 1: unknown key 'varant'\n");
}

TEST(CliTest, MissingPrerequisites) {
    const auto dir = scratch("prereq");
    auto r = cli("train-recon --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(r.err.rfind("error: prerequisite: ", 0), 0u) << r.err;
    const auto cfg = write_config(dir, "run.cfg", "data_dir=" + (dir / "nothing").string() + "\n");
    r = cli("train-ae --config " + cfg.string() + " --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.code, 3);
    r = cli("eval --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.code, 2) << "eval without data_dir";
    EXPECT_EQ(cli("explode --out x", dir).code, 2);
}

TEST(CliTest, GenDataIsDeterministicAndIdempotent) {
    const auto dir = scratch("gen");
    const auto cfg = write_config(dir, "run.cfg", "samples=3\nobjects=2\n");
    ASSERT_EQ(cli("gen-data --config " + cfg.string() + " --out " + (dir / "a").string(), dir).code, 0);
    ASSERT_EQ(cli("gen-data --config " + cfg.string() + " --out " + (dir / "b").string(), dir).code, 0);
    const auto a = snapshot(dir / "a");
    EXPECT_EQ(a, snapshot(dir / "b"));
    EXPECT_EQ(read_manifest(dir / "a").size(), 6u);
    EXPECT_TRUE(a.count("config.txt"));
    EXPECT_EQ(parse_config(read_text(dir / "a" / "config.txt")).objects, 2u);

    fs::remove(dir / "a" / "samples" / "scene0000_obj0" / "voxels.vxg");
    auto r = cli("gen-data --config " + cfg.string() + " --out " + (dir / "a").string(), dir);
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("skipped"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "a" / "samples" / "scene0000_obj0" / "voxels.vxg"));
    r = cli("gen-data --force --config " + cfg.string() + " --out " + (dir / "a").string(), dir);
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(snapshot(dir / "a"), a);

    EXPECT_EQ(cli("gen-data --seed 9 --config " + cfg.string() + " --out " + (dir / "c").string(), dir).code, 0);
    EXPECT_NE(snapshot(dir / "c"), a);
}

TEST(CliTest, AudioCommands) {
    const auto dir = scratch("audio");
    const auto cfg = write_config(dir, "run.cfg", "material=oak\nsize_scale=0.6\nduration=0.5\n");
    ASSERT_EQ(cli("synth-audio --config " + cfg.string() + " --out " + (dir / "a").string(), dir).code, 0);
    const auto clip = read_wav(dir / "a" / kImpactWav);
    EXPECT_EQ(clip.samples.size(), 22050u);
    const auto spec_cfg = write_config(dir, "spec.cfg", "audio=" + (dir / "a" / kImpactWav).string() + "\nsegment=single\n");
    ASSERT_EQ(cli("spectrogram --config " + spec_cfg.string() + " --out " + (dir / "s").string(), dir).code, 0);
    const auto spec = read_spectrogram(dir / "s" / "spectrograms" / "000.spg");
    EXPECT_EQ(spec.mels, 64u);
    EXPECT_EQ(spec.frames, 25u);
    EXPECT_EQ(read_text(dir / "s" / "spectrograms" / "index.txt"), "000.spg\n");
}

TEST(CliTest, EvalPerfectPredictorFixture) {
    const auto dir = scratch("perfect");
    const auto cfg = write_config(dir, "run.cfg",
                                  "data_kind=ablation\nsamples=6\nsplit=all\npredictions=" + (dir / "pred").string() + "\n"
                                  "data_dir=" + (dir / "data").string() + "\n");
    ASSERT_EQ(cli("gen-data --config " + cfg.string() + " --out " + (dir / "data").string(), dir).code, 0);
    for (const auto& s : read_dataset(dir / "data").samples) write_voxels(dir / "pred" / (s.id + ".vxg"), s.voxels);
    const auto r = cli("eval --config " + cfg.string() + " --out " + (dir / "eval").string(), dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = nlohmann::json::parse(read_text(dir / "eval" / kReportJson));
    EXPECT_EQ(report["samples"], 6);
    for (const char* key : {"iou@0.3", "iou@0.4", "iou@0.5"}) EXPECT_EQ(report[key], 1.0) << key;
    EXPECT_EQ(report["material_acc"], 1.0);
    EXPECT_TRUE(fs::exists(dir / "eval" / kReportTable));
}

TEST(CliTest, TrainingArtifactsReproduce) {
    const auto dir = scratch("repro");
    const auto cfg = write_config(dir, "run.cfg",
                                  "data_kind=ablation\nsamples=4\ntrain_split=all\nsplit=all\nae_epochs=2\n"
                                  "stage1_epochs=2\nstage2_epochs=1\ndata_dir=" + (dir / "data").string() +
                                  "\nsample=" + (dir / "data" / "samples" / "view0000").string() + "\n");
    const std::string c = " --config " + cfg.string();
    ASSERT_EQ(cli("gen-data" + c + " --out " + (dir / "data").string(), dir).code, 0);
    for (const char* run : {"r1", "r2"}) {
        const std::string out = " --out " + (dir / run).string();
        ASSERT_EQ(cli("train-ae" + c + out, dir).code, 0);
        ASSERT_EQ(cli("train-recon" + c + out, dir).code, 0);
        ASSERT_EQ(cli("reconstruct" + c + out, dir).code, 0);
    }
    for (const char* f : {kPretrainedFile, kModelFile, kLogFile, kReportJson, kReconstruction}) {
        EXPECT_EQ(read_file(dir / "r1" / f), read_file(dir / "r2" / f)) << f;
    }
    const Bytes first = read_file(dir / "r1" / kReconstruction);
    ASSERT_EQ(cli("reconstruct --force" + c + " --out " + (dir / "r1").string(), dir).code, 0);
    EXPECT_EQ(read_file(dir / "r1" / kReconstruction), first);
    const auto grid = read_voxels(dir / "r1" / kReconstruction);
    EXPECT_TRUE(grid.material.has_value());
    EXPECT_NO_THROW(grid.validate());
}

TEST(CliTest, DivergenceExitsWithNumericCode) {
    const auto dir = scratch("nan");
    const auto cfg = write_config(dir, "run.cfg",
                                  "data_kind=ablation\nsamples=2\ntrain_split=all\nae_epochs=3\nae_lr=1e300\n"
                                  "data_dir=" + (dir / "data").string() + "\n");
    ASSERT_EQ(cli("gen-data --config " + cfg.string() + " --out " + (dir / "data").string(), dir).code, 0);
    const auto r = cli("train-ae --config " + cfg.string() + " --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.code, 4);
    EXPECT_EQ(r.err.rfind("error: numeric: ", 0), 0u) << r.err;
    EXPECT_FALSE(fs::exists(dir / "o" / kPretrainedFile));
}

TEST(CliTest, ScriptedPipelineOverfitsFourSamples) {
    const auto dir = scratch("overfit");
    const auto cfg = write_config(dir, "run.cfg",
                                  "seed=3\nsamples=4\ntrain_split=all\nsplit=all\nae_epochs=100\nstage1_epochs=400\n"
                                  "stage1_lr=3e-3\nstage2_epochs=100\nstage2_lr=1e-3\ndata_dir=" + (dir / "data").string() + "\n");
    const std::string c = " --config " + cfg.string();
    const std::string out = " --out " + (dir / "run").string();
    ASSERT_EQ(cli("gen-data" + c + " --out " + (dir / "data").string(), dir).code, 0);
    ASSERT_EQ(cli("train-ae" + c + out, dir).code, 0);
    ASSERT_EQ(cli("train-recon" + c + out, dir).code, 0);
    fs::remove(dir / "run" / kReportJson);
    const auto r = cli("eval" + c + out, dir);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = nlohmann::json::parse(read_text(dir / "run" / kReportJson));
    EXPECT_EQ(report["samples"], 4);
    EXPECT_GT(report["iou@0.4"].get<double>(), 0.9);
}
