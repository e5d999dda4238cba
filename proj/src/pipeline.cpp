#include "mov3d/pipeline.h"

#include <ostream>

#include "mov3d/dataset_io.h"
#include "mov3d/io.h"

namespace mov3d {

namespace fs = std::filesystem;

namespace {

using Handler = bool (*)(const RunConfig&, const CommandOptions&, std::ostream&);

void require_key(const fs::path& value, const char* key) {
    if (value.empty()) throw ConfigParseError(std::string("missing required key '") + key + "'", 0);
}

void require_file(const fs::path& path, const char* what) {
    if (!fs::exists(path)) throw MissingPrerequisite(std::string(what) + " " + path.string() + " does not exist");
}

bool skip_existing(const fs::path& artifact, const CommandOptions& opts, std::ostream& log) {
    if (opts.force || !fs::exists(artifact)) return false;
    log << "exists: " << artifact.string() << " (use --force to rebuild)\n";
    return true;
}

void embed_config(const RunConfig& cfg, const CommandOptions& opts) {
    write_text_atomic(opts.out / kConfigFile, format_config(cfg));
}

std::string id_of(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04zu", prefix, i);
    return buf;
}

bool gen_data(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const fs::path manifest = opts.out / "manifest";
    if (skip_existing(manifest, opts, log)) return false;
    if (cfg.samples == 0) throw ConfigParseError("samples must be positive", 0);
    fs::remove(manifest);
    fs::remove_all(opts.out / "samples");
    fs::remove_all(opts.out / "scenes");

    std::vector<ManifestEntry> entries;
    auto emit = [&](Sample s, Split split, std::uint64_t seed, const std::string& scene) {
        write_sample(opts.out / "samples" / s.id, s);
        entries.push_back({s.id, split, seed, scene});
    };
    if (cfg.data_kind == DataKind::scene) {
        for (std::size_t i = 0; i < cfg.samples; ++i) {
            const auto seed = sample_seed(cfg.seed, i);
            const auto scene_id = id_of("scene", i);
            Scene scene = gen_scene_sequence(random_scene_config(seed, cfg.objects, cfg.frames));
            write_wav(opts.out / "scenes" / (scene_id + ".wav"), scene.mixed);
            for (std::size_t k = 0; k < scene.objects.size(); ++k) {
                const std::string base = scene_id + "_obj" + std::to_string(k);
                if (cfg.window_stride == 0) {
                    Sample s = scene.objects[k];
                    s.id = base;
                    emit(std::move(s), split_of(seed), seed, scene_id);
                    continue;
                }
                auto windows = augment_windows(scene.objects[k], cfg.window_stride);
                for (std::size_t w = 0; w < windows.size(); ++w) {
                    windows[w].id = base + "_w" + std::to_string(w);
                    emit(std::move(windows[w]), split_of(seed), seed, scene_id);
                }
            }
        }
    } else {
        const auto specs = cfg.data_kind == DataKind::ablation ? ablation_specs(cfg.samples, cfg.seed)
                                                               : random_single_view_specs(cfg.samples, cfg.seed);
        for (std::size_t i = 0; i < specs.size(); ++i) {
            // hollow/solid pairs share a split
            const auto group = cfg.data_kind == DataKind::ablation ? i / 2 : i;
            const auto seed = sample_seed(cfg.seed, group);
            Sample s = gen_single_view(specs[i]);
            s.id = id_of("view", i);
            emit(std::move(s), split_of(seed), seed, "");
        }
    }
    embed_config(cfg, opts);
    write_manifest(opts.out, entries);
    log << "wrote " << entries.size() << " samples to " << opts.out.string() << "\n";
    return true;
}

bool synth_audio(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const fs::path wav = opts.out / kImpactWav;
    if (skip_existing(wav, opts, log)) return false;
    const auto clip = synthesize_impact(material_modal_params(cfg.material, cfg.size_scale), cfg.gain, cfg.duration);
    embed_config(cfg, opts);
    write_wav(wav, clip);
    log << "wrote " << wav.string() << " (" << clip.samples.size() << " samples)\n";
    return true;
}

bool spectrogram(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    require_key(cfg.audio, "audio");
    const fs::path index = opts.out / "spectrograms" / "index.txt";
    if (skip_existing(index, opts, log)) return false;
    require_file(cfg.audio, "audio file");
    const auto specs = segment_audio(read_wav(cfg.audio), cfg.segment);
    std::string listing;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        char name[16];
        std::snprintf(name, sizeof name, "%03zu", i);
        write_spectrogram(opts.out / "spectrograms" / (std::string(name) + ".spg"), specs[i]);
        write_text_atomic(opts.out / "spectrograms" / (std::string(name) + ".csv"), spectrogram_csv(specs[i]));
        listing += std::string(name) + ".spg\n";
    }
    embed_config(cfg, opts);
    write_text_atomic(index, listing);
    log << "wrote " << specs.size() << " spectrograms\n";
    return true;
}

Dataset load_data(const RunConfig& cfg) {
    require_key(cfg.data_dir, "data_dir");
    return read_dataset(cfg.data_dir);
}

std::vector<const Sample*> select(const Dataset& d, std::optional<Split> split) {
    if (split) return d.split(*split);
    std::vector<const Sample*> out;
    for (const auto& s : d.samples) out.push_back(&s);
    return out;
}

std::vector<const Sample*> training_set(const Dataset& d, const RunConfig& cfg) {
    auto train = select(d, cfg.train_split);
    if (train.empty()) throw ValidationError("dataset has no training samples");
    return train;
}

EpochCallback stream_to(std::ostream& log, std::string& jsonl) {
    return [&log, &jsonl](const EpochRecord& r) {
        const auto line = r.json();
        jsonl += line + "\n";
        log << line << "\n";
        log.flush();
    };
}

void write_report(const EvalReport& r, const fs::path& dir) {
    write_text_atomic(dir / kReportTable, r.table());
    write_text_atomic(dir / kReportJson, r.json() + "\n");
}

bool train_ae(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const fs::path ckpt = opts.out / kPretrainedFile;
    if (skip_existing(ckpt, opts, log)) return false;
    const auto data = load_data(cfg);
    Network net = Network::build(cfg.model, cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    std::string jsonl;
    pretrain_autoencoders(net, training_set(data, cfg), tc, stream_to(log, jsonl));
    embed_config(cfg, opts);
    write_text_atomic(opts.out / kLogFile, jsonl);
    save_network(ckpt, net);
    return true;
}

// Unset paths fall back to the artifact an earlier stage left in the same directory.
fs::path or_default(const fs::path& configured, const CommandOptions& opts, const char* file) {
    return configured.empty() ? opts.out / file : configured;
}

bool train_recon(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    const fs::path pretrained_path = or_default(cfg.pretrained, opts, kPretrainedFile);
    const fs::path ckpt = opts.out / kModelFile;
    if (skip_existing(ckpt, opts, log)) return false;
    require_file(pretrained_path, "pretrained checkpoint");
    const auto data = load_data(cfg);
    Network net = Network::build(cfg.model, cfg.seed);
    const Network pretrained = load_network(pretrained_path);
    if (net.load_state(pretrained.state(), false) == 0) {
        throw ConfigurationError("pretrained checkpoint shares no tensors with the configured model");
    }
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    std::string jsonl;
    const auto train = training_set(data, cfg);
    train_reconstruction(net, train, tc, stream_to(log, jsonl));
    write_report(evaluate(net, train, tc.thresholds, opts.threads), opts.out);
    embed_config(cfg, opts);
    write_text_atomic(opts.out / kLogFile, jsonl);
    save_network(ckpt, net);
    return true;
}

bool eval(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    if (skip_existing(opts.out / kReportJson, opts, log)) return false;
    const auto data = load_data(cfg);
    const auto chosen = select(data, cfg.split);
    if (chosen.empty()) throw ValidationError("no samples in the selected split");
    EvalReport report;
    if (!cfg.predictions.empty()) {
        require_file(cfg.predictions, "predictions directory");
        std::vector<VoxelGrid> preds;
        for (const auto* s : chosen) {
            const fs::path p = cfg.predictions / (s->id + ".vxg");
            require_file(p, "prediction");
            preds.push_back(read_voxels(p));
        }
        report = score_predictions(preds, chosen, cfg.train.thresholds);
    } else {
        const fs::path ckpt = or_default(cfg.checkpoint, opts, kModelFile);
        require_file(ckpt, "checkpoint");
        Network net = load_network(ckpt);
        report = evaluate(net, chosen, cfg.train.thresholds, opts.threads);
    }
    embed_config(cfg, opts);
    write_report(report, opts.out);
    log << report.table();
    return true;
}

bool reconstruct_cmd(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    require_key(cfg.sample, "sample");
    const fs::path ckpt = or_default(cfg.checkpoint, opts, kModelFile);
    const fs::path out = opts.out / kReconstruction;
    if (skip_existing(out, opts, log)) return false;
    require_file(ckpt, "checkpoint");
    const Sample sample = read_sample(cfg.sample);
    Network net = load_network(ckpt);
    const VoxelGrid grid = reconstruct(net, sample);
    for (const auto& [name, view] : {std::pair{"front", View::front()}, {"side", View::side()}, {"top", View::top()}}) {
        write_pgm(opts.out / (std::string("reconstruction_") + name + ".pgm"), project_silhouette(binarize(grid, 0.4), view));
    }
    embed_config(cfg, opts);
    write_voxels(out, grid);
    log << "wrote " << out.string() << " (" << binarize(grid, 0.4).occupied_count() << " voxels above 0.4";
    if (grid.material) log << ", material " << material_name(*grid.material);
    log << ")\n";
    return true;
}

const std::vector<std::pair<std::string, Handler>>& handlers() {
    static const std::vector<std::pair<std::string, Handler>> table = {
        {"gen-data", gen_data}, {"synth-audio", synth_audio}, {"spectrogram", spectrogram},
        {"train-ae", train_ae}, {"train-recon", train_recon}, {"eval", eval},
        {"reconstruct", reconstruct_cmd},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, fn] : handlers()) out.push_back(name);
        return out;
    }();
    return names;
}

bool run_command(std::string_view command, const RunConfig& cfg, const CommandOptions& opts, std::ostream& log) {
    if (opts.out.empty()) throw ConfigParseError("an output directory is required", 0);
    for (const auto& [name, fn] : handlers()) {
        if (name == command) {
            fs::create_directories(opts.out);
            return fn(cfg, opts, log);
        }
    }
    throw UsageError("unknown command '" + std::string(command) + "'");
}

int exit_code_for(const Error& e) {
    if (dynamic_cast<const ConfigParseError*>(&e) || dynamic_cast<const ConfigurationError*>(&e)) return 2;
    if (dynamic_cast<const MissingPrerequisite*>(&e)) return 3;
    if (dynamic_cast<const NumericError*>(&e)) return 4;
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return 5;
    return 1;
}

}  // namespace mov3d
