#include "mov3d/training.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <thread>

#include "mov3d/error.h"
#include "mov3d/ops.h"

namespace mov3d {

namespace {

std::vector<std::string> core_prefixes(Modality m) {
    const std::string p(modality_name(m));
    return {p + ".conv1.", p + ".ln1.", p + ".conv2.", p + ".ln2.", p + ".lstm."};
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return order;
}

void require_finite(double loss, const std::string& stage, std::size_t epoch, const std::string& id) {
    if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss in " + stage + " epoch " + std::to_string(epoch) + " on sample " + id);
    }
}

// Runs `epochs` passes of minibatch Adam. `sample_loss` builds one sample's graph.
TrainLog run_epochs(const std::string& stage, std::size_t epochs, std::size_t count, Adam& opt,
                    const TrainConfig& cfg, const std::function<Tensor(std::size_t)>& sample_loss,
                    const std::function<std::string(std::size_t)>& sample_id,
                    const std::function<std::optional<EvalReport>(std::size_t)>& eval_hook,
                    const EpochCallback& on_epoch) {
    TrainLog log;
    std::uint64_t tag = 1469598103934665603ULL;
    for (char c : stage) tag = (tag ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    Rng rng(cfg.seed ^ tag);
    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        const auto order = shuffled(count, rng);
        double total = 0.0;
        for (std::size_t start = 0; start < count; start += batch) {
            const std::size_t end = std::min(count, start + batch);
            opt.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t idx = order[b];
                const Tensor loss = sample_loss(idx);
                require_finite(loss.item(), stage, epoch, sample_id(idx));
                total += loss.item();
                scale(loss, 1.0 / static_cast<double>(end - start)).backward();
            }
            opt.step();
        }
        EpochRecord rec{stage, epoch, total / static_cast<double>(count), std::nullopt};
        if (eval_hook) rec.eval = eval_hook(epoch);
        if (on_epoch) on_epoch(rec);
        log.records.push_back(std::move(rec));
    }
    return log;
}

Tensor material_loss(const ModelOutput& out, Material label) {
    return softmax_cross_entropy(out.material_logits, static_cast<std::size_t>(label));
}

}  // namespace

Adam::Adam(std::vector<Tensor*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
        m_.emplace_back(p->numel(), 0.0);
        v_.emplace_back(p->numel(), 0.0);
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = *params_[i];
        if (!p.has_grad()) continue;
        const auto g = p.grad_span();
        auto w = p.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
        }
    }
}

double EvalReport::iou_at(double threshold) const {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (std::abs(thresholds[i] - threshold) < 1e-12) return mean_iou[i];
    }
    throw UsageError("threshold " + std::to_string(threshold) + " was not evaluated");
}

std::string EvalReport::json() const {
    nlohmann::ordered_json j;
    j["samples"] = samples.size();
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        std::ostringstream key;
        key << "iou@" << thresholds[i];
        j[key.str()] = mean_iou[i];
    }
    j["bce"] = bce;
    if (material_accuracy) {
        j["material_acc"] = *material_accuracy;
    } else {
        j["material_acc"] = nullptr;
    }
    return j.dump();
}

std::string EvalReport::table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "samples       " << samples.size() << '\n';
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        os << "IoU@" << std::setprecision(1) << thresholds[i] << std::setprecision(4) << "       " << mean_iou[i]
           << '\n';
    }
    os << "BCE           " << bce << '\n';
    os << "material acc  ";
    if (material_accuracy) {
        os << *material_accuracy << '\n';
    } else {
        os << "n/a\n";
    }
    return os.str();
}

std::string EpochRecord::json() const {
    nlohmann::ordered_json j;
    j["stage"] = stage;
    j["epoch"] = epoch;
    j["split"] = "train";
    j["loss"] = loss;
    if (eval) {
        for (std::size_t i = 0; i < eval->thresholds.size(); ++i) {
            std::ostringstream key;
            key << "iou@" << eval->thresholds[i];
            j[key.str()] = eval->mean_iou[i];
        }
        j["bce"] = eval->bce;
        if (eval->material_accuracy) j["material_acc"] = *eval->material_accuracy;
    }
    return j.dump();
}

std::vector<double> TrainLog::losses(const std::string& stage) const {
    std::vector<double> out;
    for (const auto& r : records) {
        if (stage.empty() || r.stage == stage) out.push_back(r.loss);
    }
    return out;
}

std::string TrainLog::jsonl() const {
    std::string out;
    for (const auto& r : records) out += r.json() + "\n";
    return out;
}

Tensor voxel_tensor(const VoxelGrid& grid) {
    std::vector<double> v(grid.occupancy.begin(), grid.occupancy.end());
    return Tensor({1, kVoxelRes, kVoxelRes, kVoxelRes}, std::move(v));
}

VoxelGrid occupancy_grid(const Tensor& occupancy) {
    if (occupancy.numel() != kVoxelCount) {
        throw DimensionError("occupancy " + shape_str(occupancy.shape()) + " is not a 30^3 grid");
    }
    VoxelGrid g;
    auto d = occupancy.data();
    for (std::size_t i = 0; i < kVoxelCount; ++i) g.occupancy[i] = static_cast<float>(d[i]);
    return g;
}

TrainLog pretrain_autoencoders(Network& net, const std::vector<const Sample*>& data, const TrainConfig& cfg,
                               const EpochCallback& on_epoch) {
    if (data.empty()) throw ValidationError("pretraining needs a nonempty dataset");
    const Variant variant = net.config().variant;
    std::vector<Modality> mods;
    std::vector<std::string> prefixes;
    for (Modality m : {Modality::audio, Modality::visual}) {
        if (!net.has_encoder(m)) continue;
        mods.push_back(m);
        for (auto& p : core_prefixes(m)) prefixes.push_back(p);
        prefixes.push_back(std::string(modality_name(m)) + "_ae.");
    }
    std::vector<ModelInputs> inputs;
    for (const auto* s : data) inputs.push_back(prepare_inputs(*s, variant));
    Adam opt(net.parameters_with_prefix(prefixes), cfg.ae_lr);
    auto loss_of = [&](std::size_t idx) {
        Tensor total;
        for (Modality m : mods) {
            const auto& frames = m == Modality::audio ? inputs[idx].audio : inputs[idx].visual;
            const auto hidden = net.encode_hidden(m, frames);
            Tensor acc;
            for (std::size_t t = 0; t < frames.size(); ++t) {
                const Tensor l = mse_loss(net.decode_2d(m, hidden[t]), frames[t]);
                acc = acc.defined() ? add(acc, l) : l;
            }
            acc = scale(acc, 1.0 / static_cast<double>(frames.size()));
            total = total.defined() ? add(total, acc) : acc;
        }
        return total;
    };
    return run_epochs("ae", cfg.ae_epochs, data.size(), opt, cfg, loss_of,
                      [&](std::size_t i) { return data[i]->id; }, {}, on_epoch);
}

TrainLog train_reconstruction(Network& net, const std::vector<const Sample*>& data, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
    if (data.empty()) throw ValidationError("training needs a nonempty dataset");
    if (net.config().decoder.output_extent != kVoxelRes) throw ConfigurationError("training targets 30^3 grids");
    const Variant variant = net.config().variant;
    const bool audio = uses_audio(variant), visual = uses_visual(variant);
    std::vector<ModelInputs> inputs;
    std::vector<Tensor> targets;
    for (const auto* s : data) {
        inputs.push_back(prepare_inputs(*s, variant));
        targets.push_back(voxel_tensor(s->voxels));
    }
    auto id_of = [&](std::size_t i) { return data[i]->id; };
    auto sample_loss = [&](const ModelOutput& out, std::size_t idx) {
        Tensor loss = bce_loss(out.occupancy, targets[idx]);
        if (audio) loss = add(loss, scale(material_loss(out, data[idx]->material), cfg.material_weight));
        return loss;
    };

    // Stage 1: frozen encoders, cached final hidden states.
    std::vector<Tensor> audio_hidden(data.size()), visual_hidden(data.size());
    if (cfg.stage1_epochs > 0) {
        NoGradGuard no_grad;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (audio) audio_hidden[i] = net.encode_hidden(Modality::audio, inputs[i].audio).back();
            if (visual) visual_hidden[i] = net.encode_hidden(Modality::visual, inputs[i].visual).back();
        }
    }
    auto stage1_out = [&](std::size_t i) {
        Tensor a, v;
        if (audio) a = net.feature(Modality::audio, audio_hidden[i]);
        if (visual) v = net.feature(Modality::visual, visual_hidden[i]);
        return net.head(a, v);
    };
    auto eval_with = [&](const std::function<ModelOutput(std::size_t)>& fwd) {
        return [&, fwd](std::size_t epoch) -> std::optional<EvalReport> {
            if (cfg.eval_every == 0 || epoch % cfg.eval_every != 0) return std::nullopt;
            NoGradGuard no_grad;
            std::vector<VoxelGrid> preds;
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto out = fwd(i);
                auto g = occupancy_grid(out.occupancy);
                if (out.material_logits.defined()) {
                    const auto l = out.material_logits.data();
                    g.material = static_cast<Material>(std::max_element(l.begin(), l.end()) - l.begin());
                }
                preds.push_back(std::move(g));
            }
            return score_predictions(preds, data, cfg.thresholds);
        };
    };
    std::vector<std::string> head_prefixes = {"audio.dense.", "visual.dense.", "fusion.", "decoder.", "material."};
    TrainLog log;
    {
        Adam opt(net.parameters_with_prefix(head_prefixes), cfg.stage1_lr);
        auto part = run_epochs("stage1", cfg.stage1_epochs, data.size(), opt, cfg,
                               [&](std::size_t i) { return sample_loss(stage1_out(i), i); }, id_of,
                               eval_with(stage1_out), on_epoch);
        log.records.insert(log.records.end(), part.records.begin(), part.records.end());
    }
    {
        auto all = head_prefixes;
        for (Modality m : {Modality::audio, Modality::visual}) {
            if (!net.has_encoder(m)) continue;
            for (auto& p : core_prefixes(m)) all.push_back(p);
        }
        Adam opt(net.parameters_with_prefix(all), cfg.stage2_lr);
        auto full_out = [&](std::size_t i) { return net.forward(inputs[i]); };
        auto part = run_epochs("stage2", cfg.stage2_epochs, data.size(), opt, cfg,
                               [&](std::size_t i) { return sample_loss(full_out(i), i); }, id_of, eval_with(full_out),
                               on_epoch);
        log.records.insert(log.records.end(), part.records.begin(), part.records.end());
    }
    return log;
}

VoxelGrid reconstruct(Network& net, const Sample& sample) {
    if (net.config().decoder.output_extent != kVoxelRes) throw ConfigurationError("reconstruction needs a 30^3 decoder");
    NoGradGuard no_grad;
    const auto out = net.forward(prepare_inputs(sample, net.config().variant));
    VoxelGrid g = occupancy_grid(out.occupancy);
    if (out.material_logits.defined()) {
        const auto l = out.material_logits.data();
        g.material = static_cast<Material>(std::max_element(l.begin(), l.end()) - l.begin());
    }
    return g;
}

EvalReport score_predictions(const std::vector<VoxelGrid>& predictions, const std::vector<const Sample*>& data,
                             const std::vector<double>& thresholds) {
    if (predictions.size() != data.size()) throw DimensionError("one prediction per sample is required");
    EvalReport r;
    r.thresholds = thresholds;
    r.mean_iou.assign(thresholds.size(), 0.0);
    std::size_t labelled = 0, correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& pred = predictions[i];
        const auto& gt = data[i]->voxels;
        SampleResult s;
        s.id = data[i]->id;
        s.material = data[i]->material;
        s.predicted_material = pred.material;
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            s.iou.push_back(iou(pred, gt, thresholds[t]));
            r.mean_iou[t] += s.iou.back();
        }
        double bce = 0.0;
        for (std::size_t n = 0; n < kVoxelCount; ++n) {
            const double p = std::clamp(static_cast<double>(pred.occupancy[n]), kBceClamp, 1.0 - kBceClamp);
            bce -= gt.occupancy[n] == 1.0f ? std::log(p) : std::log(1.0 - p);
        }
        s.bce = bce / static_cast<double>(kVoxelCount);
        r.bce += s.bce;
        if (pred.material) {
            ++labelled;
            correct += *pred.material == data[i]->material;
        }
        r.samples.push_back(std::move(s));
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, data.size()));
    for (auto& m : r.mean_iou) m /= n;
    r.bce /= n;
    if (labelled > 0) r.material_accuracy = static_cast<double>(correct) / static_cast<double>(labelled);
    return r;
}

EvalReport evaluate(Network& net, const std::vector<const Sample*>& data, const std::vector<double>& thresholds,
                    std::size_t threads) {
    std::vector<VoxelGrid> preds(data.size());
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, data.size()));
    auto work = [&](std::size_t w) {
        for (std::size_t i = w; i < data.size(); i += workers) preds[i] = reconstruct(net, *data[i]);
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    return score_predictions(preds, data, thresholds);
}

}  // namespace mov3d
