#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mov3d/datagen.h"
#include "mov3d/model.h"

namespace mov3d {

class Adam {
  public:
    Adam(std::vector<Tensor*> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void zero_grad();
    // Applies one update from the accumulated leaf gradients.
    void step();
    std::size_t steps() const { return t_; }

  private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
};

struct TrainConfig {
    std::uint64_t seed = 1;
    std::size_t batch_size = 8;
    std::size_t ae_epochs = 50;
    double ae_lr = 1e-3;
    std::size_t stage1_epochs = 100;
    double stage1_lr = 1e-3;
    std::size_t stage2_epochs = 20;
    double stage2_lr = 1e-4;
    double material_weight = 0.1;
    std::vector<double> thresholds = {0.3, 0.4, 0.5};
    // Evaluate the training set every n epochs (0: never).
    std::size_t eval_every = 0;
};

struct SampleResult {
    std::string id;
    std::vector<double> iou;  // per threshold
    double bce = 0.0;
    std::optional<Material> predicted_material;
    Material material = Material::granite;
};

struct EvalReport {
    std::vector<double> thresholds;
    std::vector<double> mean_iou;
    double bce = 0.0;
    std::optional<double> material_accuracy;
    std::vector<SampleResult> samples;

    double iou_at(double threshold) const;
    std::string json() const;
    std::string table() const;
};

struct EpochRecord {
    std::string stage;  // "ae", "stage1" or "stage2"
    std::size_t epoch = 0;
    double loss = 0.0;
    std::optional<EvalReport> eval;

    std::string json() const;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainLog {
    std::vector<EpochRecord> records;

    std::vector<double> losses(const std::string& stage = "") const;
    std::string jsonl() const;
};

// Autoencoder pretraining: each modality's conv stack and ConvLSTM learn to
// reproduce their input frames through the mirrored 2D decoder (MSE).
TrainLog pretrain_autoencoders(Network& net, const std::vector<const Sample*>& data, const TrainConfig& cfg,
                               const EpochCallback& on_epoch = {});

// Stage 1 freezes the pretrained conv stacks and ConvLSTMs and trains the
// feature projections, fusion, 3D decoder and material head on BCE plus
// weighted cross-entropy; stage 2 fine-tunes every reconstruction weight.
TrainLog train_reconstruction(Network& net, const std::vector<const Sample*>& data, const TrainConfig& cfg,
                              const EpochCallback& on_epoch = {});

Tensor voxel_tensor(const VoxelGrid& grid);
VoxelGrid occupancy_grid(const Tensor& occupancy);

// Deterministic inference; the material is set for A and AV variants.
VoxelGrid reconstruct(Network& net, const Sample& sample);

EvalReport evaluate(Network& net, const std::vector<const Sample*>& data,
                    const std::vector<double>& thresholds = {0.3, 0.4, 0.5}, std::size_t threads = 1);
// Scores precomputed occupancy grids (and optional material guesses) against their samples.
EvalReport score_predictions(const std::vector<VoxelGrid>& predictions, const std::vector<const Sample*>& data,
                             const std::vector<double>& thresholds);

}  // namespace mov3d
