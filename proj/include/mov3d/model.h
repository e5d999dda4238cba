#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mov3d/checkpoint.h"
#include "mov3d/datagen.h"
#include "mov3d/layers.h"
#include "mov3d/tensor.h"

namespace mov3d {

enum class Variant { A, V, AV };
enum class FusionMode { add, concat, mfb };
enum class Modality { audio, visual };

std::string_view variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view s);
std::string_view fusion_name(FusionMode m);
std::optional<FusionMode> parse_fusion(std::string_view s);
std::string_view modality_name(Modality m);

inline bool uses_audio(Variant v) { return v != Variant::V; }
inline bool uses_visual(Variant v) { return v != Variant::A; }

struct ConvStage {
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t channels = 1;
};

struct EncoderConfig {
    std::size_t input_size = kImageSize;
    ConvStage conv1{7, 4, 2, 32};
    ConvStage conv2{3, 2, 1, 64};
    std::size_t lstm_kernel = 3;
    std::size_t lstm_channels = 64;
    std::size_t feature_dim = 1024;

    std::size_t conv1_extent() const;
    std::size_t conv2_extent() const;
    std::size_t hidden_numel() const { return lstm_channels * conv2_extent() * conv2_extent(); }
    void validate() const;
};

struct DecoderConfig3D {
    std::size_t seed_channels = 256;
    std::vector<ConvStage> stages = {{2, 1, 0, 128}, {2, 2, 0, 64}, {2, 2, 0, 32}, {3, 2, 1, 16}, {4, 2, 1, 1}};
    std::size_t output_extent = kVoxelRes;

    // Extent after each stage, starting from the 1^3 seed.
    std::vector<std::size_t> extent_trace() const;
    void validate() const;
};

struct FusionConfig {
    FusionMode mode = FusionMode::add;
    std::size_t fused_dim = 1024;
    std::size_t mfb_factor = 5;
};

struct ModelConfig {
    Variant variant = Variant::AV;
    EncoderConfig encoder;
    DecoderConfig3D decoder;
    FusionConfig fusion;

    std::size_t decoder_input_dim() const;
    void validate() const;
    // 8x8 inputs, 4^3 output, a few channels per layer.
    static ModelConfig micro(Variant variant, FusionMode fusion = FusionMode::add);
};

struct EncoderParams {
    Tensor conv1_kernel, conv1_bias, ln1_gain, ln1_bias;
    Tensor conv2_kernel, conv2_bias, ln2_gain, ln2_bias;
    ConvLstmWeights lstm;
    Tensor dense_weight, dense_bias;
};

// Mirror of the two encoder convolutions for autoencoder pretraining.
struct AeDecoderParams {
    Tensor up1_kernel, up1_bias, ln_gain, ln_bias;
    Tensor up2_kernel, up2_bias;
};

struct NamedParam {
    std::string name;
    Tensor* tensor;
};

// Per-sample network input. Each list holds [1,S,S] frames.
struct ModelInputs {
    std::vector<Tensor> audio;
    std::vector<Tensor> visual;
};

struct ModelOutput {
    Tensor occupancy;        // [1,D,D,D] in [0,1]
    Tensor material_logits;  // [4], undefined for the V variant
};

Tensor image_tensor(const Image& img);
// dB mapped onto [0, 1] and zero-padded to size x size.
Tensor spectrogram_tensor(const Spectrogram& s, std::size_t size = kImageSize);
ModelInputs prepare_inputs(const Sample& sample, Variant variant);

class Network {
  public:
    static Network build(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // Every trainable tensor with a stable dotted name, in a fixed order.
    std::vector<NamedParam> parameters();
    std::size_t parameter_count();
    // Parameters whose names start with any of the prefixes.
    std::vector<Tensor*> parameters_with_prefix(const std::vector<std::string>& prefixes);

    // Conv stack and ConvLSTM over the frames; hidden states after each step.
    std::vector<Tensor> encode_hidden(Modality m, const std::vector<Tensor>& frames);
    // Dense projection of a final hidden state to the feature vector.
    Tensor feature(Modality m, const Tensor& hidden);
    Tensor encode_sequence(Modality m, const std::vector<Tensor>& frames);
    // Autoencoder reconstruction [1,S,S] of one hidden state.
    Tensor decode_2d(Modality m, const Tensor& hidden);
    Tensor fuse(const Tensor& audio_feature, const Tensor& visual_feature);
    Tensor decode_3d(const Tensor& fused);
    Tensor material_logits(const Tensor& audio_feature);

    // Features to output. Undefined arguments for the modality a variant lacks.
    ModelOutput head(const Tensor& audio_feature, const Tensor& visual_feature);
    ModelOutput forward(const ModelInputs& in);

    bool has_encoder(Modality m) const { return m == Modality::audio ? uses_audio(cfg_.variant) : uses_visual(cfg_.variant); }

    std::vector<NamedTensor> state() const;
    // Copies tensors whose names match; returns how many were taken.
    std::size_t load_state(const std::vector<NamedTensor>& tensors, bool require_all);

  private:
    ModelConfig cfg_;
    EncoderParams audio_, visual_;
    AeDecoderParams audio_ae_, visual_ae_;
    Tensor mfb_audio_weight_, mfb_audio_bias_, mfb_visual_weight_, mfb_visual_bias_;
    Tensor seed_weight_, seed_bias_;
    std::vector<Tensor> dec_kernel_, dec_bias_, dec_ln_gain_, dec_ln_bias_;
    Tensor material_weight_, material_bias_;

    EncoderParams& enc(Modality m) { return m == Modality::audio ? audio_ : visual_; }
    AeDecoderParams& ae(Modality m) { return m == Modality::audio ? audio_ae_ : visual_ae_; }
};

// Softmax over the material logits; throws UsageError for the V variant.
std::vector<double> classify_material(Network& net, const Tensor& audio_feature);

// Model config embedded in a checkpoint as meta.* tensors.
std::vector<NamedTensor> config_meta(const ModelConfig& cfg);
ModelConfig config_from_meta(const std::vector<NamedTensor>& tensors);
void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

}  // namespace mov3d
