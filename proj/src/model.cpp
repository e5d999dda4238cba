#include "mov3d/model.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "mov3d/error.h"
#include "mov3d/ops.h"

namespace mov3d {

namespace {

constexpr std::array<std::string_view, 3> kVariantNames = {"A", "V", "AV"};
constexpr std::array<std::string_view, 3> kFusionNames = {"add", "concat", "mfb"};
constexpr double kMetaVersion = 1.0;

Tensor param(Tensor t) {
    t.set_requires_grad(true);
    return t;
}

Tensor zeros_param(std::size_t n) { return param(Tensor::zeros({n})); }
Tensor ones_param(std::size_t n) { return param(Tensor::ones({n})); }

Tensor conv_kernel(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng) {
    return param(glorot_uniform({cout, cin, k, k}, cin * k * k, cout * k * k, rng));
}

Tensor dense_weight(std::size_t out, std::size_t in, Rng& rng) {
    return param(glorot_uniform({out, in}, in, out, rng));
}

void check_frames(const std::vector<Tensor>& frames, std::size_t size, std::string_view who) {
    if (frames.empty()) throw DimensionError(std::string(who) + ": at least one frame is required");
    for (const auto& f : frames) {
        if (f.rank() != 3 || f.dim(0) != 1 || f.dim(1) != size || f.dim(2) != size) {
            throw DimensionError(std::string(who) + ": frame " + shape_str(f.shape()) + " is not [1," +
                                 std::to_string(size) + "," + std::to_string(size) + "]");
        }
    }
}

// Stride-s mirror layer: kernel 2s, padding s/2 maps n to n*s.
ConvStage mirror(std::size_t stride, std::size_t channels) { return {2 * stride, stride, stride / 2, channels}; }

}  // namespace

std::string_view variant_name(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

std::optional<Variant> parse_variant(std::string_view s) {
    for (std::size_t i = 0; i < kVariantNames.size(); ++i) {
        if (kVariantNames[i] == s) return static_cast<Variant>(i);
    }
    return std::nullopt;
}

std::string_view fusion_name(FusionMode m) { return kFusionNames[static_cast<std::size_t>(m)]; }

std::optional<FusionMode> parse_fusion(std::string_view s) {
    for (std::size_t i = 0; i < kFusionNames.size(); ++i) {
        if (kFusionNames[i] == s) return static_cast<FusionMode>(i);
    }
    return std::nullopt;
}

std::string_view modality_name(Modality m) { return m == Modality::audio ? "audio" : "visual"; }

std::size_t EncoderConfig::conv1_extent() const {
    return conv_output_extent(input_size, conv1.kernel, conv1.stride, conv1.padding);
}

std::size_t EncoderConfig::conv2_extent() const {
    return conv_output_extent(conv1_extent(), conv2.kernel, conv2.stride, conv2.padding);
}

void EncoderConfig::validate() const {
    for (const auto* s : {&conv1, &conv2}) {
        if (s->kernel == 0 || s->stride == 0 || s->channels == 0) {
            throw ConfigurationError("encoder conv stages need positive kernel, stride and channels");
        }
    }
    if (conv2.kernel > 5 || lstm_kernel > 5) throw ConfigurationError("encoder kernels after the first must be <= 5");
    if (lstm_kernel % 2 == 0) throw ConfigurationError("ConvLSTM kernel must be odd");
    if (lstm_channels == 0 || feature_dim == 0) throw ConfigurationError("encoder widths must be positive");
    const std::size_t e1 = conv1_extent(), e2 = conv2_extent();
    if (e1 * conv1.stride != input_size || e2 * conv2.stride != e1) {
        throw ConfigurationError("encoder trace " + std::to_string(input_size) + " -> " + std::to_string(e1) + " -> " +
                                 std::to_string(e2) + " cannot be mirrored by the 2D decoder");
    }
    if (conv1.stride % 2 != 0 || conv2.stride % 2 != 0) {
        throw ConfigurationError("encoder strides must be even for the mirrored 2D decoder");
    }
}

std::vector<std::size_t> DecoderConfig3D::extent_trace() const {
    std::vector<std::size_t> trace = {1};
    for (const auto& s : stages) trace.push_back(transpose_output_extent(trace.back(), s.kernel, s.stride, s.padding));
    return trace;
}

void DecoderConfig3D::validate() const {
    if (stages.size() != 5) throw ConfigurationError("the 3D decoder has exactly five transposed convolutions");
    if (seed_channels == 0) throw ConfigurationError("decoder seed channels must be positive");
    for (const auto& s : stages) {
        if (s.kernel == 0 || s.stride == 0 || s.channels == 0) {
            throw ConfigurationError("decoder stages need positive kernel, stride and channels");
        }
    }
    if (stages.back().channels != 1) throw ConfigurationError("the last decoder stage must have one channel");
    const auto trace = extent_trace();
    if (trace.back() != output_extent) {
        std::string t;
        for (auto e : trace) t += (t.empty() ? "" : " -> ") + std::to_string(e);
        throw ConfigurationError("decoder trace " + t + " does not end at " + std::to_string(output_extent));
    }
}

std::size_t ModelConfig::decoder_input_dim() const {
    if (variant != Variant::AV) return encoder.feature_dim;
    switch (fusion.mode) {
        case FusionMode::add: return encoder.feature_dim;
        case FusionMode::concat: return 2 * encoder.feature_dim;
        default: return fusion.fused_dim;
    }
}

void ModelConfig::validate() const {
    encoder.validate();
    decoder.validate();
    if (variant == Variant::AV && fusion.mode == FusionMode::mfb && (fusion.fused_dim == 0 || fusion.mfb_factor == 0)) {
        throw ConfigurationError("MFB needs positive fused_dim and factor");
    }
}

ModelConfig ModelConfig::micro(Variant variant, FusionMode fusion) {
    ModelConfig c;
    c.variant = variant;
    c.encoder.input_size = 8;
    c.encoder.conv1 = {3, 2, 1, 2};
    c.encoder.conv2 = {3, 2, 1, 3};
    c.encoder.lstm_channels = 4;
    c.encoder.feature_dim = 8;
    c.decoder.seed_channels = 4;
    c.decoder.stages = {{2, 1, 0, 3}, {2, 1, 0, 3}, {2, 1, 0, 2}, {1, 1, 0, 2}, {1, 1, 0, 1}};
    c.decoder.output_extent = 4;
    c.fusion.mode = fusion;
    c.fusion.fused_dim = 6;
    c.fusion.mfb_factor = 2;
    return c;
}

Tensor image_tensor(const Image& img) {
    std::vector<double> v(img.pixels.begin(), img.pixels.end());
    return Tensor({1, img.height, img.width}, std::move(v));
}

Tensor spectrogram_tensor(const Spectrogram& s, std::size_t size) {
    if (s.mels > size || s.frames > size) throw DimensionError("spectrogram does not fit the encoder input");
    const auto unit = s.unit_scaled();
    std::vector<double> v(size * size, 0.0);
    for (std::size_t b = 0; b < s.mels; ++b)
        for (std::size_t t = 0; t < s.frames; ++t) v[b * size + t] = unit[b * s.frames + t];
    return Tensor({1, size, size}, std::move(v));
}

ModelInputs prepare_inputs(const Sample& sample, Variant variant) {
    ModelInputs in;
    if (uses_audio(variant)) {
        if (sample.spectrograms.empty()) throw ValidationError("sample " + sample.id + " has no spectrograms");
        for (const auto& s : sample.spectrograms) in.audio.push_back(spectrogram_tensor(s));
    }
    if (uses_visual(variant)) {
        if (sample.frames.empty()) throw ValidationError("sample " + sample.id + " has no frames");
        for (const auto& f : sample.frames) in.visual.push_back(image_tensor(f));
    }
    return in;
}

Network Network::build(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Network n;
    n.cfg_ = cfg;
    Rng rng(seed);
    const auto& e = cfg.encoder;
    for (Modality m : {Modality::audio, Modality::visual}) {
        if (!n.has_encoder(m)) continue;
        auto& p = n.enc(m);
        p.conv1_kernel = conv_kernel(e.conv1.channels, 1, e.conv1.kernel, rng);
        p.conv1_bias = zeros_param(e.conv1.channels);
        p.ln1_gain = ones_param(e.conv1.channels);
        p.ln1_bias = zeros_param(e.conv1.channels);
        p.conv2_kernel = conv_kernel(e.conv2.channels, e.conv1.channels, e.conv2.kernel, rng);
        p.conv2_bias = zeros_param(e.conv2.channels);
        p.ln2_gain = ones_param(e.conv2.channels);
        p.ln2_bias = zeros_param(e.conv2.channels);
        p.lstm = ConvLstmWeights::init(e.conv2.channels, e.lstm_channels, e.lstm_kernel, rng);
        p.lstm.input_kernel.set_requires_grad(true);
        p.lstm.hidden_kernel.set_requires_grad(true);
        p.lstm.bias.set_requires_grad(true);
        p.dense_weight = dense_weight(e.feature_dim, e.hidden_numel(), rng);
        p.dense_bias = zeros_param(e.feature_dim);

        auto& a = n.ae(m);
        const auto up1 = mirror(e.conv2.stride, e.conv1.channels);
        const auto up2 = mirror(e.conv1.stride, 1);
        a.up1_kernel = param(glorot_uniform({e.lstm_channels, up1.channels, up1.kernel, up1.kernel},
                                            e.lstm_channels * up1.kernel * up1.kernel,
                                            up1.channels * up1.kernel * up1.kernel, rng));
        a.up1_bias = zeros_param(up1.channels);
        a.ln_gain = ones_param(up1.channels);
        a.ln_bias = zeros_param(up1.channels);
        a.up2_kernel = param(glorot_uniform({up1.channels, 1, up2.kernel, up2.kernel},
                                            up1.channels * up2.kernel * up2.kernel, up2.kernel * up2.kernel, rng));
        a.up2_bias = zeros_param(1);
    }
    if (cfg.variant == Variant::AV && cfg.fusion.mode == FusionMode::mfb) {
        const std::size_t proj = cfg.fusion.fused_dim * cfg.fusion.mfb_factor;
        n.mfb_audio_weight_ = dense_weight(proj, e.feature_dim, rng);
        n.mfb_audio_bias_ = zeros_param(proj);
        n.mfb_visual_weight_ = dense_weight(proj, e.feature_dim, rng);
        n.mfb_visual_bias_ = zeros_param(proj);
    }
    const auto& d = cfg.decoder;
    n.seed_weight_ = dense_weight(d.seed_channels, cfg.decoder_input_dim(), rng);
    n.seed_bias_ = zeros_param(d.seed_channels);
    std::size_t cin = d.seed_channels;
    for (std::size_t i = 0; i < d.stages.size(); ++i) {
        const auto& s = d.stages[i];
        const std::size_t k3 = s.kernel * s.kernel * s.kernel;
        n.dec_kernel_.push_back(
            param(glorot_uniform({cin, s.channels, s.kernel, s.kernel, s.kernel}, cin * k3, s.channels * k3, rng)));
        n.dec_bias_.push_back(zeros_param(s.channels));
        if (i + 1 < d.stages.size()) {
            n.dec_ln_gain_.push_back(ones_param(s.channels));
            n.dec_ln_bias_.push_back(zeros_param(s.channels));
        }
        cin = s.channels;
    }
    if (uses_audio(cfg.variant)) {
        n.material_weight_ = dense_weight(kMaterialCount, e.feature_dim, rng);
        n.material_bias_ = zeros_param(kMaterialCount);
    }
    return n;
}

std::vector<NamedParam> Network::parameters() {
    std::vector<NamedParam> out;
    for (Modality m : {Modality::audio, Modality::visual}) {
        if (!has_encoder(m)) continue;
        const std::string p(modality_name(m));
        auto& e = enc(m);
        out.push_back({p + ".conv1.kernel", &e.conv1_kernel});
        out.push_back({p + ".conv1.bias", &e.conv1_bias});
        out.push_back({p + ".ln1.gain", &e.ln1_gain});
        out.push_back({p + ".ln1.bias", &e.ln1_bias});
        out.push_back({p + ".conv2.kernel", &e.conv2_kernel});
        out.push_back({p + ".conv2.bias", &e.conv2_bias});
        out.push_back({p + ".ln2.gain", &e.ln2_gain});
        out.push_back({p + ".ln2.bias", &e.ln2_bias});
        out.push_back({p + ".lstm.input_kernel", &e.lstm.input_kernel});
        out.push_back({p + ".lstm.hidden_kernel", &e.lstm.hidden_kernel});
        out.push_back({p + ".lstm.bias", &e.lstm.bias});
        out.push_back({p + ".dense.weight", &e.dense_weight});
        out.push_back({p + ".dense.bias", &e.dense_bias});
        auto& a = ae(m);
        out.push_back({p + "_ae.up1.kernel", &a.up1_kernel});
        out.push_back({p + "_ae.up1.bias", &a.up1_bias});
        out.push_back({p + "_ae.ln.gain", &a.ln_gain});
        out.push_back({p + "_ae.ln.bias", &a.ln_bias});
        out.push_back({p + "_ae.up2.kernel", &a.up2_kernel});
        out.push_back({p + "_ae.up2.bias", &a.up2_bias});
    }
    if (mfb_audio_weight_.defined()) {
        out.push_back({"fusion.audio.weight", &mfb_audio_weight_});
        out.push_back({"fusion.audio.bias", &mfb_audio_bias_});
        out.push_back({"fusion.visual.weight", &mfb_visual_weight_});
        out.push_back({"fusion.visual.bias", &mfb_visual_bias_});
    }
    out.push_back({"decoder.seed.weight", &seed_weight_});
    out.push_back({"decoder.seed.bias", &seed_bias_});
    for (std::size_t i = 0; i < dec_kernel_.size(); ++i) {
        const std::string p = "decoder.up" + std::to_string(i + 1);
        out.push_back({p + ".kernel", &dec_kernel_[i]});
        out.push_back({p + ".bias", &dec_bias_[i]});
        if (i < dec_ln_gain_.size()) {
            out.push_back({p + ".ln.gain", &dec_ln_gain_[i]});
            out.push_back({p + ".ln.bias", &dec_ln_bias_[i]});
        }
    }
    if (material_weight_.defined()) {
        out.push_back({"material.weight", &material_weight_});
        out.push_back({"material.bias", &material_bias_});
    }
    return out;
}

std::size_t Network::parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor->numel();
    return n;
}

std::vector<Tensor*> Network::parameters_with_prefix(const std::vector<std::string>& prefixes) {
    std::vector<Tensor*> out;
    for (const auto& p : parameters()) {
        for (const auto& pre : prefixes) {
            if (p.name.starts_with(pre)) {
                out.push_back(p.tensor);
                break;
            }
        }
    }
    return out;
}

std::vector<Tensor> Network::encode_hidden(Modality m, const std::vector<Tensor>& frames) {
    if (!has_encoder(m)) throw UsageError("variant " + std::string(variant_name(cfg_.variant)) + " has no " +
                                          std::string(modality_name(m)) + " encoder");
    const auto& c = cfg_.encoder;
    check_frames(frames, c.input_size, "encode_sequence");
    if (frames.size() > 10) throw DimensionError("encode_sequence: at most 10 frames");
    auto& p = enc(m);
    const std::size_t e2 = c.conv2_extent();
    ConvLstmState state = ConvLstmState::zeros(c.lstm_channels, e2, e2);
    std::vector<Tensor> hidden;
    for (const auto& x : frames) {
        Tensor h = conv2d(x, p.conv1_kernel, p.conv1_bias, c.conv1.stride, c.conv1.padding);
        h = relu(layer_norm(h, p.ln1_gain, p.ln1_bias));
        h = conv2d(h, p.conv2_kernel, p.conv2_bias, c.conv2.stride, c.conv2.padding);
        h = relu(layer_norm(h, p.ln2_gain, p.ln2_bias));
        state = conv_lstm_step(h, state, p.lstm);
        hidden.push_back(state.hidden);
    }
    return hidden;
}

Tensor Network::feature(Modality m, const Tensor& hidden) {
    auto& p = enc(m);
    return tanh(dense(flatten(hidden), p.dense_weight, p.dense_bias));
}

Tensor Network::encode_sequence(Modality m, const std::vector<Tensor>& frames) {
    return feature(m, encode_hidden(m, frames).back());
}

Tensor Network::decode_2d(Modality m, const Tensor& hidden) {
    const auto& c = cfg_.encoder;
    auto& a = ae(m);
    const auto up1 = mirror(c.conv2.stride, c.conv1.channels);
    const auto up2 = mirror(c.conv1.stride, 1);
    Tensor y = conv2d_transpose(hidden, a.up1_kernel, a.up1_bias, up1.stride, up1.padding);
    y = relu(layer_norm(y, a.ln_gain, a.ln_bias));
    return sigmoid(conv2d_transpose(y, a.up2_kernel, a.up2_bias, up2.stride, up2.padding));
}

Tensor Network::fuse(const Tensor& audio_feature, const Tensor& visual_feature) {
    if (audio_feature.shape() != visual_feature.shape()) {
        throw DimensionError("fuse: feature shapes " + shape_str(audio_feature.shape()) + " and " +
                             shape_str(visual_feature.shape()) + " differ");
    }
    switch (cfg_.fusion.mode) {
        case FusionMode::add: return add(audio_feature, visual_feature);
        case FusionMode::concat: return concat({audio_feature, visual_feature});
        default: {
            const Tensor pa = dense(audio_feature, mfb_audio_weight_, mfb_audio_bias_);
            const Tensor pv = dense(visual_feature, mfb_visual_weight_, mfb_visual_bias_);
            return l2_normalize(signed_sqrt(sum_pool(mul(pa, pv), cfg_.fusion.mfb_factor)));
        }
    }
}

Tensor Network::decode_3d(const Tensor& fused) {
    const auto& d = cfg_.decoder;
    Tensor y = relu(dense(fused, seed_weight_, seed_bias_));
    y = reshape(y, {d.seed_channels, 1, 1, 1});
    for (std::size_t i = 0; i < d.stages.size(); ++i) {
        const auto& s = d.stages[i];
        y = conv3d_transpose(y, dec_kernel_[i], dec_bias_[i], s.stride, s.padding);
        y = i + 1 < d.stages.size() ? relu(layer_norm(y, dec_ln_gain_[i], dec_ln_bias_[i])) : sigmoid(y);
    }
    return y;
}

Tensor Network::material_logits(const Tensor& audio_feature) {
    if (!material_weight_.defined()) throw UsageError("material classification needs an audio encoder");
    return dense(audio_feature, material_weight_, material_bias_);
}

ModelOutput Network::head(const Tensor& audio_feature, const Tensor& visual_feature) {
    ModelOutput out;
    Tensor fused;
    switch (cfg_.variant) {
        case Variant::A: fused = audio_feature; break;
        case Variant::V: fused = visual_feature; break;
        default: fused = fuse(audio_feature, visual_feature); break;
    }
    out.occupancy = decode_3d(fused);
    if (uses_audio(cfg_.variant)) out.material_logits = material_logits(audio_feature);
    return out;
}

ModelOutput Network::forward(const ModelInputs& in) {
    Tensor a, v;
    if (uses_audio(cfg_.variant)) {
        if (in.audio.empty()) throw ValidationError("variant needs audio input");
        a = encode_sequence(Modality::audio, in.audio);
    }
    if (uses_visual(cfg_.variant)) {
        if (in.visual.empty()) throw ValidationError("variant needs visual input");
        v = encode_sequence(Modality::visual, in.visual);
    }
    return head(a, v);
}

std::vector<NamedTensor> Network::state() const {
    auto self = const_cast<Network*>(this);
    std::vector<NamedTensor> out = config_meta(cfg_);
    for (const auto& p : self->parameters()) out.push_back({p.name, p.tensor->detach()});
    return out;
}

std::size_t Network::load_state(const std::vector<NamedTensor>& tensors, bool require_all) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& t : tensors) by_name[t.name] = &t.tensor;
    std::size_t taken = 0;
    for (const auto& p : parameters()) {
        const auto it = by_name.find(p.name);
        if (it == by_name.end()) {
            if (require_all) throw FormatError("checkpoint is missing tensor " + p.name);
            continue;
        }
        if (it->second->shape() != p.tensor->shape()) {
            throw ConfigurationError("tensor " + p.name + " has shape " + shape_str(it->second->shape()) +
                                     ", model expects " + shape_str(p.tensor->shape()));
        }
        Tensor copy = it->second->detach();
        copy.set_requires_grad(true);
        *p.tensor = copy;
        ++taken;
    }
    return taken;
}

std::vector<double> classify_material(Network& net, const Tensor& audio_feature) {
    if (!uses_audio(net.config().variant)) throw UsageError("variant V has no material classifier");
    const Tensor p = softmax(net.material_logits(audio_feature));
    return {p.data().begin(), p.data().end()};
}

std::vector<NamedTensor> config_meta(const ModelConfig& cfg) {
    const auto& e = cfg.encoder;
    const auto& d = cfg.decoder;
    std::vector<double> v = {kMetaVersion,
                             static_cast<double>(cfg.variant),
                             static_cast<double>(cfg.fusion.mode),
                             static_cast<double>(cfg.fusion.fused_dim),
                             static_cast<double>(cfg.fusion.mfb_factor),
                             static_cast<double>(e.input_size)};
    for (const auto* s : {&e.conv1, &e.conv2}) {
        for (auto x : {s->kernel, s->stride, s->padding, s->channels}) v.push_back(static_cast<double>(x));
    }
    for (auto x : {e.lstm_kernel, e.lstm_channels, e.feature_dim, d.seed_channels, d.output_extent, d.stages.size()}) {
        v.push_back(static_cast<double>(x));
    }
    for (const auto& s : d.stages) {
        for (auto x : {s.kernel, s.stride, s.padding, s.channels}) v.push_back(static_cast<double>(x));
    }
    const std::size_t n = v.size();
    return {{"meta.config", Tensor({n}, std::move(v))}};
}

ModelConfig config_from_meta(const std::vector<NamedTensor>& tensors) {
    const Tensor* meta = nullptr;
    for (const auto& t : tensors) {
        if (t.name == "meta.config") meta = &t.tensor;
    }
    if (!meta) throw FormatError("checkpoint has no meta.config record");
    auto v = meta->data();
    std::size_t pos = 0;
    auto next = [&]() -> std::size_t {
        if (pos >= v.size()) throw FormatError("meta.config is truncated");
        const double x = v[pos++];
        if (x < 0 || x != std::floor(x)) throw FormatError("meta.config holds a non-integer field");
        return static_cast<std::size_t>(x);
    };
    if (next() != static_cast<std::size_t>(kMetaVersion)) throw FormatError("unsupported checkpoint meta version");
    ModelConfig c;
    const auto variant = next(), fusion = next();
    if (variant > 2 || fusion > 2) throw FormatError("meta.config names an unknown variant or fusion");
    c.variant = static_cast<Variant>(variant);
    c.fusion.mode = static_cast<FusionMode>(fusion);
    c.fusion.fused_dim = next();
    c.fusion.mfb_factor = next();
    c.encoder.input_size = next();
    for (auto* s : {&c.encoder.conv1, &c.encoder.conv2}) {
        s->kernel = next();
        s->stride = next();
        s->padding = next();
        s->channels = next();
    }
    c.encoder.lstm_kernel = next();
    c.encoder.lstm_channels = next();
    c.encoder.feature_dim = next();
    c.decoder.seed_channels = next();
    c.decoder.output_extent = next();
    c.decoder.stages.resize(next());
    for (auto& s : c.decoder.stages) {
        s.kernel = next();
        s.stride = next();
        s.padding = next();
        s.channels = next();
    }
    if (pos != v.size()) throw FormatError("meta.config has trailing fields");
    return c;
}

void save_network(const std::filesystem::path& path, const Network& net) { write_checkpoint(path, net.state()); }

Network load_network(const std::filesystem::path& path) {
    const auto tensors = read_checkpoint(path);
    Network net = Network::build(config_from_meta(tensors), 0);
    net.load_state(tensors, true);
    return net;
}

}  // namespace mov3d
