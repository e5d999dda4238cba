#pragma once

#include <cstdint>
#include <random>

#include "mov3d/ops.h"
#include "mov3d/tensor.h"

namespace mov3d {

// Portable RNG: mt19937_64 is fully specified by the standard, and the
// real/int conversions below avoid the implementation-defined
// std::*_distribution algorithms, so streams match across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // [0, n)
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }
    double normal();

  private:
    std::mt19937_64 engine_;
};

// Leaf tensor filled uniformly in +-sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng);

struct ConvLstmState {
    Tensor hidden;  // [C,H,W]
    Tensor cell;    // [C,H,W]

    // Zero state; `fresh` lets the step skip the recurrent convolution.
    static ConvLstmState zeros(std::size_t channels, std::size_t height, std::size_t width);
    bool fresh = false;
};

// Gate order along the leading axis of every tensor: input, forget,
// output, candidate.
struct ConvLstmWeights {
    Tensor input_kernel;   // [4C, Cin, k, k]
    Tensor hidden_kernel;  // [4C, C, k, k]
    Tensor bias;           // [4C]

    std::size_t channels() const { return bias.dim(0) / 4; }
    std::size_t kernel_size() const { return input_kernel.dim(2); }

    // Glorot-initialised kernels; forget-gate bias starts at 1.
    static ConvLstmWeights init(std::size_t in_channels, std::size_t channels, std::size_t kernel, Rng& rng);
};

// i,f,o = sigmoid(Wx*x + Wh*h + b), g = tanh(...), c' = f c + i g,
// h' = o tanh(c'). Convolutions use "same" padding.
ConvLstmState conv_lstm_step(const Tensor& x, const ConvLstmState& state, const ConvLstmWeights& weights);

}  // namespace mov3d
