#include "mov3d/layers.h"

#include <cmath>
#include <numbers>

#include "mov3d/error.h"

namespace mov3d {

double Rng::normal() {
    // Box-Muller; u1 in (0, 1] keeps the log finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
    return t;
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform_tensor(std::move(shape), -bound, bound, rng);
}

ConvLstmState ConvLstmState::zeros(std::size_t channels, std::size_t height, std::size_t width) {
    ConvLstmState s{Tensor::zeros({channels, height, width}), Tensor::zeros({channels, height, width})};
    s.fresh = true;
    return s;
}

ConvLstmWeights ConvLstmWeights::init(std::size_t in_channels, std::size_t channels, std::size_t kernel,
                                      Rng& rng) {
    const std::size_t k2 = kernel * kernel;
    ConvLstmWeights w;
    w.input_kernel = glorot_uniform({4 * channels, in_channels, kernel, kernel}, in_channels * k2,
                                    4 * channels * k2, rng);
    w.hidden_kernel =
        glorot_uniform({4 * channels, channels, kernel, kernel}, channels * k2, 4 * channels * k2, rng);
    w.bias = Tensor::zeros({4 * channels});
    auto b = w.bias.mutable_data();
    for (std::size_t c = channels; c < 2 * channels; ++c) b[c] = 1.0;
    return w;
}

ConvLstmState conv_lstm_step(const Tensor& x, const ConvLstmState& state, const ConvLstmWeights& weights) {
    if (x.rank() != 3 || state.hidden.rank() != 3) throw DimensionError("conv_lstm_step: expected [C,H,W] tensors");
    if (state.hidden.shape() != state.cell.shape()) {
        throw DimensionError("conv_lstm_step: hidden and cell shapes differ");
    }
    if (x.dim(1) != state.hidden.dim(1) || x.dim(2) != state.hidden.dim(2)) {
        throw DimensionError("conv_lstm_step: input spatial dims " + shape_str(x.shape()) +
                             " differ from state " + shape_str(state.hidden.shape()));
    }
    const std::size_t c = weights.channels();
    if (state.hidden.dim(0) != c) throw DimensionError("conv_lstm_step: state channels do not match weights");
    const std::size_t k = weights.kernel_size();
    if (k % 2 == 0) throw ConfigurationError("conv_lstm_step: kernel must be odd for same padding");
    const std::size_t pad = k / 2;

    Tensor gates = conv2d(x, weights.input_kernel, weights.bias, 1, pad);
    if (!state.fresh) gates = add(gates, conv2d(state.hidden, weights.hidden_kernel, Tensor(), 1, pad));

    const Tensor i = sigmoid(slice_leading(gates, 0, c));
    const Tensor f = sigmoid(slice_leading(gates, c, 2 * c));
    const Tensor o = sigmoid(slice_leading(gates, 2 * c, 3 * c));
    const Tensor g = tanh(slice_leading(gates, 3 * c, 4 * c));

    Tensor cell = mul(i, g);
    if (!state.fresh) cell = add(mul(f, state.cell), cell);
    ConvLstmState next;
    next.hidden = mul(o, tanh(cell));
    next.cell = cell;
    return next;
}

}  // namespace mov3d
