#include "mov3d/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "mov3d/error.h"

namespace mov3d {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

using detail::Node;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
    if (!t.defined()) throw DimensionError(std::string(op) + ": " + what + " is undefined");
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                             ", got " + shape_str(t.shape()));
    }
}

const Node& parent(const Node& self, std::size_t i) { return *self.parents[i]; }

bool wants_grad(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

std::vector<double>& parent_grad(Node& self, std::size_t i) { return self.parents[i]->grad_buffer(); }

// Spatial geometry shared by the 2-D and 3-D window ops. 2-D ops use a
// unit depth axis with kernel 1, stride 1, padding 0.
struct WindowGeometry {
    std::size_t channels = 0;
    std::array<std::size_t, 3> in{};
    std::array<std::size_t, 3> kernel{};
    std::array<std::size_t, 3> stride{};
    std::array<std::size_t, 3> padding{};
    std::array<std::size_t, 3> out{};

    std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
    std::size_t in_volume() const { return in[0] * in[1] * in[2]; }
    std::size_t out_volume() const { return out[0] * out[1] * out[2]; }
};

// cols[(c, kz, ky, kx), (oz, oy, ox)] = in[c, oz*s - p + kz, ...] or 0.
void im2col(std::span<const double> in, const WindowGeometry& g, std::vector<double>& cols) {
    const std::size_t kvol = g.kernel_volume();
    const std::size_t ovol = g.out_volume();
    cols.assign(g.channels * kvol * ovol, 0.0);
    for (std::size_t c = 0; c < g.channels; ++c) {
        const double* src = in.data() + c * g.in_volume();
        for (std::size_t kz = 0; kz < g.kernel[0]; ++kz)
            for (std::size_t ky = 0; ky < g.kernel[1]; ++ky)
                for (std::size_t kx = 0; kx < g.kernel[2]; ++kx) {
                    const std::size_t row = ((c * g.kernel[0] + kz) * g.kernel[1] + ky) * g.kernel[2] + kx;
                    double* dst = cols.data() + row * ovol;
                    for (std::size_t oz = 0; oz < g.out[0]; ++oz) {
                        const auto iz = static_cast<std::ptrdiff_t>(oz * g.stride[0] + kz) -
                                        static_cast<std::ptrdiff_t>(g.padding[0]);
                        if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(g.in[0])) continue;
                        for (std::size_t oy = 0; oy < g.out[1]; ++oy) {
                            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride[1] + ky) -
                                            static_cast<std::ptrdiff_t>(g.padding[1]);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in[1])) continue;
                            const double* srow = src + (iz * g.in[1] + iy) * g.in[2];
                            double* drow = dst + (oz * g.out[1] + oy) * g.out[2];
                            for (std::size_t ox = 0; ox < g.out[2]; ++ox) {
                                const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride[2] + kx) -
                                                static_cast<std::ptrdiff_t>(g.padding[2]);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in[2])) continue;
                                drow[ox] = srow[ix];
                            }
                        }
                    }
                }
    }
}

// Adjoint of im2col: scatters column entries back, accumulating overlaps.
void col2im(std::span<const double> cols, const WindowGeometry& g, std::span<double> out) {
    const std::size_t ovol = g.out_volume();
    for (std::size_t c = 0; c < g.channels; ++c) {
        double* dst = out.data() + c * g.in_volume();
        for (std::size_t kz = 0; kz < g.kernel[0]; ++kz)
            for (std::size_t ky = 0; ky < g.kernel[1]; ++ky)
                for (std::size_t kx = 0; kx < g.kernel[2]; ++kx) {
                    const std::size_t row = ((c * g.kernel[0] + kz) * g.kernel[1] + ky) * g.kernel[2] + kx;
                    const double* src = cols.data() + row * ovol;
                    for (std::size_t oz = 0; oz < g.out[0]; ++oz) {
                        const auto iz = static_cast<std::ptrdiff_t>(oz * g.stride[0] + kz) -
                                        static_cast<std::ptrdiff_t>(g.padding[0]);
                        if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(g.in[0])) continue;
                        for (std::size_t oy = 0; oy < g.out[1]; ++oy) {
                            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride[1] + ky) -
                                            static_cast<std::ptrdiff_t>(g.padding[1]);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in[1])) continue;
                            double* drow = dst + (iz * g.in[1] + iy) * g.in[2];
                            const double* srow = src + (oz * g.out[1] + oy) * g.out[2];
                            for (std::size_t ox = 0; ox < g.out[2]; ++ox) {
                                const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride[2] + kx) -
                                                static_cast<std::ptrdiff_t>(g.padding[2]);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in[2])) continue;
                                drow[ix] += srow[ox];
                            }
                        }
                    }
                }
    }
}

void add_channel_bias(std::vector<double>& out, std::span<const double> bias, std::size_t per_channel) {
    for (std::size_t c = 0; c < bias.size(); ++c) {
        double* row = out.data() + c * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i) row[i] += bias[c];
    }
}

void accumulate_channel_sums(std::vector<double>& dbias, std::span<const double> grad, std::size_t per_channel) {
    for (std::size_t c = 0; c < dbias.size(); ++c) {
        const double* row = grad.data() + c * per_channel;
        double s = 0.0;
        for (std::size_t i = 0; i < per_channel; ++i) s += row[i];
        dbias[c] += s;
    }
}

void check_bias(const Tensor& bias, std::size_t channels, const char* op) {
    if (!bias.defined()) return;
    if (bias.rank() != 1 || bias.dim(0) != channels) {
        throw DimensionError(std::string(op) + ": bias must be [" + std::to_string(channels) + "], got " +
                             shape_str(bias.shape()));
    }
}

// Forward correlation over a WindowGeometry, returning output values.
Tensor correlate(const Tensor& input, const Tensor& kernel, const Tensor& bias, const WindowGeometry& g,
                 std::size_t out_channels, Shape out_shape) {
    auto cols = std::make_shared<std::vector<double>>();
    im2col(input.data(), g, *cols);
    const std::size_t krows = g.channels * g.kernel_volume();
    const std::size_t ovol = g.out_volume();
    std::vector<double> out(out_channels * ovol);
    MatMap(out.data(), out_channels, ovol).noalias() =
        ConstMatMap(kernel.data().data(), out_channels, krows) * ConstMatMap(cols->data(), krows, ovol);
    if (bias.defined()) add_channel_bias(out, bias.data(), ovol);

    std::vector<Tensor> inputs{input, kernel};
    if (bias.defined()) inputs.push_back(bias);
    return make_result(std::move(out_shape), std::move(out), std::move(inputs),
                       [g, cols, out_channels, krows, ovol](Node& self) {
                           ConstMatMap dout(self.grad.data(), out_channels, ovol);
                           if (wants_grad(self, 1)) {
                               auto& dk = parent_grad(self, 1);
                               MatMap(dk.data(), out_channels, krows).noalias() +=
                                   dout * ConstMatMap(cols->data(), krows, ovol).transpose();
                           }
                           if (wants_grad(self, 0)) {
                               std::vector<double> dcols(krows * ovol);
                               MatMap(dcols.data(), krows, ovol).noalias() =
                                   ConstMatMap(parent(self, 1).data.data(), out_channels, krows).transpose() *
                                   dout;
                               col2im(dcols, g, parent_grad(self, 0));
                           }
                           if (self.parents.size() > 2 && wants_grad(self, 2)) {
                               accumulate_channel_sums(parent_grad(self, 2), self.grad, ovol);
                           }
                       });
}

// Transposed correlation: `g` describes the forward conv mapping the
// (larger) output back onto the input.
Tensor correlate_transpose(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                           const WindowGeometry& g, std::size_t in_channels, Shape out_shape) {
    const std::size_t out_channels = g.channels;
    const std::size_t krows = out_channels * g.kernel_volume();
    const std::size_t positions = g.out_volume();  // == input spatial volume
    std::vector<double> cols(krows * positions);
    MatMap(cols.data(), krows, positions).noalias() =
        ConstMatMap(kernel.data().data(), in_channels, krows).transpose() *
        ConstMatMap(input.data().data(), in_channels, positions);
    std::vector<double> out(out_channels * g.in_volume(), 0.0);
    col2im(cols, g, out);
    if (bias.defined()) add_channel_bias(out, bias.data(), g.in_volume());

    std::vector<Tensor> inputs{input, kernel};
    if (bias.defined()) inputs.push_back(bias);
    return make_result(std::move(out_shape), std::move(out), std::move(inputs),
                       [g, in_channels, krows, positions](Node& self) {
                           std::vector<double> dcols;
                           im2col(self.grad, g, dcols);
                           ConstMatMap dcm(dcols.data(), krows, positions);
                           if (wants_grad(self, 0)) {
                               auto& dx = parent_grad(self, 0);
                               MatMap(dx.data(), in_channels, positions).noalias() +=
                                   ConstMatMap(parent(self, 1).data.data(), in_channels, krows) * dcm;
                           }
                           if (wants_grad(self, 1)) {
                               auto& dk = parent_grad(self, 1);
                               MatMap(dk.data(), in_channels, krows).noalias() +=
                                   ConstMatMap(parent(self, 0).data.data(), in_channels, positions) *
                                   dcm.transpose();
                           }
                           if (self.parents.size() > 2 && wants_grad(self, 2)) {
                               accumulate_channel_sums(parent_grad(self, 2), self.grad, g.in_volume());
                           }
                       });
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
    auto src = x.data();
    std::vector<double> out(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = fwd(src[i]);
    return make_result(x.shape(), std::move(out), {x}, [deriv](Node& self) {
        auto& dx = parent_grad(self, 0);
        const auto& xin = parent(self, 0).data;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i] * deriv(xin[i], self.data[i]);
    });
}

}  // namespace

std::size_t conv_output_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw ConfigurationError("stride must be positive");
    if (k == 0) throw ConfigurationError("kernel extent must be positive");
    if (n + 2 * padding < k) {
        throw ConfigurationError("kernel extent " + std::to_string(k) + " exceeds padded input " +
                                 std::to_string(n + 2 * padding));
    }
    return (n + 2 * padding - k) / stride + 1;
}

std::size_t transpose_output_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw ConfigurationError("stride must be positive");
    const auto full = static_cast<std::ptrdiff_t>((n - 1) * stride + k);
    const auto extent = full - 2 * static_cast<std::ptrdiff_t>(padding);
    if (n == 0 || k == 0 || extent < 1) {
        throw ConfigurationError("transposed conv output extent " + std::to_string(extent) + " < 1");
    }
    return static_cast<std::size_t>(extent);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto x = a.data(), y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            if (!wants_grad(self, p)) continue;
            auto& g = parent_grad(self, p);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto x = a.data(), y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        if (wants_grad(self, 0)) {
            auto& g = parent_grad(self, 0);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants_grad(self, 1)) {
            auto& g = parent_grad(self, 1);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto x = a.data(), y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        const auto& xa = parent(self, 0).data;
        const auto& xb = parent(self, 1).data;
        if (wants_grad(self, 0)) {
            auto& g = parent_grad(self, 0);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * xb[i];
        }
        if (wants_grad(self, 1)) {
            auto& g = parent_grad(self, 1);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * xa[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
    return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
        auto& g = parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_result(Shape{1}, {s}, {a}, [](Node& self) {
        auto& g = parent_grad(self, 0);
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw DimensionError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    return make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
        auto& g = parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor flatten(const Tensor& a) { return reshape(a, Shape{a.numel()}); }

Tensor slice_leading(const Tensor& a, std::size_t begin, std::size_t end) {
    const auto& s = a.shape();
    if (begin >= end || end > s[0]) {
        throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                             shape_str(s));
    }
    const std::size_t row = a.numel() / s[0];
    Shape out_shape = s;
    out_shape[0] = end - begin;
    std::vector<double> out(a.data().begin() + begin * row, a.data().begin() + end * row);
    const std::size_t offset = begin * row;
    return make_result(std::move(out_shape), std::move(out), {a}, [offset](Node& self) {
        auto& g = parent_grad(self, 0);
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    std::vector<double> out;
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    const std::size_t n = out.size();
    return make_result(Shape{n}, std::move(out), parts, [](Node& self) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            const std::size_t len = self.parents[p]->data.size();
            if (wants_grad(self, p)) {
                auto& g = parent_grad(self, p);
                for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[offset + i];
            }
            offset += len;
        }
    });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x,
        [](double v) {
            // Branches keep exp() from overflowing for large |v|.
            if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                 [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor activate(const Tensor& x, Activation kind) {
    switch (kind) {
        case Activation::sigmoid: return sigmoid(x);
        case Activation::tanh: return tanh(x);
        case Activation::relu: return relu(x);
    }
    throw ValidationError("unknown activation");
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    require_rank(input, 3, "conv2d", "input");
    require_rank(kernel, 4, "conv2d", "kernel");
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (ks[1] != is[0]) {
        throw DimensionError("conv2d: kernel expects " + std::to_string(ks[1]) + " input channels, input has " +
                             std::to_string(is[0]));
    }
    check_bias(bias, ks[0], "conv2d");
    WindowGeometry g;
    g.channels = is[0];
    g.in = {1, is[1], is[2]};
    g.kernel = {1, ks[2], ks[3]};
    g.stride = {1, stride, stride};
    g.padding = {0, padding, padding};
    g.out = {1, conv_output_extent(is[1], ks[2], stride, padding), conv_output_extent(is[2], ks[3], stride, padding)};
    return correlate(input, kernel, bias, g, ks[0], Shape{ks[0], g.out[1], g.out[2]});
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                        std::size_t padding) {
    require_rank(input, 3, "conv2d_transpose", "input");
    require_rank(kernel, 4, "conv2d_transpose", "kernel");
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (ks[0] != is[0]) {
        throw DimensionError("conv2d_transpose: kernel expects " + std::to_string(ks[0]) +
                             " input channels, input has " + std::to_string(is[0]));
    }
    check_bias(bias, ks[1], "conv2d_transpose");
    WindowGeometry g;
    g.channels = ks[1];
    g.in = {1, transpose_output_extent(is[1], ks[2], stride, padding),
            transpose_output_extent(is[2], ks[3], stride, padding)};
    g.kernel = {1, ks[2], ks[3]};
    g.stride = {1, stride, stride};
    g.padding = {0, padding, padding};
    g.out = {1, is[1], is[2]};
    return correlate_transpose(input, kernel, bias, g, is[0], Shape{ks[1], g.in[1], g.in[2]});
}

Tensor conv3d_transpose(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
    return conv3d_transpose(input, kernel, Tensor(), stride, padding);
}

Tensor conv3d_transpose(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                        std::size_t padding) {
    require_rank(input, 4, "conv3d_transpose", "input");
    require_rank(kernel, 5, "conv3d_transpose", "kernel");
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (ks[0] != is[0]) {
        throw DimensionError("conv3d_transpose: kernel expects " + std::to_string(ks[0]) +
                             " input channels, input has " + std::to_string(is[0]));
    }
    check_bias(bias, ks[1], "conv3d_transpose");
    WindowGeometry g;
    g.channels = ks[1];
    for (std::size_t a = 0; a < 3; ++a) {
        g.in[a] = transpose_output_extent(is[a + 1], ks[a + 2], stride, padding);
        g.kernel[a] = ks[a + 2];
        g.stride[a] = stride;
        g.padding[a] = padding;
        g.out[a] = is[a + 1];
    }
    return correlate_transpose(input, kernel, bias, g, is[0], Shape{ks[1], g.in[0], g.in[1], g.in[2]});
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
    if (!x.defined() || x.numel() == 0) throw DimensionError("layer_norm: zero features");
    const std::size_t groups = x.dim(0);
    for (const Tensor* t : {&gain, &bias}) {
        if (!t->defined() || t->rank() != 1 || t->dim(0) != groups) {
            throw DimensionError("layer_norm: gain/bias must be [" + std::to_string(groups) + "]");
        }
    }
    const std::size_t m = x.numel();
    const std::size_t per = m / groups;
    auto xs = x.data();
    double mu = 0.0;
    for (double v : xs) mu += v;
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (double v : xs) var += (v - mu) * (v - mu);
    var /= static_cast<double>(m);
    const double denom = var + epsilon;
    const double inv_std = denom > 0.0 ? 1.0 / std::sqrt(denom) : 0.0;

    auto xhat = std::make_shared<std::vector<double>>(m);
    std::vector<double> out(m);
    auto gs = gain.data(), bs = bias.data();
    for (std::size_t c = 0; c < groups; ++c) {
        for (std::size_t i = c * per; i < (c + 1) * per; ++i) {
            (*xhat)[i] = (xs[i] - mu) * inv_std;
            out[i] = gs[c] * (*xhat)[i] + bs[c];
        }
    }
    return make_result(x.shape(), std::move(out), {x, gain, bias}, [xhat, inv_std, groups, per](Node& self) {
        const auto& gv = parent(self, 1).data;
        const std::size_t n = xhat->size();
        if (wants_grad(self, 0)) {
            std::vector<double> dxhat(n);
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t c = 0; c < groups; ++c) {
                for (std::size_t i = c * per; i < (c + 1) * per; ++i) {
                    dxhat[i] = self.grad[i] * gv[c];
                    mean_d += dxhat[i];
                    mean_dx += dxhat[i] * (*xhat)[i];
                }
            }
            mean_d /= static_cast<double>(n);
            mean_dx /= static_cast<double>(n);
            auto& dx = parent_grad(self, 0);
            for (std::size_t i = 0; i < n; ++i) dx[i] += inv_std * (dxhat[i] - mean_d - (*xhat)[i] * mean_dx);
        }
        if (wants_grad(self, 1)) {
            auto& dg = parent_grad(self, 1);
            for (std::size_t c = 0; c < groups; ++c) {
                double s = 0.0;
                for (std::size_t i = c * per; i < (c + 1) * per; ++i) s += self.grad[i] * (*xhat)[i];
                dg[c] += s;
            }
        }
        if (wants_grad(self, 2)) accumulate_channel_sums(parent_grad(self, 2), self.grad, per);
    });
}

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(weight, 2, "dense", "weight");
    if (!x.defined()) throw DimensionError("dense: input is undefined");
    const std::size_t m = weight.dim(0), n = weight.dim(1);
    if (x.numel() != n || x.rank() != 1) {
        throw DimensionError("dense: weight " + shape_str(weight.shape()) + " cannot apply to " +
                             shape_str(x.shape()));
    }
    check_bias(bias, m, "dense");
    std::vector<double> out(m);
    VecMap(out.data(), m).noalias() = ConstMatMap(weight.data().data(), m, n) * ConstVecMap(x.data().data(), n);
    if (bias.defined()) {
        auto b = bias.data();
        for (std::size_t i = 0; i < m; ++i) out[i] += b[i];
    }
    std::vector<Tensor> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    return make_result(Shape{m}, std::move(out), std::move(inputs), [m, n](Node& self) {
        ConstVecMap dy(self.grad.data(), m);
        if (wants_grad(self, 0)) {
            auto& dx = parent_grad(self, 0);
            VecMap(dx.data(), n).noalias() += ConstMatMap(parent(self, 1).data.data(), m, n).transpose() * dy;
        }
        if (wants_grad(self, 1)) {
            auto& dw = parent_grad(self, 1);
            MatMap(dw.data(), m, n).noalias() += dy * ConstVecMap(parent(self, 0).data.data(), n).transpose();
        }
        if (self.parents.size() > 2 && wants_grad(self, 2)) {
            auto& db = parent_grad(self, 2);
            for (std::size_t i = 0; i < m; ++i) db[i] += self.grad[i];
        }
    });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse_loss");
    auto p = pred.data(), t = target.data();
    const double n = static_cast<double>(p.size());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
    return make_result(Shape{1}, {s / n}, {pred, target}, [n](Node& self) {
        const auto& pv = parent(self, 0).data;
        const auto& tv = parent(self, 1).data;
        const double g = self.grad[0] * 2.0 / n;
        if (wants_grad(self, 0)) {
            auto& dp = parent_grad(self, 0);
            for (std::size_t i = 0; i < dp.size(); ++i) dp[i] += g * (pv[i] - tv[i]);
        }
        if (wants_grad(self, 1)) {
            auto& dt = parent_grad(self, 1);
            for (std::size_t i = 0; i < dt.size(); ++i) dt[i] -= g * (pv[i] - tv[i]);
        }
    });
}

Tensor bce_loss(const Tensor& pred, const Tensor& target, double clamp) {
    require_same_shape(pred, target, "bce_loss");
    auto p = pred.data(), t = target.data();
    for (double y : t) {
        if (y != 0.0 && y != 1.0) throw ValidationError("bce_loss: target values must be 0 or 1");
    }
    const double n = static_cast<double>(p.size());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], clamp, 1.0 - clamp);
        s -= t[i] > 0.5 ? std::log(q) : std::log(1.0 - q);
    }
    return make_result(Shape{1}, {s / n}, {pred, target}, [n, clamp](Node& self) {
        const auto& pv = parent(self, 0).data;
        const auto& tv = parent(self, 1).data;
        auto& dp = parent_grad(self, 0);
        const double g = self.grad[0] / n;
        for (std::size_t i = 0; i < dp.size(); ++i) {
            if (pv[i] < clamp || pv[i] > 1.0 - clamp) continue;  // flat inside the clamp
            dp[i] += g * (tv[i] > 0.5 ? -1.0 / pv[i] : 1.0 / (1.0 - pv[i]));
        }
    });
}

Tensor softmax(const Tensor& logits) {
    auto z = logits.data();
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    std::vector<double> out(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) total += (out[i] = std::exp(z[i] - zmax));
    for (auto& v : out) v /= total;
    return make_result(logits.shape(), std::move(out), {logits}, [](Node& self) {
        double dot = 0.0;
        for (std::size_t i = 0; i < self.data.size(); ++i) dot += self.grad[i] * self.data[i];
        auto& g = parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.data[i] * (self.grad[i] - dot);
    });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label) {
    if (label >= logits.numel()) throw ValidationError("softmax_cross_entropy: label out of range");
    auto z = logits.data();
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    auto probs = std::make_shared<std::vector<double>>(z.size());
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) total += ((*probs)[i] = std::exp(z[i] - zmax));
    for (auto& v : *probs) v /= total;
    const double loss = -(z[label] - zmax - std::log(total));
    return make_result(Shape{1}, {loss}, {logits}, [probs, label](Node& self) {
        auto& g = parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[0] * ((*probs)[i] - (i == label ? 1.0 : 0.0));
        }
    });
}

Tensor sum_pool(const Tensor& x, std::size_t window) {
    if (window == 0 || x.numel() % window != 0) {
        throw DimensionError("sum_pool: window " + std::to_string(window) + " does not divide " +
                             std::to_string(x.numel()));
    }
    auto xs = x.data();
    const std::size_t n = xs.size() / window;
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < xs.size(); ++i) out[i / window] += xs[i];
    return make_result(Shape{n}, std::move(out), {x}, [window](Node& self) {
        auto& g = parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i / window];
    });
}

Tensor signed_sqrt(const Tensor& x, double eps) {
    const double root_eps = std::sqrt(eps);
    return unary(
        x,
        [eps, root_eps](double v) {
            const double r = std::sqrt(std::abs(v) + eps) - root_eps;
            return v < 0 ? -r : r;
        },
        [eps](double v, double) { return 0.5 / std::sqrt(std::abs(v) + eps); });
}

Tensor l2_normalize(const Tensor& x, double eps) {
    auto xs = x.data();
    double ss = 0.0;
    for (double v : xs) ss += v * v;
    const double norm = std::sqrt(ss + eps);
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] / norm;
    return make_result(x.shape(), std::move(out), {x}, [norm](Node& self) {
        double dot = 0.0;
        for (std::size_t i = 0; i < self.data.size(); ++i) dot += self.grad[i] * self.data[i];
        auto& g = parent_grad(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += (self.grad[i] - self.data[i] * dot) / norm;
    });
}

}  // namespace mov3d
