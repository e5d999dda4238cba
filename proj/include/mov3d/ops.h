#pragma once

#include <cstddef>
#include <vector>

#include "mov3d/tensor.h"

namespace mov3d {

// Elementwise arithmetic; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);
// Contiguous rows [begin, end) along the leading axis.
Tensor slice_leading(const Tensor& a, std::size_t begin, std::size_t end);
// Flattens and joins inputs end to end.
Tensor concat(const std::vector<Tensor>& parts);

enum class Activation { sigmoid, tanh, relu };
Tensor activate(const Tensor& x, Activation kind);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

// Cross-correlation. input [Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout]
// or undefined. Output [Cout, (H+2p-kh)/s+1, (W+2p-kw)/s+1].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

// Adjoint of conv2d. input [Cin,H,W], kernel [Cin,Cout,kh,kw].
// Output extent (H-1)s + kh - 2p.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        std::size_t stride, std::size_t padding);

// Each input voxel scatters its kernel-weighted copy into the output,
// overlaps accumulate, then `padding` voxels are cropped from every face.
// input [Cin,D,H,W], kernel [Cin,Cout,kd,kh,kw]; output extent (D-1)s+kd-2p.
Tensor conv3d_transpose(const Tensor& input, const Tensor& kernel, std::size_t stride,
                        std::size_t padding);
Tensor conv3d_transpose(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        std::size_t stride, std::size_t padding);

inline constexpr double kLayerNormEpsilon = 1e-5;

// Normalizes over every element of x, then applies gain/bias. gain and bias
// have extent [x.dim(0)] and broadcast over the trailing axes.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double epsilon = kLayerNormEpsilon);

// y = W x + b for x [n], W [m,n], b [m] (b may be undefined).
Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias);

inline constexpr double kBceClamp = 1e-7;

Tensor mse_loss(const Tensor& pred, const Tensor& target);
// pred holds probabilities; target must be exactly 0 or 1 per element.
Tensor bce_loss(const Tensor& pred, const Tensor& target, double clamp = kBceClamp);

Tensor softmax(const Tensor& logits);
// -log softmax(logits)[label]
Tensor softmax_cross_entropy(const Tensor& logits, std::size_t label);

// Sums non-overlapping windows of a 1-D tensor; numel must divide evenly.
Tensor sum_pool(const Tensor& x, std::size_t window);
// sign(x) * (sqrt(|x| + eps) - sqrt(eps)): finite slope at the origin.
Tensor signed_sqrt(const Tensor& x, double eps = 1e-8);
Tensor l2_normalize(const Tensor& x, double eps = 1e-12);

// Output extent of a strided window op: floor((n + 2p - k) / s) + 1.
// Throws ConfigurationError when the padded input is smaller than the kernel.
std::size_t conv_output_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t padding);
// (n - 1) s + k - 2p; throws ConfigurationError when < 1.
std::size_t transpose_output_extent(std::size_t n, std::size_t k, std::size_t stride,
                                    std::size_t padding);

}  // namespace mov3d
