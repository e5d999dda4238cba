#include <gtest/gtest.h>

#include <functional>

#include "mov3d/error.h"
#include "mov3d/grad_check.h"
#include "mov3d/layers.h"
#include "mov3d/ops.h"

using namespace mov3d;

namespace {

constexpr double kLayerTol = 1e-4;
constexpr int kTrials = 10;

// Scalar probe: <out, r> for a fixed random r gives every output element
// a distinct weight in the gradient.
Tensor project(const Tensor& out, Rng& rng) {
    Tensor r = uniform_tensor(out.shape(), -1.0, 1.0, rng);
    return sum(mul(out, r));
}

using Fn = std::function<Tensor(const Tensor&)>;

void expect_grad_ok(const Fn& f, const Tensor& x, double tol = kLayerTol) {
    auto res = grad_check(f, x);
    EXPECT_LT(res.max_relative_error, tol) << "worst index " << res.worst_index << " ad=" << res.autodiff
                                           << " fd=" << res.finite_diff;
}

}  // namespace

TEST(BackwardTest, SumGivesOnes) {
    Tensor x = Tensor({5}, 3.0);
    x.set_requires_grad();
    sum(x).backward();
    for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(BackwardTest, MseIdentityClosedForm) {
    Rng rng(1);
    const std::size_t n = 6;
    std::vector<double> eye(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
    Tensor w(Shape{n, n}, eye);
    Tensor x = uniform_tensor({n}, -1, 1, rng);
    Tensor y = uniform_tensor({n}, -1, 1, rng);
    x.set_requires_grad();
    mse_loss(dense(x, w, Tensor()), y).backward();
    auto g = x.grad();
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(g[i], 2.0 * (x[i] - y[i]) / n, 1e-15);
}

TEST(BackwardTest, RepeatableAfterZeroGrad) {
    Rng rng(2);
    Tensor x = uniform_tensor({1, 6, 6}, -1, 1, rng);
    Tensor k = uniform_tensor({2, 1, 3, 3}, -1, 1, rng);
    k.set_requires_grad();
    auto run = [&] {
        k.zero_grad();
        mean(sigmoid(conv2d(x, k, Tensor(), 1, 1))).backward();
        return k.grad();
    };
    const auto g1 = run();
    const auto g2 = run();
    EXPECT_EQ(g1, g2);
}

TEST(BackwardTest, LeafGradientsAccumulate) {
    Tensor x = Tensor({3}, 2.0);
    x.set_requires_grad();
    Tensor loss = sum(mul(x, x));
    loss.backward();
    loss.backward();
    for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 8.0);
}

TEST(BackwardTest, GraphlessTensorIsUsageError) {
    Tensor x = Tensor::ones({1});
    EXPECT_THROW(x.backward(), UsageError);
    Tensor y = sum(Tensor::ones({3}));
    EXPECT_THROW(y.backward(), UsageError);
    Tensor z = Tensor::ones({2});
    z.set_requires_grad();
    EXPECT_THROW(scale(z, 2.0).backward(), UsageError);  // not scalar
}

TEST(BackwardTest, SharedSubexpressionsSumContributions) {
    Tensor x = Tensor::scalar(3.0);
    x.set_requires_grad();
    Tensor y = mul(x, x);
    add(y, y).backward();  // d/dx 2x^2 = 4x
    EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(GradCheckTest, SumOfSquares) {
    Rng rng(3);
    Tensor x = uniform_tensor({10}, -2, 2, rng);
    EXPECT_LT(grad_check_error([](const Tensor& t) { return sum(mul(t, t)); }, x), 1e-6);
}

TEST(GradCheckTest, Conv2dSigmoidMseStack) {
    Rng rng(4);
    Tensor k = uniform_tensor({2, 1, 3, 3}, -0.5, 0.5, rng);
    Tensor b = uniform_tensor({2}, -0.1, 0.1, rng);
    Tensor target = uniform_tensor({2, 8, 8}, 0, 1, rng);
    Tensor x = uniform_tensor({1, 8, 8}, -1, 1, rng);
    EXPECT_LT(grad_check_error([&](const Tensor& t) { return mse_loss(sigmoid(conv2d(t, k, b, 1, 1)), target); }, x),
              1e-4);
}

TEST(GradCheckTest, ConvLstmUnrolledThreeStepsBce) {
    Rng rng(5);
    auto w = ConvLstmWeights::init(1, 2, 3, rng);
    std::vector<Tensor> xs;
    for (int i = 0; i < 3; ++i) xs.push_back(uniform_tensor({1, 4, 4}, -1, 1, rng));
    Tensor ro = uniform_tensor({2 * 16}, -1, 1, rng);
    Tensor target({1}, 1.0);
    auto f = [&](const Tensor& first) {
        auto state = ConvLstmState::zeros(2, 4, 4);
        state = conv_lstm_step(first, state, w);
        for (int i = 1; i < 3; ++i) state = conv_lstm_step(xs[i], state, w);
        Tensor logit = sum(mul(flatten(state.hidden), ro));
        return bce_loss(reshape(sigmoid(logit), {1}), target);
    };
    EXPECT_LT(grad_check_error(f, xs[0]), 1e-4);
}

TEST(LayerGradTest, Conv2dInputKernelBias) {
    Rng rng(10);
    for (int t = 0; t < kTrials; ++t) {
        const std::size_t stride = 1 + t % 3, pad = t % 2;
        Tensor x = uniform_tensor({2, 7, 6}, -1, 1, rng);
        Tensor k = uniform_tensor({3, 2, 3, 3}, -1, 1, rng);
        Tensor b = uniform_tensor({3}, -1, 1, rng);
        Tensor r = uniform_tensor(conv2d(x, k, b, stride, pad).shape(), -1, 1, rng);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(conv2d(v, k, b, stride, pad), r)); }, x);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(conv2d(x, v, b, stride, pad), r)); }, k);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(conv2d(x, k, v, stride, pad), r)); }, b);
    }
}

TEST(LayerGradTest, Conv2dTranspose) {
    Rng rng(11);
    for (int t = 0; t < kTrials; ++t) {
        const std::size_t stride = 1 + t % 2, pad = t % 2;
        Tensor x = uniform_tensor({2, 3, 4}, -1, 1, rng);
        Tensor k = uniform_tensor({2, 3, 4, 4}, -1, 1, rng);
        Tensor b = uniform_tensor({3}, -1, 1, rng);
        Tensor r = uniform_tensor(conv2d_transpose(x, k, b, stride, pad).shape(), -1, 1, rng);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(conv2d_transpose(v, k, b, stride, pad), r)); }, x);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(conv2d_transpose(x, v, b, stride, pad), r)); }, k);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(conv2d_transpose(x, k, v, stride, pad), r)); }, b);
    }
}

TEST(LayerGradTest, Conv3dTranspose) {
    Rng rng(12);
    const std::size_t configs[4][3] = {{2, 1, 0}, {2, 2, 0}, {3, 2, 1}, {4, 2, 1}};
    for (int t = 0; t < kTrials; ++t) {
        const auto [k_ext, stride, pad] = configs[t % 4];
        Tensor x = uniform_tensor({2, 2, 2, 2}, -1, 1, rng);
        Tensor k = uniform_tensor({2, 2, k_ext, k_ext, k_ext}, -1, 1, rng);
        Tensor b = uniform_tensor({2}, -1, 1, rng);
        Tensor r = uniform_tensor(conv3d_transpose(x, k, b, stride, pad).shape(), -1, 1, rng);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(conv3d_transpose(v, k, b, stride, pad), r)); }, x);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(conv3d_transpose(x, v, b, stride, pad), r)); }, k);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(conv3d_transpose(x, k, v, stride, pad), r)); }, b);
    }
}

TEST(LayerGradTest, LayerNorm) {
    Rng rng(13);
    for (int t = 0; t < kTrials; ++t) {
        Tensor x = uniform_tensor({3, 4, 2}, -2, 2, rng);
        Tensor g = uniform_tensor({3}, 0.5, 1.5, rng);
        Tensor b = uniform_tensor({3}, -0.5, 0.5, rng);
        Tensor r = uniform_tensor(x.shape(), -1, 1, rng);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(layer_norm(v, g, b), r)); }, x);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(layer_norm(x, v, b), r)); }, g);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(layer_norm(x, g, v), r)); }, b);
    }
}

TEST(LayerGradTest, ConvLstmStep) {
    Rng rng(14);
    for (int t = 0; t < kTrials; ++t) {
        auto w = ConvLstmWeights::init(2, 2, 3, rng);
        ConvLstmState s{uniform_tensor({2, 3, 4}, -0.5, 0.5, rng), uniform_tensor({2, 3, 4}, -1, 1, rng)};
        Tensor x = uniform_tensor({2, 3, 4}, -1, 1, rng);
        Tensor rh = uniform_tensor({2, 3, 4}, -1, 1, rng);
        Tensor rc = uniform_tensor({2, 3, 4}, -1, 1, rng);
        auto probe = [&](const ConvLstmState& n) { return add(sum(mul(n.hidden, rh)), sum(mul(n.cell, rc))); };
        expect_grad_ok([&](const Tensor& v) { return probe(conv_lstm_step(v, s, w)); }, x);
        expect_grad_ok([&](const Tensor& v) { return probe(conv_lstm_step(x, ConvLstmState{v, s.cell}, w)); },
                       s.hidden);
        expect_grad_ok([&](const Tensor& v) { return probe(conv_lstm_step(x, ConvLstmState{s.hidden, v}, w)); },
                       s.cell);
        expect_grad_ok(
            [&](const Tensor& v) {
                ConvLstmWeights w2 = w;
                w2.hidden_kernel = v;
                return probe(conv_lstm_step(x, s, w2));
            },
            w.hidden_kernel);
    }
}

TEST(LayerGradTest, Dense) {
    Rng rng(15);
    for (int t = 0; t < kTrials; ++t) {
        Tensor x = uniform_tensor({5}, -1, 1, rng);
        Tensor w = uniform_tensor({3, 5}, -1, 1, rng);
        Tensor b = uniform_tensor({3}, -1, 1, rng);
        Tensor r = uniform_tensor({3}, -1, 1, rng);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(dense(v, w, b), r)); }, x);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(dense(x, v, b), r)); }, w);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(dense(x, w, v), r)); }, b);
    }
}

TEST(LayerGradTest, Activations) {
    Rng rng(16);
    for (int t = 0; t < kTrials; ++t) {
        Tensor x = uniform_tensor({12}, -3, 3, rng);
        // keep relu probes away from the kink
        for (auto& v : x.mutable_data()) {
            if (std::abs(v) < 1e-2) v = 0.5;
        }
        Tensor r = uniform_tensor({12}, -1, 1, rng);
        for (auto kind : {Activation::sigmoid, Activation::tanh, Activation::relu}) {
            expect_grad_ok([&](const Tensor& v) { return sum(mul(activate(v, kind), r)); }, x);
        }
    }
}

TEST(LayerGradTest, Losses) {
    Rng rng(17);
    for (int t = 0; t < kTrials; ++t) {
        Tensor p = uniform_tensor({9}, 0.05, 0.95, rng);
        Tensor q = uniform_tensor({9}, -1, 1, rng);
        std::vector<double> y(9);
        for (auto& v : y) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        Tensor target({9}, y);
        expect_grad_ok([&](const Tensor& v) { return bce_loss(v, target); }, p);
        expect_grad_ok([&](const Tensor& v) { return mse_loss(v, q); }, p);
        expect_grad_ok([&](const Tensor& v) { return softmax_cross_entropy(v, t % 9); }, q);
    }
}

TEST(LayerGradTest, FusionPrimitives) {
    Rng rng(18);
    for (int t = 0; t < kTrials; ++t) {
        Tensor x = uniform_tensor({10}, -2, 2, rng);
        Tensor r = uniform_tensor({10}, -1, 1, rng);
        Tensor r2 = uniform_tensor({2}, -1, 1, rng);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(l2_normalize(v), r)); }, x);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(signed_sqrt(v), r)); }, x);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(sum_pool(v, 5), r2)); }, x);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(softmax(v), r)); }, x);
        expect_grad_ok([&](const Tensor& v) { return sum(mul(concat({v, slice_leading(v, 2, 4)}), concat({r, r2}))); },
                       x);
    }
}
