#include <gtest/gtest.h>

#include "mov3d/checkpoint.h"
#include "mov3d/error.h"
#include "mov3d/layers.h"
#include "mov3d/ops.h"
#include "mov3d/tensor.h"

using namespace mov3d;

TEST(TensorTest, ShapeAndDataAgree) {
    Tensor t({2, 3, 4}, 1.5);
    EXPECT_EQ(t.numel(), 24u);
    EXPECT_EQ(t.data().size(), 24u);
    EXPECT_EQ(t.rank(), 3u);
    EXPECT_DOUBLE_EQ(t[7], 1.5);
}

TEST(TensorTest, RejectsMismatchedValues) {
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
    EXPECT_THROW(Tensor(Shape{0, 2}), DimensionError);
    EXPECT_THROW(Tensor(Shape{}), DimensionError);
}

TEST(TensorTest, DefaultsToNoGrad) {
    Tensor t = Tensor::zeros({3});
    EXPECT_FALSE(t.requires_grad());
    EXPECT_FALSE(t.has_grad());
    t.set_requires_grad(true);
    EXPECT_TRUE(t.requires_grad());
}

TEST(TensorTest, IntermediatesAreImmutable) {
    Tensor a = Tensor::ones({2});
    a.set_requires_grad();
    Tensor b = add(a, a);
    EXPECT_THROW(b.mutable_data(), UsageError);
    EXPECT_THROW(b.set_requires_grad(false), UsageError);
}

TEST(TensorTest, NoGradGuardSkipsRecording) {
    Tensor a = Tensor::ones({2});
    a.set_requires_grad();
    {
        NoGradGuard guard;
        Tensor b = add(a, a);
        EXPECT_FALSE(b.requires_grad());
    }
    EXPECT_TRUE(add(a, a).requires_grad());
}

TEST(TensorTest, DetachCopiesValues) {
    Tensor a({2}, std::vector<double>{1.0, 2.0});
    a.set_requires_grad();
    Tensor d = scale(a, 3.0).detach();
    EXPECT_FALSE(d.requires_grad());
    EXPECT_DOUBLE_EQ(d[1], 6.0);
}

TEST(RngTest, ReproducibleStreams) {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
    Rng c(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = c.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        EXPECT_LT(c.below(5), 5u);
    }
}

TEST(RngTest, GlorotBound) {
    Rng rng(1);
    Tensor w = glorot_uniform({16, 8}, 8, 16, rng);
    const double bound = std::sqrt(6.0 / 24.0);
    for (double v : w.data()) EXPECT_LE(std::abs(v), bound);
}

TEST(CheckpointTest, EncodesNamedTensors) {
    std::vector<NamedTensor> in{{"a", Tensor({2, 3}, 0.25)}, {"layer.bias", Tensor({4}, -1.0)}};
    auto bytes = encode_checkpoint(in);
    ASSERT_GE(bytes.size(), 4u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "VXW1");
    auto out = decode_checkpoint(bytes);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[1].name, "layer.bias");
    EXPECT_EQ(out[0].tensor.shape(), (Shape{2, 3}));
    EXPECT_DOUBLE_EQ(out[1].tensor[3], -1.0);
}

TEST(CheckpointTest, RejectsCorruptContainers) {
    auto bytes = encode_checkpoint({{"w", Tensor({8}, 1.0)}});
    auto truncated = bytes;
    truncated.resize(truncated.size() - 3);
    EXPECT_THROW(decode_checkpoint(truncated), FormatError);
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_checkpoint(bad), FormatError);
}
