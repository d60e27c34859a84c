#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "glpe/ops.hpp"
#include "glpe/tensor.hpp"

using namespace glpe;

TEST(TensorCtor, ShapeAndDataValidation) {
    Tensor ok({2, 3}, 0.5);
    EXPECT_EQ(ok.rank(), 2);
    EXPECT_EQ(ok.size(), 6);
    EXPECT_EQ(ok.dim(1), 3);
    EXPECT_THROW(Tensor({}, 1.0), DimensionError);
    EXPECT_THROW(Tensor({2, 2, 2, 2}, 1.0), DimensionError);
    EXPECT_THROW(Tensor({-1}, 1.0), DimensionError);
    EXPECT_THROW(Tensor({2}, {1.0, 2.0, 3.0}), DimensionError);
    EXPECT_THROW(Tensor({2}, std::numeric_limits<double>::quiet_NaN()), NumericError);
    EXPECT_THROW(Tensor({2}, {1.0, std::numeric_limits<double>::infinity()}),
                 NumericError);
}

TEST(TensorAccess, ItemAndAt) {
    Tensor s = Tensor::scalar(2.5);
    EXPECT_EQ(s.item(), 2.5);
    Tensor m({2, 3}, {0, 1, 2, 3, 4, 5});
    EXPECT_EQ(m.at({0, 0}), 0.0);
    EXPECT_EQ(m.at({1, 2}), 5.0);
    EXPECT_THROW(m.item(), DimensionError);
    EXPECT_THROW(m.at({2, 0}), DimensionError);
    EXPECT_THROW(m.at({0, -1}), DimensionError);
    EXPECT_THROW(m.at({0}), DimensionError);
    Tensor z = Tensor::zeros({4});
    for (long i = 0; i < 4; ++i) EXPECT_EQ(z.at({i}), 0.0);
}

TEST(TensorGrad, LifecycleAndAccumulation) {
    Tensor x({2}, {1.0, 2.0}, true);
    EXPECT_TRUE(x.requires_grad());
    EXPECT_FALSE(x.has_grad());
    EXPECT_TRUE(x.grad().empty());
    x.ensure_grad();
    EXPECT_TRUE(x.has_grad());
    EXPECT_EQ(x.grad()[0], 0.0);
    x.grad_raw()[0] = 3.0;
    x.zero_grad();
    EXPECT_EQ(x.grad()[0], 0.0);

    // Copies alias the same storage.
    Tensor alias = x;
    alias.raw()[1] = 9.0;
    EXPECT_EQ(x.at({1}), 9.0);
}

TEST(Autograd, BackwardAccumulatesAcrossCalls) {
    Tensor x({2}, {3.0, -1.5}, true);
    Tape tape;
    tape.activate();
    Tensor y = ops::sum_all(ops::mul(x, x));
    tape.backward(y);
    EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], -3.0);
    // Replaying without clearing compounds: the loss seed becomes 2 and the
    // intermediate buffers still hold the first pass, so dx += 2x * 3.
    tape.backward(y);
    EXPECT_DOUBLE_EQ(x.grad()[0], 24.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], -12.0);
    tape.deactivate();
}

TEST(Autograd, BackwardWantsScalar) {
    Tensor x({3}, 1.0, true);
    Tape tape;
    tape.activate();
    Tensor y = ops::mul(x, x);
    EXPECT_THROW(tape.backward(y), DimensionError);
    tape.deactivate();
}

TEST(Autograd, NoGradGuardSuppressesRecording) {
    Tensor x({2}, {1.0, 2.0}, true);
    Tape tape;
    tape.activate();
    {
        NoGradGuard guard;
        EXPECT_FALSE(grad_enabled());
        Tensor y = ops::mul(x, x);
        EXPECT_FALSE(y.requires_grad());
    }
    EXPECT_TRUE(grad_enabled());
    EXPECT_EQ(tape.size(), 0u);
    Tensor z = ops::sum_all(x);
    EXPECT_GT(tape.size(), 0u);
    tape.backward(z);
    EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
    tape.deactivate();
}

TEST(Autograd, UnusedBranchesLeaveNoGradient) {
    Tensor x({2}, {1.0, 2.0}, true);
    Tensor w({2}, {5.0, 7.0}, true);
    Tape tape;
    tape.activate();
    Tensor used = ops::sum_all(ops::mul(x, x));
    Tensor unused = ops::mul(w, x);
    (void)unused;
    tape.backward(used);
    tape.deactivate();
    EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
    // w only feeds the dead branch; replay must not touch it.
    EXPECT_FALSE(w.has_grad());
}

TEST(Autograd, OpsRaiseOnNonFiniteResults) {
    Tensor big({1}, {1e308});
    EXPECT_THROW(ops::mul(big, big), NumericError);
    Tensor z({1}, {0.0});
    Tensor one({1}, {1.0});
    EXPECT_NO_THROW(ops::mul(z, one));
}

TEST(Tape, SingleActiveWriterRule) {
    Tape a, b;
    a.activate();
    EXPECT_THROW(b.activate(), StateError);
    a.deactivate();
    EXPECT_NO_THROW(b.activate());
    b.deactivate();
    EXPECT_EQ(Tape::active(), nullptr);
}

TEST(Tape, ClearDropsNodes) {
    Tensor x({2}, {1.0, 2.0}, true);
    Tape tape;
    tape.activate();
    Tensor y = ops::sum_all(x);
    EXPECT_GT(tape.size(), 0u);
    tape.clear();
    EXPECT_EQ(tape.size(), 0u);
    tape.deactivate();
    (void)y;
}
