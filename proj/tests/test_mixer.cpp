#include <gtest/gtest.h>

#include <cmath>

#include "glpe/mixer.hpp"
#include "glpe/ops.hpp"

using namespace glpe;

namespace {

Tensor rand_t(Rng& rng, Dims dims, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(dims), 0.0);
    rng.fill_uniform(t.raw(), lo, hi);
    return t;
}

}  // namespace

TEST(Vdn, ExactSum) {
    Rng rng(3);
    VdnMixer vdn;
    for (int k = 0; k < 50; ++k) {
        Tensor q = rand_t(rng, {4, 5}, -10, 10);
        Tensor s = rand_t(rng, {4, 7});
        Tensor tot = vdn.mix(q, s);
        ASSERT_EQ(tot.rank(), 1);
        ASSERT_EQ(tot.dim(0), 4);
        for (long b = 0; b < 4; ++b) {
            double sum = 0.0;
            for (long i = 0; i < 5; ++i) sum += q.at({b, i});
            EXPECT_NEAR(tot.at({b}), sum, 1e-12);
        }
    }
    EXPECT_EQ(vdn.param_count(), 0);
    EXPECT_EQ(vdn.kind(), "vdn");
}

TEST(Vdn, GradientIsOne) {
    VdnMixer vdn;
    Tensor q({2, 3}, {1., 2., 3., 4., 5., 6.}, true);
    Tensor s({2, 4}, 0.0);
    Tape tape;
    tape.activate();
    Tensor loss = ops::sum_all(vdn.mix(q, s));
    tape.backward(loss);
    tape.deactivate();
    for (double g : q.grad()) EXPECT_DOUBLE_EQ(g, 1.0);
}

TEST(Qmix, OutputShapeAndDimChecks) {
    Rng rng(5);
    QmixMixer mixer(3, 8);
    mixer.init(rng);
    Tensor q = rand_t(rng, {4, 3});
    Tensor s = rand_t(rng, {4, 8});
    Tensor tot = mixer.mix(q, s);
    ASSERT_EQ(tot.rank(), 1);
    EXPECT_EQ(tot.dim(0), 4);
    EXPECT_THROW(mixer.mix(rand_t(rng, {4, 2}), s), DimensionError);
    EXPECT_THROW(mixer.mix(q, rand_t(rng, {4, 7})), DimensionError);
    EXPECT_THROW(mixer.mix(q, rand_t(rng, {3, 8})), DimensionError);
    EXPECT_THROW(QmixMixer(0, 8), DimensionError);
}

TEST(Qmix, MonotoneInEveryAgentUtility) {
    Rng rng(7);
    QmixMixer mixer(4, 10);
    mixer.init(rng);
    const double delta = 1e-3;
    for (int probe = 0; probe < 100; ++probe) {
        Tensor q = rand_t(rng, {1, 4}, -2, 2);
        Tensor s = rand_t(rng, {1, 10});
        double base = mixer.mix(q, s).item();
        for (long i = 0; i < 4; ++i) {
            Tensor q2({1, 4}, std::vector<double>(q.data().begin(), q.data().end()));
            q2.raw()[static_cast<size_t>(i)] += delta;
            EXPECT_GE(mixer.mix(q2, s).item(), base);
        }
    }
}

TEST(Qmix, AnalyticGradientNonNegative) {
    Rng rng(11);
    QmixMixer mixer(3, 6);
    mixer.init(rng);
    for (int probe = 0; probe < 20; ++probe) {
        Tensor q = rand_t(rng, {2, 3}, -2, 2);
        q.set_requires_grad(true);
        q.zero_grad();
        Tensor s = rand_t(rng, {2, 6});
        Tape tape;
        tape.activate();
        Tensor loss = ops::sum_all(mixer.mix(q, s));
        tape.backward(loss);
        tape.deactivate();
        for (double g : q.grad()) EXPECT_GE(g, 0.0);
    }
}

TEST(Qmix, StateDependenceAndDeterminism) {
    Rng rng(13);
    QmixMixer mixer(3, 6);
    mixer.init(rng);
    Tensor q = rand_t(rng, {1, 3});
    Tensor s1 = rand_t(rng, {1, 6});
    Tensor s2 = rand_t(rng, {1, 6});
    EXPECT_EQ(mixer.mix(q, s1).item(), mixer.mix(q, s1).item());
    EXPECT_NE(mixer.mix(q, s1).item(), mixer.mix(q, s2).item());
}

TEST(Qmix, CloneAndParamCopy) {
    Rng rng(17);
    QmixMixer mixer(3, 6);
    mixer.init(rng);
    auto copy = mixer.clone();
    Tensor q = rand_t(rng, {2, 3});
    Tensor s = rand_t(rng, {2, 6});
    Tensor a = mixer.mix(q, s), b = copy->mix(q, s);
    for (long i = 0; i < a.size(); ++i)
        EXPECT_EQ(a.data()[static_cast<size_t>(i)], b.data()[static_cast<size_t>(i)]);
    // Clone owns its parameters.
    copy->parameters()[0].raw()[0] += 1.0;
    Tensor c = mixer.mix(q, s);
    for (long i = 0; i < a.size(); ++i)
        EXPECT_EQ(a.data()[static_cast<size_t>(i)], c.data()[static_cast<size_t>(i)]);
    // copy_params_from restores agreement.
    mixer.init(rng);
    copy->copy_params_from(mixer);
    Tensor d = mixer.mix(q, s), e = copy->mix(q, s);
    for (long i = 0; i < d.size(); ++i)
        EXPECT_EQ(d.data()[static_cast<size_t>(i)], e.data()[static_cast<size_t>(i)]);
}

TEST(Qmix, ParamCountMatchesNamedSizes) {
    QmixMixer mixer(4, 12, 32, 64);
    long total = 0;
    for (const auto& p : mixer.named_parameters()) total += p.tensor.size();
    EXPECT_EQ(total, mixer.param_count());
    // hyper_w1: 12*64+64 + 64*(4*32)+4*32; hyper_w2: 12*64+64 + 64*32+32;
    // hyper_b1: 12*32+32; value: 12*64+64 + 64*1+1
    long expect = (12 * 64 + 64) + (64 * 128 + 128) + (12 * 64 + 64) + (64 * 32 + 32) +
                  (12 * 32 + 32) + (12 * 64 + 64) + (64 + 1);
    EXPECT_EQ(mixer.param_count(), expect);
}

TEST(MakeMixer, KindsAndErrors) {
    auto vdn = make_mixer("vdn", 4, 48);
    EXPECT_EQ(vdn->kind(), "vdn");
    auto qmix = make_mixer("qmix", 4, 48);
    EXPECT_EQ(qmix->kind(), "qmix");
    EXPECT_THROW(make_mixer("qtran", 4, 48), ConfigError);
}
