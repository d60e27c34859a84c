#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "glpe/checkpoint.hpp"
#include "glpe/layers.hpp"
#include "glpe/pe_check.hpp"

namespace fs = std::filesystem;
using namespace glpe;

namespace {

void zero_params(GlpeNetwork& net) {
    for (auto& p : net.named_parameters())
        std::fill(p.tensor.raw().begin(), p.tensor.raw().end(), 0.0);
}

Tensor rand_rows(long n, long d, Rng& rng) {
    Tensor x({n, d}, 0.0);
    rng.fill_uniform(x.raw(), -1, 1);
    return x;
}

bool same_values(const Tensor& a, const Tensor& b) {
    auto va = a.data(), vb = b.data();
    return std::equal(va.begin(), va.end(), vb.begin(), vb.end());
}

}  // namespace

TEST(PeProperty, SingleGlpeLayerIsTight) {
    for (Pool pool : {Pool::Mean, Pool::Sum, Pool::Max}) {
        GlpeNetwork net;
        net.add_glpe(6, 4, pool, Act::Tanh, Act::Elu, true);
        Rng init(11);
        net.init(init);
        Rng rng(12);
        PeReport rep = assert_permutation_equivariant(joint_fn(net), 5, 6, 50, 1e-12, rng);
        EXPECT_TRUE(rep.passed) << "pool " << static_cast<int>(pool)
                                << " deviation " << rep.max_deviation;
    }
}

TEST(PeProperty, PolicyNetworksHoldAcrossAgentCounts) {
    for (long n : {2L, 5L, 8L}) {
        GlpeNetwork cpe = make_cpe_policy(21, 5, 32);
        Rng init(100 + static_cast<uint64_t>(n));
        cpe.init(init);
        Rng rng(200 + static_cast<uint64_t>(n));
        PeReport rep = assert_permutation_equivariant(joint_fn(cpe), n, 21, 30, 1e-9, rng);
        EXPECT_TRUE(rep.passed) << "n=" << n << " deviation " << rep.max_deviation;

        GlpeNetwork dist = make_distributed_policy(21, 5, 32);
        Rng init2(300 + static_cast<uint64_t>(n));
        dist.init(init2);
        Rng rng2(400 + static_cast<uint64_t>(n));
        PeReport rep2 =
            assert_permutation_equivariant(joint_fn(dist), n, 21, 30, 1e-9, rng2);
        EXPECT_TRUE(rep2.passed) << "n=" << n << " deviation " << rep2.max_deviation;
    }
}

TEST(PeProperty, JointMlpFailsTheCheck) {
    PlainMlp mlp = make_toy_mlp(4, 6, 32, 3);
    Rng init(5);
    mlp.init(init);
    Rng rng(6);
    PeReport rep = assert_permutation_equivariant(joint_fn(mlp, 4), 4, 6, 30, 1e-9, rng);
    EXPECT_FALSE(rep.passed);
    EXPECT_GT(rep.max_deviation, 1e-3);
}

TEST(GlpeLayerMath, ZeroWeightsMapToZero) {
    GlpeNetwork net;
    net.add_glpe(4, 3, Pool::Mean, Act::Tanh, Act::Relu, true);
    Rng init(7);
    net.init(init);
    zero_params(net);
    Rng rng(8);
    Tensor x = rand_rows(6, 4, rng);
    Tensor y = net.forward(x);
    for (double v : y.raw()) EXPECT_EQ(v, 0.0);
}

TEST(GlpeLayerMath, ZeroGruWithZeroHiddenStaysAtZero) {
    GlpeNetwork net;
    net.add_gru(4, 5);
    Rng init(9);
    net.init(init);
    zero_params(net);
    auto hiddens = net.initial_hidden(1, 3);
    Rng rng(10);
    Tensor x = rand_rows(3, 4, rng);
    Tensor y = net.forward(x, &hiddens);
    for (double v : y.raw()) EXPECT_EQ(v, 0.0);
    for (double v : hiddens[0].raw()) EXPECT_EQ(v, 0.0);
}

TEST(GlpeLayerMath, MeanAndSumAgreeForOneAgent) {
    GlpeNetwork mean_net, sum_net;
    mean_net.add_glpe(5, 4, Pool::Mean, Act::Tanh, Act::Elu, true);
    sum_net.add_glpe(5, 4, Pool::Sum, Act::Tanh, Act::Elu, true);
    Rng i1(21);
    mean_net.init(i1);
    Rng i2(21);
    sum_net.init(i2);
    Rng rng(22);
    Tensor x = rand_rows(1, 5, rng);
    Tensor a = mean_net.forward(x);
    Tensor b = sum_net.forward(x);
    for (long i = 0; i < a.size(); ++i) EXPECT_EQ(a.raw()[static_cast<size_t>(i)],
                                                   b.raw()[static_cast<size_t>(i)]);
    // With two agents the two poolings genuinely differ.
    Tensor x2 = rand_rows(2, 5, rng);
    double diff = 0;
    Tensor a2 = mean_net.forward(x2);
    Tensor b2 = sum_net.forward(x2);
    for (long i = 0; i < a2.size(); ++i)
        diff = std::max(diff, std::abs(a2.raw()[static_cast<size_t>(i)] -
                                       b2.raw()[static_cast<size_t>(i)]));
    EXPECT_GT(diff, 1e-6);
}

TEST(GlpeLayerMath, GlobalTermIsBoundedForTanh) {
    GlpeNetwork net;
    net.add_glpe(6, 4, Pool::Mean, Act::Tanh, Act::Identity, true);
    Rng init(31);
    net.init(init);
    // Make the pooled pre-activation large so the bound is actually probed.
    std::vector<double> pool_bias;
    GlpeNetwork local_only = net;
    for (auto& p : local_only.named_parameters()) {
        if (p.name.ends_with(".W_pool"))
            std::fill(p.tensor.raw().begin(), p.tensor.raw().end(), 0.0);
        if (p.name.ends_with(".pool_bias")) {
            pool_bias.assign(p.tensor.raw().begin(), p.tensor.raw().end());
            std::fill(p.tensor.raw().begin(), p.tensor.raw().end(), 0.0);
        }
    }
    ASSERT_EQ(pool_bias.size(), 4u);
    Rng rng(32);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = rand_rows(3, 6, rng);
        for (double& v : x.raw()) v *= 3.0;
        Tensor full = net.forward(x);
        Tensor local = local_only.forward(x);
        for (long i = 0; i < full.size(); ++i) {
            double term = full.raw()[static_cast<size_t>(i)] -
                          local.raw()[static_cast<size_t>(i)];
            double b = pool_bias[static_cast<size_t>(i) % 4];
            EXPECT_LT(std::abs(term - b), 1.0);
        }
    }
}

TEST(ParamCounts, GlpeVersusLocalAffine) {
    GlpeNetwork glpe;
    glpe.add_glpe(12, 64, Pool::Mean, Act::Tanh, Act::Relu, false);
    GlpeNetwork affine;
    affine.add_affine(12, 64, Act::Relu);
    EXPECT_EQ(affine.param_count(), 12 * 64 + 64);
    EXPECT_EQ(glpe.param_count(), 12 * 64 + 64 + 12 * 64);
    EXPECT_EQ(glpe.param_count(), 1600);
    EXPECT_EQ(affine.param_count(), 832);
    EXPECT_TRUE(check_size_bound(glpe, affine));

    GlpeNetwork with_bias;
    with_bias.add_glpe(12, 64, Pool::Mean, Act::Tanh, Act::Relu, true);
    EXPECT_EQ(with_bias.param_count(), 1600 + 64);
}

TEST(ParamCounts, DistributedTwinAndPureGruRatio) {
    GlpeNetwork cpe = make_cpe_policy(21, 5, 64);
    GlpeNetwork twin = distributed_twin(cpe);
    EXPECT_TRUE(check_size_bound(cpe, twin));
    EXPECT_GT(cpe.param_count(), twin.param_count());
    EXPECT_LE(cpe.param_count(), 2 * twin.param_count());

    GlpeNetwork gru_only;
    gru_only.add_gru(6, 16);
    gru_only.add_gru(16, 16);
    GlpeNetwork gru_twin = distributed_twin(gru_only);
    EXPECT_EQ(gru_only.param_count(), gru_twin.param_count());

    GlpeNetwork mismatched;
    mismatched.add_affine(21, 5, Act::Identity);
    EXPECT_THROW(check_size_bound(cpe, mismatched), DimensionError);
}

TEST(ParamCounts, IndependentOfAgentCount) {
    GlpeNetwork net = make_cpe_policy(10, 4, 16);
    Rng init(41);
    net.init(init);
    long count = net.param_count();
    Rng rng(42);
    for (long n : {1L, 2L, 7L}) {
        auto hiddens = net.initial_hidden(1, n);
        Tensor x = rand_rows(n, 10, rng);
        Tensor y = net.forward(x, &hiddens);
        EXPECT_EQ(y.dim(0), n);
        EXPECT_EQ(y.dim(1), 4);
        EXPECT_EQ(net.param_count(), count);
    }
}

TEST(Network, CopySemanticsAndInitDeterminism) {
    GlpeNetwork a = make_cpe_policy(8, 3, 16);
    Rng i1(51);
    a.init(i1);
    GlpeNetwork b = a;  // deep copy
    Rng rng(52);
    Tensor x = rand_rows(4, 8, rng);
    auto ha = a.initial_hidden(1, 4);
    auto hb = b.initial_hidden(1, 4);
    Tensor ya = a.forward(x, &ha);
    Tensor yb = b.forward(x, &hb);
    for (long i = 0; i < ya.size(); ++i)
        EXPECT_EQ(ya.raw()[static_cast<size_t>(i)], yb.raw()[static_cast<size_t>(i)]);

    // Mutating the copy leaves the original untouched.
    zero_params(b);
    auto ha2 = a.initial_hidden(1, 4);
    Tensor ya2 = a.forward(x, &ha2);
    for (long i = 0; i < ya.size(); ++i)
        EXPECT_EQ(ya.raw()[static_cast<size_t>(i)], ya2.raw()[static_cast<size_t>(i)]);

    // Same seed, fresh network: bitwise identical parameters.
    GlpeNetwork c = make_cpe_policy(8, 3, 16);
    Rng i2(51);
    c.init(i2);
    auto pa = a.named_parameters();
    auto pc = c.named_parameters();
    ASSERT_EQ(pa.size(), pc.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(pa[i].name, pc[i].name);
        EXPECT_TRUE(same_values(pa[i].tensor, pc[i].tensor)) << pa[i].name;
    }

    // copy_params_from restores bitwise agreement.
    zero_params(c);
    c.copy_params_from(a);
    auto hc = c.initial_hidden(1, 4);
    Tensor yc = c.forward(x, &hc);
    for (long i = 0; i < ya.size(); ++i)
        EXPECT_EQ(ya.raw()[static_cast<size_t>(i)], yc.raw()[static_cast<size_t>(i)]);
}

TEST(Network, HiddenSlotValidation) {
    GlpeNetwork net = make_cpe_policy(6, 3, 8);
    Rng init(61);
    net.init(init);
    Rng rng(62);
    Tensor x = rand_rows(2, 6, rng);
    EXPECT_THROW(net.forward(x), StateError);
    std::vector<Tensor> none;
    EXPECT_THROW(net.forward(x, &none), StateError);
    auto good = net.initial_hidden(1, 2);
    EXPECT_NO_THROW(net.forward(x, &good));
    EXPECT_THROW(net.forward(rand_rows(2, 7, rng), &good), DimensionError);
}

TEST(Checkpointing, RoundTripIsBitExact) {
    fs::path stem = fs::temp_directory_path() / "glpe_ckpt_roundtrip";
    GlpeNetwork a = make_cpe_policy(9, 4, 16);
    Rng i1(71);
    a.init(i1);
    checkpoint::save(stem.string(), a.named_parameters());

    GlpeNetwork b = make_cpe_policy(9, 4, 16);
    Rng i2(72);
    b.init(i2);
    checkpoint::load_into(stem.string(), b.named_parameters());
    Rng rng(73);
    Tensor x = rand_rows(3, 9, rng);
    auto ha = a.initial_hidden(1, 3);
    auto hb = b.initial_hidden(1, 3);
    Tensor ya = a.forward(x, &ha);
    Tensor yb = b.forward(x, &hb);
    for (long i = 0; i < ya.size(); ++i)
        EXPECT_EQ(ya.raw()[static_cast<size_t>(i)], yb.raw()[static_cast<size_t>(i)]);

    auto loaded = checkpoint::load(stem.string());
    auto orig = a.named_parameters();
    ASSERT_EQ(loaded.size(), orig.size());
    for (size_t i = 0; i < orig.size(); ++i) {
        EXPECT_EQ(loaded[i].name, orig[i].name);
        EXPECT_TRUE(same_values(loaded[i].tensor, orig[i].tensor)) << orig[i].name;
    }
}

TEST(Checkpointing, MismatchAndTruncationAreErrors) {
    fs::path stem = fs::temp_directory_path() / "glpe_ckpt_bad";
    GlpeNetwork a = make_cpe_policy(9, 4, 16);
    Rng i1(81);
    a.init(i1);
    checkpoint::save(stem.string(), a.named_parameters());

    GlpeNetwork other = make_cpe_policy(9, 4, 32);
    Rng i2(82);
    other.init(i2);
    EXPECT_THROW(checkpoint::load_into(stem.string(), other.named_parameters()),
                 ConfigError);
    EXPECT_THROW(checkpoint::load((fs::temp_directory_path() / "no_such_ckpt").string()),
                 ConfigError);

    // Truncate the payload and expect a load failure.
    fs::path bin = stem;
    bin += ".bin";
    fs::resize_file(bin, fs::file_size(bin) / 2);
    EXPECT_THROW(checkpoint::load(stem.string()), ConfigError);
}
