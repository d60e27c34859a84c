#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <limits>
#include <vector>

#include "glpe/kernels.hpp"
#include "glpe/rng.hpp"

using namespace glpe;
using namespace glpe::kernels;

namespace {

std::vector<double> randv(long n, Rng& rng, double lo = -1, double hi = 1) {
    std::vector<double> v(static_cast<size_t>(n));
    rng.fill_uniform(v, lo, hi);
    return v;
}

struct ThreadOversubscribe {
    int saved;
    ThreadOversubscribe() : saved(omp_get_max_threads()) { omp_set_num_threads(4); }
    ~ThreadOversubscribe() { omp_set_num_threads(saved); }
};

}  // namespace

TEST(KernelParity, MatmulMatchesReferenceBitwise) {
    ThreadOversubscribe guard;
    Rng rng(1);
    const long m = 37, k = 19, n = 23;
    auto a = randv(m * k, rng), b = randv(k * n, rng);
    std::vector<double> c1(static_cast<size_t>(m * n), 0.5), c2 = c1;
    matmul(a.data(), b.data(), c1.data(), m, k, n, false);
    ref::matmul(a.data(), b.data(), c2.data(), m, k, n, false);
    EXPECT_EQ(c1, c2);
    matmul(a.data(), b.data(), c1.data(), m, k, n, true);
    ref::matmul(a.data(), b.data(), c2.data(), m, k, n, true);
    EXPECT_EQ(c1, c2);

    std::vector<double> dw1(static_cast<size_t>(k * n), 0.25), dw2 = dw1;
    auto dc = randv(m * n, rng);
    matmul_at_b(a.data(), dc.data(), dw1.data(), m, k, n);
    ref::matmul_at_b(a.data(), dc.data(), dw2.data(), m, k, n);
    EXPECT_EQ(dw1, dw2);
}

TEST(KernelParity, UnaryAndPoolAndContractMatchReference) {
    ThreadOversubscribe guard;
    Rng rng(2);
    const long n = 4099;  // above any parallel grain cutoff
    auto x = randv(n, rng, -3, 3);
    for (Act f : {Act::Identity, Act::Tanh, Act::Sigmoid, Act::Relu, Act::Elu}) {
        std::vector<double> y1(static_cast<size_t>(n)), y2 = y1;
        unary(f, x.data(), y1.data(), n);
        ref::unary(f, x.data(), y2.data(), n);
        EXPECT_EQ(y1, y2);
        auto dy = randv(n, rng);
        std::vector<double> dx1(static_cast<size_t>(n), 0.125), dx2 = dx1;
        unary_backward(f, x.data(), y1.data(), dy.data(), dx1.data(), n);
        ref::unary_backward(f, x.data(), y2.data(), dy.data(), dx2.data(), n);
        EXPECT_EQ(dx1, dx2);
    }

    const long groups = 33, rows = 7, d = 11;
    auto px = randv(groups * rows * d, rng);
    for (Pool p : {Pool::Mean, Pool::Sum, Pool::Max}) {
        std::vector<double> y1(static_cast<size_t>(groups * d)), y2 = y1;
        std::vector<long> am1(static_cast<size_t>(groups * d), -1), am2 = am1;
        pool_forward(p, px.data(), y1.data(), groups, rows, d,
                     p == Pool::Max ? am1.data() : nullptr);
        ref::pool_forward(p, px.data(), y2.data(), groups, rows, d,
                          p == Pool::Max ? am2.data() : nullptr);
        EXPECT_EQ(y1, y2);
        if (p == Pool::Max) {
            EXPECT_EQ(am1, am2);
        }
    }

    auto q = randv(groups * rows, rng);
    auto w = randv(groups * rows * d, rng);
    std::vector<double> y1(static_cast<size_t>(groups * d)), y2 = y1;
    contract_mid(q.data(), w.data(), y1.data(), groups, rows, d);
    ref::contract_mid(q.data(), w.data(), y2.data(), groups, rows, d);
    EXPECT_EQ(y1, y2);
}

TEST(KernelMath, MatmulHandValues) {
    // [1,2;3,4] * [5,6;7,8] = [19,22;43,50]
    std::vector<double> a = {1, 2, 3, 4}, b = {5, 6, 7, 8}, c(4, 0.0);
    matmul(a.data(), b.data(), c.data(), 2, 2, 2, false);
    std::vector<double> want = {19, 22, 43, 50};
    EXPECT_EQ(c, want);
    matmul(a.data(), b.data(), c.data(), 2, 2, 2, true);
    std::vector<double> doubled = {38, 44, 86, 100};
    EXPECT_EQ(c, doubled);

    // dw = a^T * dc accumulates into dw.
    std::vector<double> dc = {1, 0, 0, 1}, dw(4, 1.0);
    matmul_at_b(a.data(), dc.data(), dw.data(), 2, 2, 2);
    std::vector<double> wantw = {1 + 1, 1 + 3, 1 + 2, 1 + 4};
    EXPECT_EQ(dw, wantw);
}

TEST(KernelMath, ActivationValuesAndDerivatives) {
    std::vector<double> x = {-2.0, -0.5, 0.0, 0.5, 2.0};
    const long n = static_cast<long>(x.size());
    std::vector<double> y(x.size());
    unary(Act::Identity, x.data(), y.data(), n);
    EXPECT_EQ(y, x);
    unary(Act::Relu, x.data(), y.data(), n);
    EXPECT_EQ(y, (std::vector<double>{0, 0, 0, 0.5, 2.0}));
    unary(Act::Tanh, x.data(), y.data(), n);
    for (size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], std::tanh(x[i]));
    unary(Act::Sigmoid, x.data(), y.data(), n);
    for (size_t i = 0; i < x.size(); ++i)
        EXPECT_DOUBLE_EQ(y[i], 1.0 / (1.0 + std::exp(-x[i])));
    unary(Act::Elu, x.data(), y.data(), n);
    for (size_t i = 0; i < x.size(); ++i)
        EXPECT_DOUBLE_EQ(y[i], x[i] > 0 ? x[i] : std::expm1(x[i]));

    // Derivative identities: tanh' = 1-y^2, sigmoid' = y(1-y), elu' = y+1 (x<0).
    std::vector<double> dy(x.size(), 1.0), dx(x.size(), 0.0);
    unary(Act::Tanh, x.data(), y.data(), n);
    unary_backward(Act::Tanh, x.data(), y.data(), dy.data(), dx.data(), n);
    for (size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(dx[i], 1.0 - y[i] * y[i]);
    std::fill(dx.begin(), dx.end(), 0.0);
    unary(Act::Elu, x.data(), y.data(), n);
    unary_backward(Act::Elu, x.data(), y.data(), dy.data(), dx.data(), n);
    for (size_t i = 0; i < x.size(); ++i)
        EXPECT_DOUBLE_EQ(dx[i], x[i] > 0 ? 1.0 : y[i] + 1.0);
    // dx accumulates rather than overwrites.
    unary_backward(Act::Identity, x.data(), y.data(), dy.data(), dx.data(), n);
    EXPECT_DOUBLE_EQ(dx[0], (0.0 + std::expm1(-2.0) + 1.0) + 1.0);
}

TEST(KernelMath, PoolSemanticsAndMaxTies) {
    // One group, three rows of width 2.
    std::vector<double> x = {1, 5, 3, 5, 2, 4};
    std::vector<double> y(2);
    pool_forward(Pool::Sum, x.data(), y.data(), 1, 3, 2, nullptr);
    EXPECT_EQ(y, (std::vector<double>{6, 14}));
    pool_forward(Pool::Mean, x.data(), y.data(), 1, 3, 2, nullptr);
    EXPECT_EQ(y, (std::vector<double>{2, 14.0 * (1.0 / 3.0)}));
    std::vector<long> am(2, -7);
    pool_forward(Pool::Max, x.data(), y.data(), 1, 3, 2, am.data());
    EXPECT_EQ(y, (std::vector<double>{3, 5}));
    EXPECT_EQ(am[0], 1);
    EXPECT_EQ(am[1], 0);  // tie between rows 0 and 1 resolves to the lowest

    // Max backward routes gradient only to the argmax rows.
    std::vector<double> dy = {10, 100};
    std::vector<double> dx(6, 0.0);
    pool_backward(Pool::Max, dy.data(), dx.data(), 1, 3, 2, am.data());
    EXPECT_EQ(dx, (std::vector<double>{0, 100, 10, 0, 0, 0}));
    std::fill(dx.begin(), dx.end(), 0.0);
    pool_backward(Pool::Mean, dy.data(), dx.data(), 1, 3, 2, nullptr);
    for (long i = 0; i < 3; ++i) {
        EXPECT_DOUBLE_EQ(dx[static_cast<size_t>(2 * i)], 10.0 * (1.0 / 3.0));
        EXPECT_DOUBLE_EQ(dx[static_cast<size_t>(2 * i + 1)], 100.0 * (1.0 / 3.0));
    }
}

TEST(KernelMath, ElementwiseHelpersAndSlices) {
    std::vector<double> a = {1, 2, 3}, b = {10, 20, 30}, y(3);
    add(a.data(), b.data(), y.data(), 3);
    EXPECT_EQ(y, (std::vector<double>{11, 22, 33}));
    sub(a.data(), b.data(), y.data(), 3);
    EXPECT_EQ(y, (std::vector<double>{-9, -18, -27}));
    mul(a.data(), b.data(), y.data(), 3);
    EXPECT_EQ(y, (std::vector<double>{10, 40, 90}));
    scale_shift(a.data(), y.data(), 2.0, -1.0, 3);
    EXPECT_EQ(y, (std::vector<double>{1, 3, 5}));
    accumulate(y.data(), a.data(), 3);
    EXPECT_EQ(y, (std::vector<double>{2, 5, 8}));
    accumulate_scaled(y.data(), a.data(), 10.0, 3);
    EXPECT_EQ(y, (std::vector<double>{12, 25, 38}));
    accumulate_prod(y.data(), a.data(), b.data(), 3);
    EXPECT_EQ(y, (std::vector<double>{22, 65, 128}));
    EXPECT_DOUBLE_EQ(sum(y.data(), 3), 215.0);

    std::vector<double> xs = {0, 1, 2, 3, 4, 5, 6, 7};  // 2 rows, width 4
    std::vector<double> sl(4);
    slice_cols(xs.data(), sl.data(), 2, 4, 1, 2);
    EXPECT_EQ(sl, (std::vector<double>{1, 2, 5, 6}));
    std::vector<double> dxs(8, 0.0);
    slice_cols_backward(sl.data(), dxs.data(), 2, 4, 1, 2);
    EXPECT_EQ(dxs, (std::vector<double>{0, 1, 2, 0, 0, 5, 6, 0}));

    std::vector<long> idx = {3, 0};
    std::vector<double> g(2);
    gather(xs.data(), idx.data(), g.data(), 2, 4);
    EXPECT_EQ(g, (std::vector<double>{3, 4}));
    std::vector<double> dg(8, 0.0);
    gather_backward(g.data(), idx.data(), dg.data(), 2, 4);
    EXPECT_EQ(dg, (std::vector<double>{0, 0, 0, 3, 4, 0, 0, 0}));
}

TEST(KernelMath, RowBroadcasts) {
    std::vector<double> x = {1, 2, 3, 4}, r = {10, 20}, y(4);
    add_rows(x.data(), r.data(), y.data(), 2, 2);
    EXPECT_EQ(y, (std::vector<double>{11, 22, 13, 24}));
    std::vector<double> dr(2, 1.0);
    add_rows_backward(y.data(), dr.data(), 2, 2);
    EXPECT_EQ(dr, (std::vector<double>{1 + 11 + 13, 1 + 22 + 24}));

    std::vector<double> gr = {100, 200};  // one per group, d=1
    std::vector<double> gx = {1, 2, 3, 4}, gy(4);
    add_group_rows(gx.data(), gr.data(), gy.data(), 2, 2, 1);
    EXPECT_EQ(gy, (std::vector<double>{101, 102, 203, 204}));
    std::vector<double> dgr(2, 0.0);
    add_group_rows_backward(gy.data(), dgr.data(), 2, 2, 1);
    EXPECT_EQ(dgr, (std::vector<double>{203, 407}));
}

TEST(KernelMath, TransposeAndFiniteScan) {
    std::vector<double> x = {1, 2, 3, 4, 5, 6}, t(6);
    transpose(x.data(), t.data(), 2, 3);
    EXPECT_EQ(t, (std::vector<double>{1, 4, 2, 5, 3, 6}));

    std::vector<double> ok = {0.0, -5.0, 1e300};
    EXPECT_TRUE(all_finite(ok.data(), 3));
    std::vector<double> bad = ok;
    bad[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(all_finite(bad.data(), 3));
    bad[1] = std::numeric_limits<double>::infinity();
    EXPECT_FALSE(all_finite(bad.data(), 3));
    bad[1] = -std::numeric_limits<double>::infinity();
    EXPECT_FALSE(all_finite(bad.data(), 3));
    EXPECT_TRUE(all_finite(bad.data(), 0));

    std::vector<double> ab = {-1.5, 0.0, 2.0}, ay(3);
    abs_val(ab.data(), ay.data(), 3);
    EXPECT_EQ(ay, (std::vector<double>{1.5, 0.0, 2.0}));
    std::vector<double> ady = {10, 20, 30}, adx(3, 1.0);
    abs_backward(ab.data(), ady.data(), adx.data(), 3);
    EXPECT_EQ(adx[0], 1.0 - 10.0);
    EXPECT_EQ(adx[2], 1.0 + 30.0);
}
