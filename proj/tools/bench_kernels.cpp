#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#else
#include <chrono>
#endif

#include "glpe/kernels.hpp"
#include "glpe/rng.hpp"

using namespace glpe;

namespace {

double now() {
#ifdef _OPENMP
    return omp_get_wtime();
#else
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
#endif
}

struct Timing {
    double ref_s = 0, omp_s = 0;
    bool bitwise_equal = true;
};

template <typename Ref, typename Omp>
Timing time_pair(long reps, std::vector<double>& out_ref, std::vector<double>& out_omp,
                 Ref ref_fn, Omp omp_fn) {
    Timing t;
    double t0 = now();
    for (long r = 0; r < reps; ++r) ref_fn();
    t.ref_s = (now() - t0) / static_cast<double>(reps);
    t0 = now();
    for (long r = 0; r < reps; ++r) omp_fn();
    t.omp_s = (now() - t0) / static_cast<double>(reps);
    t.bitwise_equal = std::memcmp(out_ref.data(), out_omp.data(),
                                  out_ref.size() * sizeof(double)) == 0;
    return t;
}

void report(const std::string& name, const Timing& t) {
    std::printf("%-24s ref %10.3f ms   omp %10.3f ms   speedup %6.2fx   %s\n", name.c_str(),
                t.ref_s * 1e3, t.omp_s * 1e3, t.ref_s / t.omp_s,
                t.bitwise_equal ? "bitwise equal" : "MISMATCH");
}

}  // namespace

int main() {
    Rng rng(42);
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif

    {
        const long m = 512, k = 256, n = 512;
        std::vector<double> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n));
        std::vector<double> c_ref(static_cast<size_t>(m * n)), c_omp(c_ref.size());
        rng.fill_uniform(a, -1, 1);
        rng.fill_uniform(b, -1, 1);
        auto t = time_pair(
            20, c_ref, c_omp,
            [&] { kernels::ref::matmul(a.data(), b.data(), c_ref.data(), m, k, n, false); },
            [&] { kernels::matmul(a.data(), b.data(), c_omp.data(), m, k, n, false); });
        report("matmul 512x256x512", t);
    }
    {
        const long m = 512, k = 256, n = 512;
        std::vector<double> a(static_cast<size_t>(m * k)), dc(static_cast<size_t>(m * n));
        std::vector<double> w_ref(static_cast<size_t>(k * n), 0.0), w_omp(w_ref.size(), 0.0);
        rng.fill_uniform(a, -1, 1);
        rng.fill_uniform(dc, -1, 1);
        auto t = time_pair(
            10, w_ref, w_omp,
            [&] {
                std::memset(w_ref.data(), 0, w_ref.size() * sizeof(double));
                kernels::ref::matmul_at_b(a.data(), dc.data(), w_ref.data(), m, k, n);
            },
            [&] {
                std::memset(w_omp.data(), 0, w_omp.size() * sizeof(double));
                kernels::matmul_at_b(a.data(), dc.data(), w_omp.data(), m, k, n);
            });
        report("matmul_at_b 512x256x512", t);
    }
    for (Act act : {Act::Tanh, Act::Elu}) {
        const long n = 1 << 22;
        std::vector<double> x(static_cast<size_t>(n)), y_ref(x.size()), y_omp(x.size());
        rng.fill_uniform(x, -2, 2);
        auto t = time_pair(
            10, y_ref, y_omp,
            [&] { kernels::ref::unary(act, x.data(), y_ref.data(), n); },
            [&] { kernels::unary(act, x.data(), y_omp.data(), n); });
        report(act == Act::Tanh ? "unary tanh 4M" : "unary elu 4M", t);
    }
    {
        const long n = 1 << 22;
        std::vector<double> x(static_cast<size_t>(n)), y(x.size()), dy(x.size());
        std::vector<double> dx_ref(x.size(), 0.0), dx_omp(x.size(), 0.0);
        rng.fill_uniform(x, -2, 2);
        rng.fill_uniform(dy, -1, 1);
        kernels::unary(Act::Tanh, x.data(), y.data(), n);
        auto t = time_pair(
            10, dx_ref, dx_omp,
            [&] {
                std::memset(dx_ref.data(), 0, dx_ref.size() * sizeof(double));
                kernels::ref::unary_backward(Act::Tanh, x.data(), y.data(), dy.data(),
                                             dx_ref.data(), n);
            },
            [&] {
                std::memset(dx_omp.data(), 0, dx_omp.size() * sizeof(double));
                kernels::unary_backward(Act::Tanh, x.data(), y.data(), dy.data(),
                                        dx_omp.data(), n);
            });
        report("unary_backward tanh 4M", t);
    }
    for (Pool pool : {Pool::Mean, Pool::Max}) {
        const long groups = 4096, rows = 16, d = 64;
        std::vector<double> x(static_cast<size_t>(groups * rows * d));
        std::vector<double> y_ref(static_cast<size_t>(groups * d)), y_omp(y_ref.size());
        std::vector<long> arg_ref(y_ref.size()), arg_omp(y_ref.size());
        rng.fill_uniform(x, -1, 1);
        bool is_max = pool == Pool::Max;
        auto t = time_pair(
            50, y_ref, y_omp,
            [&] {
                kernels::ref::pool_forward(pool, x.data(), y_ref.data(), groups, rows, d,
                                           is_max ? arg_ref.data() : nullptr);
            },
            [&] {
                kernels::pool_forward(pool, x.data(), y_omp.data(), groups, rows, d,
                                      is_max ? arg_omp.data() : nullptr);
            });
        report(is_max ? "pool max 4096x16x64" : "pool mean 4096x16x64", t);
    }
    {
        const long groups = 4096, n = 16, h = 64;
        std::vector<double> q(static_cast<size_t>(groups * n));
        std::vector<double> w(static_cast<size_t>(groups * n * h));
        std::vector<double> y_ref(static_cast<size_t>(groups * h)), y_omp(y_ref.size());
        rng.fill_uniform(q, -1, 1);
        rng.fill_uniform(w, -1, 1);
        auto t = time_pair(
            50, y_ref, y_omp,
            [&] {
                kernels::ref::contract_mid(q.data(), w.data(), y_ref.data(), groups, n, h);
            },
            [&] { kernels::contract_mid(q.data(), w.data(), y_omp.data(), groups, n, h); });
        report("contract_mid 4096x16x64", t);
    }
    return 0;
}
