#include "glpe/pe_check.hpp"

#include <cmath>
#include <numeric>

namespace glpe {

std::vector<long> random_permutation(long n, Rng& rng) {
    std::vector<long> p(static_cast<size_t>(n));
    std::iota(p.begin(), p.end(), 0L);
    for (long i = n - 1; i > 0; --i)
        std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(rng.uniform_int(i + 1))]);
    return p;
}

Tensor apply_perm_rows(const Tensor& x, const std::vector<long>& perm) {
    if (x.rank() != 2) throw DimensionError("apply_perm_rows: want [n, d]");
    const long n = x.dim(0), d = x.dim(1);
    if (static_cast<long>(perm.size()) != n)
        throw DimensionError("apply_perm_rows: permutation length mismatch");
    std::vector<double> out(static_cast<size_t>(n * d));
    auto xd = x.data();
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < d; ++j) out[i * d + j] = xd[perm[static_cast<size_t>(i)] * d + j];
    return Tensor({n, d}, std::move(out));
}

double pe_deviation(const JointFn& f, const Tensor& x, const std::vector<long>& perm) {
    NoGradGuard ng;
    Tensor lhs = f(apply_perm_rows(x, perm));
    Tensor rhs = apply_perm_rows(f(x), perm);
    if (lhs.dims() != rhs.dims())
        throw DimensionError("pe_deviation: output shapes differ under permutation");
    double dev = 0.0;
    auto a = lhs.data();
    auto b = rhs.data();
    for (long i = 0; i < lhs.size(); ++i) dev = std::max(dev, std::fabs(a[i] - b[i]));
    return dev;
}

PeReport assert_permutation_equivariant(const JointFn& f, long n, long d_in, long trials,
                                        double tolerance, Rng& rng) {
    PeReport report;
    report.trials = trials;
    report.tolerance = tolerance;
    for (long t = 0; t < trials; ++t) {
        Tensor x({n, d_in}, 0.0);
        rng.fill_uniform(x.raw(), -1.0, 1.0);
        std::vector<long> perm = random_permutation(n, rng);
        if (n >= 2 && std::is_sorted(perm.begin(), perm.end())) std::swap(perm[0], perm[1]);
        report.max_deviation = std::max(report.max_deviation, pe_deviation(f, x, perm));
    }
    report.passed = report.max_deviation <= tolerance;
    return report;
}

JointFn joint_fn(const GlpeNetwork& net) {
    return [&net](const Tensor& x) {
        auto hidden = net.initial_hidden(1, x.dim(0));
        return net.forward(x, &hidden);
    };
}

JointFn joint_fn(const PlainMlp& mlp, long n) {
    const long d_in = mlp.input_dim() / n;
    const long d_out = mlp.output_dim() / n;
    if (d_in * n != mlp.input_dim() || d_out * n != mlp.output_dim())
        throw DimensionError("joint_fn: mlp widths not divisible by agent count");
    return [&mlp, n, d_in, d_out](const Tensor& x) {
        if (x.dims() != Dims{n, d_in})
            throw DimensionError("joint_fn: want [" + std::to_string(n) + "," +
                                 std::to_string(d_in) + "], got " + dims_str(x.dims()));
        Tensor flat = ops::reshape(x, {1, n * d_in});
        return ops::reshape(mlp.forward(flat), {n, d_out});
    };
}

}  // namespace glpe
