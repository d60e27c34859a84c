// Serial reference kernels. Plain loops, no OpenMP; the inner bodies come
// from kernels_detail.hpp so the accumulation order matches the primary
// kernels exactly.
#include "kernels_detail.hpp"

namespace glpe::kernels::ref {

void matmul(const double* a, const double* b, double* c, long m, long k, long n,
            bool accumulate) {
    for (long i = 0; i < m; ++i)
        detail::matmul_row(a + i * k, b, c + i * n, k, n, accumulate);
}

void matmul_at_b(const double* a, const double* dc, double* dw, long m, long k, long n) {
    for (long kk = 0; kk < k; ++kk) {
        double* wrow = dw + kk * n;
        for (long i = 0; i < m; ++i) {
            const double av = a[i * k + kk];
            const double* drow = dc + i * n;
            for (long j = 0; j < n; ++j) wrow[j] = detail::madd(wrow[j], av, drow[j]);
        }
    }
}

void unary(Act f, const double* x, double* y, long n) {
    for (long i = 0; i < n; ++i) y[i] = detail::act_apply(f, x[i]);
}

void unary_backward(Act f, const double* x, const double* y, const double* dy, double* dx,
                    long n) {
    for (long i = 0; i < n; ++i)
        dx[i] = detail::madd(dx[i], detail::act_grad(f, x[i], y[i]), dy[i]);
}

void pool_forward(Pool p, const double* x, double* y, long groups, long rows, long d,
                  long* argmax) {
    for (long g = 0; g < groups; ++g)
        detail::pool_group(p, x + g * rows * d, y + g * d, rows, d,
                           argmax ? argmax + g * d : nullptr);
}

void contract_mid(const double* q, const double* w, double* y, long groups, long n, long h) {
    for (long g = 0; g < groups; ++g)
        detail::contract_mid_group(q + g * n, w + g * n * h, y + g * h, n, h);
}

}  // namespace glpe::kernels::ref
