#include "glpe/kernels.hpp"

#include <cmath>

#include "kernels_detail.hpp"

namespace glpe::kernels {

using detail::act_apply;
using detail::act_grad;
using detail::madd;

namespace {
// Work thresholds below which a parallel region is not worth opening.
constexpr long kMatmulGrain = 1L << 15;
constexpr long kElemGrain = 1L << 14;
}  // namespace

void matmul(const double* a, const double* b, double* c, long m, long k, long n,
            bool accumulate) {
#pragma omp parallel for if (m * k * n > kMatmulGrain && m > 1) schedule(static)
    for (long i = 0; i < m; ++i)
        detail::matmul_row(a + i * k, b, c + i * n, k, n, accumulate);
}

void matmul_at_b(const double* a, const double* dc, double* dw, long m, long k, long n) {
    // dw[kk,:] += sum_i a[i,kk] * dc[i,:]; parallel over output rows kk
#pragma omp parallel for if (m * k * n > kMatmulGrain && k > 1) schedule(static)
    for (long kk = 0; kk < k; ++kk) {
        double* wrow = dw + kk * n;
        for (long i = 0; i < m; ++i) {
            const double av = a[i * k + kk];
            const double* drow = dc + i * n;
            for (long j = 0; j < n; ++j) wrow[j] = madd(wrow[j], av, drow[j]);
        }
    }
}

void transpose(const double* src, double* dst, long rows, long cols) {
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

void unary(Act f, const double* x, double* y, long n) {
#pragma omp parallel for if (n > kElemGrain) schedule(static)
    for (long i = 0; i < n; ++i) y[i] = act_apply(f, x[i]);
}

void unary_backward(Act f, const double* x, const double* y, const double* dy, double* dx,
                    long n) {
#pragma omp parallel for if (n > kElemGrain) schedule(static)
    for (long i = 0; i < n; ++i) dx[i] = madd(dx[i], act_grad(f, x[i], y[i]), dy[i]);
}

void abs_val(const double* x, double* y, long n) {
    for (long i = 0; i < n; ++i) y[i] = std::fabs(x[i]);
}

void abs_backward(const double* x, const double* dy, double* dx, long n) {
    for (long i = 0; i < n; ++i) {
        const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        dx[i] = madd(dx[i], s, dy[i]);
    }
}

void add(const double* a, const double* b, double* y, long n) {
    for (long i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* y, long n) {
    for (long i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* y, long n) {
    for (long i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void scale_shift(const double* x, double* y, double s, double c, long n) {
    for (long i = 0; i < n; ++i) y[i] = madd(c, s, x[i]);
}

void accumulate(double* dst, const double* src, long n) {
    for (long i = 0; i < n; ++i) dst[i] += src[i];
}

void accumulate_scaled(double* dst, const double* src, double s, long n) {
    for (long i = 0; i < n; ++i) dst[i] = madd(dst[i], s, src[i]);
}

void accumulate_prod(double* dst, const double* a, const double* b, long n) {
    for (long i = 0; i < n; ++i) dst[i] = madd(dst[i], a[i], b[i]);
}

void add_rows(const double* x, const double* r, double* y, long rows, long d) {
#pragma omp parallel for if (rows * d > kElemGrain) schedule(static)
    for (long i = 0; i < rows; ++i) {
        const double* xrow = x + i * d;
        double* yrow = y + i * d;
        for (long j = 0; j < d; ++j) yrow[j] = xrow[j] + r[j];
    }
}

void add_rows_backward(const double* dy, double* dr, long rows, long d) {
    for (long i = 0; i < rows; ++i) {
        const double* drow = dy + i * d;
        for (long j = 0; j < d; ++j) dr[j] += drow[j];
    }
}

void add_group_rows(const double* x, const double* r, double* y, long groups, long rows,
                    long d) {
#pragma omp parallel for if (groups * rows * d > kElemGrain) schedule(static)
    for (long g = 0; g < groups; ++g) {
        const double* rg = r + g * d;
        for (long i = 0; i < rows; ++i) {
            const double* xrow = x + (g * rows + i) * d;
            double* yrow = y + (g * rows + i) * d;
            for (long j = 0; j < d; ++j) yrow[j] = xrow[j] + rg[j];
        }
    }
}

void add_group_rows_backward(const double* dy, double* dr, long groups, long rows, long d) {
#pragma omp parallel for if (groups * rows * d > kElemGrain) schedule(static)
    for (long g = 0; g < groups; ++g) {
        double* rg = dr + g * d;
        for (long i = 0; i < rows; ++i) {
            const double* drow = dy + (g * rows + i) * d;
            for (long j = 0; j < d; ++j) rg[j] += drow[j];
        }
    }
}

void pool_forward(Pool p, const double* x, double* y, long groups, long rows, long d,
                  long* argmax) {
#pragma omp parallel for if (groups * rows * d > kElemGrain) schedule(static)
    for (long g = 0; g < groups; ++g)
        detail::pool_group(p, x + g * rows * d, y + g * d, rows, d,
                           argmax ? argmax + g * d : nullptr);
}

void pool_backward(Pool p, const double* dy, double* dx, long groups, long rows, long d,
                   const long* argmax) {
#pragma omp parallel for if (groups * rows * d > kElemGrain) schedule(static)
    for (long g = 0; g < groups; ++g) {
        const double* dyg = dy + g * d;
        double* dxg = dx + g * rows * d;
        switch (p) {
            case Pool::Max:
                for (long j = 0; j < d; ++j) dxg[argmax[g * d + j] * d + j] += dyg[j];
                break;
            case Pool::Sum:
                for (long r = 0; r < rows; ++r)
                    for (long j = 0; j < d; ++j) dxg[r * d + j] += dyg[j];
                break;
            case Pool::Mean: {
                const double inv = 1.0 / static_cast<double>(rows);
                for (long r = 0; r < rows; ++r)
                    for (long j = 0; j < d; ++j)
                        dxg[r * d + j] = madd(dxg[r * d + j], inv, dyg[j]);
                break;
            }
        }
    }
}

void gather(const double* x, const long* idx, double* y, long rows, long width) {
    for (long i = 0; i < rows; ++i) y[i] = x[i * width + idx[i]];
}

void gather_backward(const double* dy, const long* idx, double* dx, long rows, long width) {
    for (long i = 0; i < rows; ++i) dx[i * width + idx[i]] += dy[i];
}

void contract_mid(const double* q, const double* w, double* y, long groups, long n, long h) {
#pragma omp parallel for if (groups * n * h > kMatmulGrain) schedule(static)
    for (long g = 0; g < groups; ++g)
        detail::contract_mid_group(q + g * n, w + g * n * h, y + g * h, n, h);
}

void contract_mid_backward(const double* q, const double* w, const double* dy, double* dq,
                           double* dw, long groups, long n, long h) {
#pragma omp parallel for if (groups * n * h > kMatmulGrain) schedule(static)
    for (long g = 0; g < groups; ++g) {
        const double* qg = q + g * n;
        const double* wg = w + g * n * h;
        const double* dyg = dy + g * h;
        for (long i = 0; i < n; ++i) {
            double acc = dq ? dq[g * n + i] : 0.0;
            const double* wrow = wg + i * h;
            for (long j = 0; j < h; ++j) acc = madd(acc, wrow[j], dyg[j]);
            if (dq) dq[g * n + i] = acc;
            if (dw) {
                double* dwrow = dw + g * n * h + i * h;
                const double qv = qg[i];
                for (long j = 0; j < h; ++j) dwrow[j] = madd(dwrow[j], qv, dyg[j]);
            }
        }
    }
}

void slice_cols(const double* x, double* y, long rows, long width, long start, long len) {
    for (long i = 0; i < rows; ++i) {
        const double* xrow = x + i * width + start;
        double* yrow = y + i * len;
        for (long j = 0; j < len; ++j) yrow[j] = xrow[j];
    }
}

void slice_cols_backward(const double* dy, double* dx, long rows, long width, long start,
                         long len) {
    for (long i = 0; i < rows; ++i) {
        const double* drow = dy + i * len;
        double* xrow = dx + i * width + start;
        for (long j = 0; j < len; ++j) xrow[j] += drow[j];
    }
}

double sum(const double* x, long n) {
    double acc = 0.0;
    for (long i = 0; i < n; ++i) acc += x[i];
    return acc;
}

bool all_finite(const double* x, long n) {
    for (long i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

}  // namespace glpe::kernels
