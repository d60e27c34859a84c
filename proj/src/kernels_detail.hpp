// Per-row / per-element kernel bodies shared by the OpenMP kernels and the
// serial reference so both produce bit-identical results.
#pragma once

#include <cmath>

#include "glpe/kernels.hpp"

namespace glpe::kernels::detail {

inline double madd(double acc, double a, double b) {
#ifdef FP_FAST_FMA
    return std::fma(a, b, acc);
#else
    return acc + a * b;
#endif
}

// c[0..n) (+)= a_row[0..k) * b[k,n]
inline void matmul_row(const double* a_row, const double* b, double* c_row, long k, long n,
                       bool accumulate) {
    if (!accumulate) {
        for (long j = 0; j < n; ++j) c_row[j] = 0.0;
    }
    for (long kk = 0; kk < k; ++kk) {
        const double av = a_row[kk];
        const double* brow = b + kk * n;
        for (long j = 0; j < n; ++j) c_row[j] = madd(c_row[j], av, brow[j]);
    }
}

inline double act_apply(Act f, double x) {
    switch (f) {
        case Act::Identity: return x;
        case Act::Tanh: return std::tanh(x);
        case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Act::Relu: return x > 0.0 ? x : 0.0;
        case Act::Elu: return x > 0.0 ? x : std::expm1(x);
    }
    return x;
}

// derivative in terms of input x and forward output y
inline double act_grad(Act f, double x, double y) {
    switch (f) {
        case Act::Identity: return 1.0;
        case Act::Tanh: return 1.0 - y * y;
        case Act::Sigmoid: return y * (1.0 - y);
        case Act::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Act::Elu: return x > 0.0 ? 1.0 : y + 1.0;
    }
    return 1.0;
}

inline void pool_group(Pool p, const double* x, double* y, long rows, long d, long* argmax) {
    if (p == Pool::Max) {
        for (long j = 0; j < d; ++j) {
            double best = x[j];
            long best_row = 0;
            for (long r = 1; r < rows; ++r) {
                const double v = x[r * d + j];
                if (v > best) {  // ties keep the lowest row index
                    best = v;
                    best_row = r;
                }
            }
            y[j] = best;
            if (argmax) argmax[j] = best_row;
        }
        return;
    }
    for (long j = 0; j < d; ++j) y[j] = x[j];
    for (long r = 1; r < rows; ++r) {
        const double* row = x + r * d;
        for (long j = 0; j < d; ++j) y[j] += row[j];
    }
    if (p == Pool::Mean) {
        const double inv = 1.0 / static_cast<double>(rows);
        for (long j = 0; j < d; ++j) y[j] *= inv;
    }
}

inline void contract_mid_group(const double* q, const double* w, double* y, long n, long h) {
    for (long j = 0; j < h; ++j) y[j] = 0.0;
    for (long i = 0; i < n; ++i) {
        const double qv = q[i];
        const double* wrow = w + i * h;
        for (long j = 0; j < h; ++j) y[j] = madd(y[j], qv, wrow[j]);
    }
}

}  // namespace glpe::kernels::detail
