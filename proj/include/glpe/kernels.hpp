#pragma once

#include <cstddef>

namespace glpe {

enum class Act { Identity, Tanh, Sigmoid, Relu, Elu };
enum class Pool { Mean, Sum, Max };

// Dense kernels. The primary entry points are OpenMP-parallel over
// independent output elements only, so results are bit-identical to the
// serial reference in kernels::ref for any thread count.
namespace kernels {

// c[m,n] = a[m,k] * b[k,n], or += when accumulate is set
void matmul(const double* a, const double* b, double* c, long m, long k, long n,
            bool accumulate);
// dw[k,n] += a[m,k]^T * dc[m,n]
void matmul_at_b(const double* a, const double* dc, double* dw, long m, long k, long n);
void transpose(const double* src, double* dst, long rows, long cols);

void unary(Act f, const double* x, double* y, long n);
// dx += f'(x) * dy; y is the forward output (used where f' is cheaper in y)
void unary_backward(Act f, const double* x, const double* y, const double* dy,
                    double* dx, long n);
void abs_val(const double* x, double* y, long n);
void abs_backward(const double* x, const double* dy, double* dx, long n);

void add(const double* a, const double* b, double* y, long n);
void sub(const double* a, const double* b, double* y, long n);
void mul(const double* a, const double* b, double* y, long n);
void scale_shift(const double* x, double* y, double s, double c, long n);  // y = s*x + c
void accumulate(double* dst, const double* src, long n);                   // dst += src
void accumulate_scaled(double* dst, const double* src, double s, long n);  // dst += s*src
void accumulate_prod(double* dst, const double* a, const double* b, long n);  // dst += a*b

// y[i,:] = x[i,:] + r  (r broadcast over all rows)
void add_rows(const double* x, const double* r, double* y, long rows, long d);
void add_rows_backward(const double* dy, double* dr, long rows, long d);
// y[g,i,:] = x[g,i,:] + r[g,:]  (per-group row broadcast)
void add_group_rows(const double* x, const double* r, double* y, long groups, long rows,
                    long d);
void add_group_rows_backward(const double* dy, double* dr, long groups, long rows, long d);

// x[groups, rows, d] -> y[groups, d]; argmax (groups*d) is filled for Max
void pool_forward(Pool p, const double* x, double* y, long groups, long rows, long d,
                  long* argmax);
void pool_backward(Pool p, const double* dy, double* dx, long groups, long rows, long d,
                   const long* argmax);

// y[i] = x[i, idx[i]] over rows of width `width`
void gather(const double* x, const long* idx, double* y, long rows, long width);
void gather_backward(const double* dy, const long* idx, double* dx, long rows, long width);

// y[g,h] = sum_n q[g,n] * w[g,n,h]
void contract_mid(const double* q, const double* w, double* y, long groups, long n, long h);
void contract_mid_backward(const double* q, const double* w, const double* dy, double* dq,
                           double* dw, long groups, long n, long h);

void slice_cols(const double* x, double* y, long rows, long width, long start, long len);
void slice_cols_backward(const double* dy, double* dx, long rows, long width, long start,
                         long len);

double sum(const double* x, long n);
bool all_finite(const double* x, long n);

// Serial reference implementations, kept for correctness tests and the
// kernel benchmark. Same accumulation order as the primary kernels.
namespace ref {
void matmul(const double* a, const double* b, double* c, long m, long k, long n,
            bool accumulate);
void matmul_at_b(const double* a, const double* dc, double* dw, long m, long k, long n);
void unary(Act f, const double* x, double* y, long n);
void unary_backward(Act f, const double* x, const double* y, const double* dy,
                    double* dx, long n);
void pool_forward(Pool p, const double* x, double* y, long groups, long rows, long d,
                  long* argmax);
void contract_mid(const double* q, const double* w, double* y, long groups, long n, long h);
}  // namespace ref

}  // namespace kernels
}  // namespace glpe
