#pragma once

#include <vector>

#include "glpe/kernels.hpp"
#include "glpe/tensor.hpp"

namespace glpe::ops {

// x: [m,k] or [g,n,k] (treated as [g*n,k]); w: [k,h]. Output keeps x's rank.
Tensor matmul(const Tensor& x, const Tensor& w);

// b ([h]) broadcast over the rows of x ([.., h]).
Tensor add_bias(const Tensor& x, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale_shift(const Tensor& x, double s, double c);  // s*x + c

Tensor elementwise(Act f, const Tensor& x);
Tensor abs(const Tensor& x);

// x: [g,n,d] -> [g,d]. Max ties resolve to the lowest row index.
Tensor pool_agents(Pool p, const Tensor& x);
// x: [n,d] -> [d], the column means.
Tensor mean_over_agents(const Tensor& x);
// x: [g,n,d], r: [g,d] -> x[g,i,:] + r[g,:]
Tensor add_pooled(const Tensor& x, const Tensor& r);

Tensor reshape(const Tensor& x, Dims dims);
// Columns [start, start+len) of the last axis.
Tensor slice_last(const Tensor& x, long start, long len);
// Drop the last axis by picking idx[row] from each row. idx.size() == row count.
Tensor gather_last(const Tensor& x, const std::vector<long>& idx);
// Drop the last axis by summing over it.
Tensor sum_last(const Tensor& x);

// q: [g,n], w: [g,n,h] -> y[g,h] = sum_n q[g,n]*w[g,n,h]
Tensor bmm_vec(const Tensor& q, const Tensor& w);

Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]
Tensor mse(const Tensor& pred, const Tensor& target);

// Per-row argmax over the last axis, ties to the lowest index. No grad.
std::vector<long> argmax_last(const Tensor& x);

}  // namespace glpe::ops
