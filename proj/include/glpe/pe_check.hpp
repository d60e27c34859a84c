#pragma once

#include <functional>
#include <vector>

#include "glpe/layers.hpp"
#include "glpe/rng.hpp"
#include "glpe/tensor.hpp"

namespace glpe {

// A function over one joint input [n, d_in] -> [n, d_out].
using JointFn = std::function<Tensor(const Tensor&)>;

struct PeReport {
    long trials = 0;
    double tolerance = 0.0;
    double max_deviation = 0.0;
    bool passed = false;
};

std::vector<long> random_permutation(long n, Rng& rng);

// y[i, :] = x[perm[i], :]
Tensor apply_perm_rows(const Tensor& x, const std::vector<long>& perm);

// max |f(perm(x)) - perm(f(x))| for one input and permutation.
double pe_deviation(const JointFn& f, const Tensor& x, const std::vector<long>& perm);

// Random inputs in [-1, 1] and random permutations; identity draws are
// replaced with a swap of the first two rows so every trial is informative.
PeReport assert_permutation_equivariant(const JointFn& f, long n, long d_in, long trials,
                                        double tolerance, Rng& rng);

// Joint views of the two network kinds. The network wrapper feeds fresh zero
// hidden states on every call; the MLP wrapper flattens [n, d] rows to one
// vector and unflattens the output.
JointFn joint_fn(const GlpeNetwork& net);
JointFn joint_fn(const PlainMlp& mlp, long n);

}  // namespace glpe
