#pragma once

#include <functional>
#include <string>
#include <vector>

#include "glpe/rng.hpp"
#include "glpe/tensor.hpp"

namespace glpe {

struct GradCheckOpts {
    double h = 1e-6;
    double rel_tol = 1e-5;
    // Absolute tolerance used where both gradients are below `small`.
    double abs_tol = 1e-7;
    double small = 1e-4;
};

struct GradCheckReport {
    std::string name;
    long instances = 0;
    long checks = 0;
    double max_rel = 0.0;
    double max_abs = 0.0;
    bool passed = true;
};

// One randomized check instance: a scalar-loss builder over fixed leaves.
// Calling loss repeatedly must rebuild the same graph from the leaves'
// current values.
struct GradCase {
    std::function<Tensor()> loss;
    std::vector<Tensor> leaves;
};

// Central finite differences of each leaf element against the tape gradient.
void run_grad_case(const GradCase& c, const GradCheckOpts& opts, GradCheckReport& into);

GradCheckReport grad_check_many(const std::string& name, long instances,
                                const std::function<GradCase(Rng&)>& builder, Rng& rng,
                                const GradCheckOpts& opts = {});

// The standard suite: every op, every layer kind (GRU unrolled two steps),
// both mixers, and a small end-to-end policy.
std::vector<GradCheckReport> grad_check_all(Rng& rng, long instances = 20,
                                            const GradCheckOpts& opts = {});

}  // namespace glpe
