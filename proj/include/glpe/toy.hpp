#pragma once

#include <string>
#include <utility>
#include <vector>

#include "glpe/layers.hpp"
#include "glpe/rng.hpp"

namespace glpe {

enum class ToyMode { Mean, Sum, Max, Mix };

ToyMode parse_toy_mode(const std::string& s);
std::string to_string(ToyMode mode);

// Regression task: y_i = x_i + stat(x) with the statistic taken elementwise
// over the agent axis; inputs are uniform in [0, N].
struct ToyTask {
    ToyMode mode = ToyMode::Mean;
    long n_agents = 5;
    long d = 2;
};

std::pair<Tensor, Tensor> generate_batch(const ToyTask& task, long count, Rng& rng);

struct ToyVariant {
    std::string name;
    bool is_mlp = false;
    Pool pool = Pool::Mean;
    Act global_act = Act::Tanh;
};

// The seven models under comparison: one flat MLP plus pooling x activation
// combinations of the PE network.
std::vector<ToyVariant> toy_variants();

struct ToyRunConfig {
    long epochs = 300;
    long steps_per_epoch = 1;
    long batch_size = 32;
    long hidden = 64;
    long n_layers = 3;
    double lr = 1e-3;
    long d = 2;
    long seeds = 3;
    std::vector<long> agent_counts = {5, 10, 20};
    std::vector<ToyMode> modes = {ToyMode::Mean, ToyMode::Sum, ToyMode::Max, ToyMode::Mix};
};

// Per-epoch train MSE; a diverged run carries NaN from the failing epoch on.
std::vector<double> run_toy_single(const ToyTask& task, const ToyRunConfig& cfg,
                                   const ToyVariant& variant, uint64_t seed);

// Full (mode x N x variant x seed) grid. Appends CSV rows
// mode,N,variant,seed,epoch,mse in grid order; returns the number of
// diverged runs.
long run_toy_experiment(const ToyRunConfig& cfg, const std::string& out_csv);

}  // namespace glpe
