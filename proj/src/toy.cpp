#include "glpe/toy.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "glpe/adam.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace glpe {

ToyMode parse_toy_mode(const std::string& s) {
    if (s == "mean") return ToyMode::Mean;
    if (s == "sum") return ToyMode::Sum;
    if (s == "max") return ToyMode::Max;
    if (s == "mix") return ToyMode::Mix;
    throw ConfigError("unknown toy mode: " + s);
}

std::string to_string(ToyMode mode) {
    switch (mode) {
        case ToyMode::Mean: return "mean";
        case ToyMode::Sum: return "sum";
        case ToyMode::Max: return "max";
        case ToyMode::Mix: return "mix";
    }
    return "?";
}

std::pair<Tensor, Tensor> generate_batch(const ToyTask& task, long count, Rng& rng) {
    if (count < 1) throw DimensionError("generate_batch: count must be >= 1");
    const long n = task.n_agents, d = task.d;
    std::vector<double> x(static_cast<size_t>(count * n * d));
    rng.fill_uniform(x, 0.0, static_cast<double>(n));
    std::vector<double> y(x.size());
    for (long b = 0; b < count; ++b) {
        const double* xb = x.data() + b * n * d;
        double* yb = y.data() + b * n * d;
        for (long j = 0; j < d; ++j) {
            double sum = 0.0;
            double mx = xb[j];
            for (long i = 0; i < n; ++i) {
                sum += xb[i * d + j];
                mx = std::max(mx, xb[i * d + j]);
            }
            const double mean = sum / static_cast<double>(n);
            double stat = 0.0;
            switch (task.mode) {
                case ToyMode::Mean: stat = mean; break;
                case ToyMode::Sum: stat = sum; break;
                case ToyMode::Max: stat = mx; break;
                case ToyMode::Mix: stat = (mean + sum + mx) / 3.0; break;
            }
            for (long i = 0; i < n; ++i) yb[i * d + j] = xb[i * d + j] + stat;
        }
    }
    return {Tensor({count, n, d}, std::move(x)), Tensor({count, n, d}, std::move(y))};
}

std::vector<ToyVariant> toy_variants() {
    return {
        {"mlp", true, Pool::Mean, Act::Identity},
        {"pe_mean_tanh", false, Pool::Mean, Act::Tanh},
        {"pe_mean_id", false, Pool::Mean, Act::Identity},
        {"pe_sum_tanh", false, Pool::Sum, Act::Tanh},
        {"pe_sum_id", false, Pool::Sum, Act::Identity},
        {"pe_max_tanh", false, Pool::Max, Act::Tanh},
        {"pe_max_id", false, Pool::Max, Act::Identity},
    };
}

namespace {
uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}
}  // namespace

std::vector<double> run_toy_single(const ToyTask& task, const ToyRunConfig& cfg,
                                   const ToyVariant& variant, uint64_t seed) {
    Rng run_rng = Rng(seed)
                      .derive(static_cast<uint64_t>(task.mode) + 1)
                      .derive(static_cast<uint64_t>(task.n_agents))
                      .derive(fnv1a(variant.name));
    Rng init_rng = run_rng.derive(1);
    Rng data_rng = run_rng.derive(2);

    GlpeNetwork pe_net;
    PlainMlp mlp;
    std::vector<Tensor> params;
    if (variant.is_mlp) {
        mlp = make_toy_mlp(task.n_agents, task.d, cfg.hidden, cfg.n_layers);
        mlp.init(init_rng);
        params = mlp.parameters();
    } else {
        pe_net = make_toy_pe_network(task.d, variant.pool, variant.global_act, cfg.hidden,
                                     cfg.n_layers);
        pe_net.init(init_rng);
        params = pe_net.parameters();
    }
    AdamConfig ac;
    ac.lr = cfg.lr;
    Adam opt(params, ac);

    std::vector<double> curve;
    curve.reserve(static_cast<size_t>(cfg.epochs));
    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_mse = std::nan("");
        try {
            for (long step = 0; step < cfg.steps_per_epoch; ++step) {
                auto [x, y] = generate_batch(task, cfg.batch_size, data_rng);
                Tape tape;
                tape.activate();
                Tensor pred;
                if (variant.is_mlp) {
                    const long flat = task.n_agents * task.d;
                    pred = ops::reshape(mlp.forward(ops::reshape(x, {cfg.batch_size, flat})),
                                        x.dims());
                } else {
                    pred = pe_net.forward(x);
                }
                Tensor loss = ops::mse(pred, y);
                opt.zero_grad();
                tape.backward(loss);
                tape.deactivate();
                opt.step();
                epoch_mse = loss.item();
            }
        } catch (const NumericError&) {
            // Diverged: fill the rest of the curve with NaN and stop training.
            for (long e = epoch; e < cfg.epochs; ++e) curve.push_back(std::nan(""));
            return curve;
        }
        curve.push_back(epoch_mse);
    }
    return curve;
}

long run_toy_experiment(const ToyRunConfig& cfg, const std::string& out_csv) {
    struct Run {
        ToyTask task;
        ToyVariant variant;
        uint64_t seed;
    };
    std::vector<Run> runs;
    const auto variants = toy_variants();
    for (ToyMode mode : cfg.modes)
        for (long n : cfg.agent_counts)
            for (const auto& variant : variants)
                for (long s = 1; s <= cfg.seeds; ++s)
                    runs.push_back({{mode, n, cfg.d}, variant, static_cast<uint64_t>(s)});

    std::vector<std::vector<double>> curves(runs.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < static_cast<long>(runs.size()); ++i) {
        const Run& r = runs[static_cast<size_t>(i)];
        curves[static_cast<size_t>(i)] = run_toy_single(r.task, cfg, r.variant, r.seed);
    }

    std::ofstream csv(out_csv);
    if (!csv) throw ConfigError("cannot write " + out_csv);
    csv << "mode,N,variant,seed,epoch,mse\n";
    long diverged = 0;
    char buf[40];
    for (size_t i = 0; i < runs.size(); ++i) {
        const Run& r = runs[i];
        bool bad = false;
        for (size_t e = 0; e < curves[i].size(); ++e) {
            std::snprintf(buf, sizeof buf, "%.17g", curves[i][e]);
            csv << to_string(r.task.mode) << ',' << r.task.n_agents << ',' << r.variant.name
                << ',' << r.seed << ',' << e << ',' << buf << '\n';
            bad = bad || std::isnan(curves[i][e]);
        }
        if (bad) ++diverged;
    }
    return diverged;
}

}  // namespace glpe
