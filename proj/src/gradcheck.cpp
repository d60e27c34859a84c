#include "glpe/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "glpe/layers.hpp"
#include "glpe/mixer.hpp"
#include "glpe/ops.hpp"

namespace glpe {

namespace {

Tensor rand_tensor(Rng& rng, Dims dims, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(dims), 0.0);
    rng.fill_uniform(t.raw(), lo, hi);
    return t;
}

// Keeps every entry at least 0.05 from zero, away from relu/elu/abs kinks.
Tensor rand_offzero(Rng& rng, Dims dims) {
    Tensor t(std::move(dims), 0.0);
    for (double& v : t.raw()) {
        double mag = 0.05 + 0.95 * rng.uniform();
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

// Column-wise separated rows so max pooling keeps its argmax under +-h.
Tensor rand_separated(Rng& rng, long groups, long rows, long d) {
    for (;;) {
        Tensor t = rand_tensor(rng, {groups, rows, d});
        auto v = t.data();
        bool ok = true;
        for (long g = 0; g < groups && ok; ++g)
            for (long c = 0; c < d && ok; ++c)
                for (long i = 0; i < rows && ok; ++i)
                    for (long j = i + 1; j < rows && ok; ++j) {
                        double a = v[static_cast<size_t>((g * rows + i) * d + c)];
                        double b = v[static_cast<size_t>((g * rows + j) * d + c)];
                        if (std::abs(a - b) < 1e-3) ok = false;
                    }
        if (ok) return t;
    }
}

// Random linear functional of y; a constant-weights readout makes the check
// sensitive to every output entry.
Tensor readout(const Tensor& y, const Tensor& cst) { return ops::sum_all(ops::mul(y, cst)); }

void prepare_leaves(std::vector<Tensor>& leaves) {
    for (Tensor& l : leaves) {
        l.set_requires_grad(true);
        l.ensure_grad();
        l.zero_grad();
    }
}

}  // namespace

void run_grad_case(const GradCase& c, const GradCheckOpts& opts, GradCheckReport& into) {
    std::vector<Tensor> leaves = c.leaves;
    prepare_leaves(leaves);
    {
        Tape tape;
        tape.activate();
        Tensor loss = c.loss();
        tape.backward(loss);
        tape.deactivate();
    }
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (Tensor& l : leaves) {
        auto g = l.grad();
        analytic.emplace_back(g.begin(), g.end());
    }

    NoGradGuard ng;
    for (size_t li = 0; li < leaves.size(); ++li) {
        Tensor& leaf = leaves[li];
        auto raw = leaf.raw();
        for (size_t i = 0; i < raw.size(); ++i) {
            double v = raw[i];
            raw[i] = v + opts.h;
            double fp = c.loss().item();
            raw[i] = v - opts.h;
            double fm = c.loss().item();
            raw[i] = v;
            double fd = (fp - fm) / (2.0 * opts.h);
            double g = analytic[li][i];
            double denom = std::max(std::abs(fd), std::abs(g));
            double diff = std::abs(fd - g);
            ++into.checks;
            if (denom < opts.small) {
                into.max_abs = std::max(into.max_abs, diff);
                if (diff > opts.abs_tol) into.passed = false;
            } else {
                double rel = diff / denom;
                into.max_rel = std::max(into.max_rel, rel);
                if (rel > opts.rel_tol) into.passed = false;
            }
        }
    }
    ++into.instances;
}

GradCheckReport grad_check_many(const std::string& name, long instances,
                                const std::function<GradCase(Rng&)>& builder, Rng& rng,
                                const GradCheckOpts& opts) {
    GradCheckReport report;
    report.name = name;
    for (long k = 0; k < instances; ++k) {
        GradCase c = builder(rng);
        run_grad_case(c, opts, report);
    }
    return report;
}

std::vector<GradCheckReport> grad_check_all(Rng& rng, long instances,
                                            const GradCheckOpts& opts) {
    std::vector<GradCheckReport> out;
    auto run = [&](const std::string& name, const std::function<GradCase(Rng&)>& builder,
                   long count = 0) {
        out.push_back(grad_check_many(name, count ? count : instances, builder, rng, opts));
    };

    run("op matmul [m,k]", [](Rng& r) {
        Tensor x = rand_tensor(r, {3, 4}), w = rand_tensor(r, {4, 5});
        Tensor cst = rand_tensor(r, {3, 5});
        return GradCase{[=] { return readout(ops::matmul(x, w), cst); }, {x, w}};
    });
    run("op matmul [g,n,k]", [](Rng& r) {
        Tensor x = rand_tensor(r, {2, 3, 4}), w = rand_tensor(r, {4, 5});
        Tensor cst = rand_tensor(r, {2, 3, 5});
        return GradCase{[=] { return readout(ops::matmul(x, w), cst); }, {x, w}};
    });
    run("op add_bias", [](Rng& r) {
        Tensor x = rand_tensor(r, {3, 5}), b = rand_tensor(r, {5});
        Tensor cst = rand_tensor(r, {3, 5});
        return GradCase{[=] { return readout(ops::add_bias(x, b), cst); }, {x, b}};
    });
    run("op add", [](Rng& r) {
        Tensor a = rand_tensor(r, {2, 3, 4}), b = rand_tensor(r, {2, 3, 4});
        Tensor cst = rand_tensor(r, {2, 3, 4});
        return GradCase{[=] { return readout(ops::add(a, b), cst); }, {a, b}};
    });
    run("op sub", [](Rng& r) {
        Tensor a = rand_tensor(r, {2, 3, 4}), b = rand_tensor(r, {2, 3, 4});
        Tensor cst = rand_tensor(r, {2, 3, 4});
        return GradCase{[=] { return readout(ops::sub(a, b), cst); }, {a, b}};
    });
    run("op mul", [](Rng& r) {
        Tensor a = rand_tensor(r, {2, 3, 4}), b = rand_tensor(r, {2, 3, 4});
        Tensor cst = rand_tensor(r, {2, 3, 4});
        return GradCase{[=] { return readout(ops::mul(a, b), cst); }, {a, b}};
    });
    run("op scale_shift", [](Rng& r) {
        Tensor x = rand_tensor(r, {3, 4});
        Tensor cst = rand_tensor(r, {3, 4});
        return GradCase{[=] { return readout(ops::scale_shift(x, 1.7, -0.3), cst); }, {x}};
    });
    auto act_case = [](Act f, bool offzero) {
        return [f, offzero](Rng& r) {
            Tensor x = offzero ? rand_offzero(r, {3, 4}) : rand_tensor(r, {3, 4}, -2.0, 2.0);
            Tensor cst = rand_tensor(r, {3, 4});
            return GradCase{[=] { return readout(ops::elementwise(f, x), cst); }, {x}};
        };
    };
    run("op identity", act_case(Act::Identity, false));
    run("op tanh", act_case(Act::Tanh, false));
    run("op sigmoid", act_case(Act::Sigmoid, false));
    run("op relu", act_case(Act::Relu, true));
    run("op elu", act_case(Act::Elu, true));
    run("op abs", [](Rng& r) {
        Tensor x = rand_offzero(r, {3, 4});
        Tensor cst = rand_tensor(r, {3, 4});
        return GradCase{[=] { return readout(ops::abs(x), cst); }, {x}};
    });
    auto pool_case = [](Pool p) {
        return [p](Rng& r) {
            Tensor x = p == Pool::Max ? rand_separated(r, 2, 3, 4) : rand_tensor(r, {2, 3, 4});
            Tensor cst = rand_tensor(r, {2, 4});
            return GradCase{[=] { return readout(ops::pool_agents(p, x), cst); }, {x}};
        };
    };
    run("op pool mean", pool_case(Pool::Mean));
    run("op pool sum", pool_case(Pool::Sum));
    run("op pool max", pool_case(Pool::Max));
    run("op mean_over_agents", [](Rng& r) {
        Tensor x = rand_tensor(r, {3, 4});
        Tensor cst = rand_tensor(r, {4});
        return GradCase{[=] { return readout(ops::mean_over_agents(x), cst); }, {x}};
    });
    run("op add_pooled", [](Rng& r) {
        Tensor x = rand_tensor(r, {2, 3, 4}), p = rand_tensor(r, {2, 4});
        Tensor cst = rand_tensor(r, {2, 3, 4});
        return GradCase{[=] { return readout(ops::add_pooled(x, p), cst); }, {x, p}};
    });
    run("op reshape", [](Rng& r) {
        Tensor x = rand_tensor(r, {2, 3, 4});
        Tensor cst = rand_tensor(r, {6, 4});
        return GradCase{[=] { return readout(ops::reshape(x, {6, 4}), cst); }, {x}};
    });
    run("op slice_last", [](Rng& r) {
        Tensor x = rand_tensor(r, {3, 6});
        Tensor cst = rand_tensor(r, {3, 3});
        return GradCase{[=] { return readout(ops::slice_last(x, 2, 3), cst); }, {x}};
    });
    run("op gather_last", [](Rng& r) {
        Tensor x = rand_tensor(r, {3, 5});
        std::vector<long> idx = {static_cast<long>(r.uniform_int(5)),
                                 static_cast<long>(r.uniform_int(5)),
                                 static_cast<long>(r.uniform_int(5))};
        Tensor cst = rand_tensor(r, {3});
        return GradCase{[=] { return readout(ops::gather_last(x, idx), cst); }, {x}};
    });
    run("op sum_last", [](Rng& r) {
        Tensor x = rand_tensor(r, {2, 3, 4});
        Tensor cst = rand_tensor(r, {2, 3});
        return GradCase{[=] { return readout(ops::sum_last(x), cst); }, {x}};
    });
    run("op bmm_vec", [](Rng& r) {
        Tensor q = rand_tensor(r, {2, 3}), w = rand_tensor(r, {2, 3, 5});
        Tensor cst = rand_tensor(r, {2, 5});
        return GradCase{[=] { return readout(ops::bmm_vec(q, w), cst); }, {q, w}};
    });
    run("op sum_all", [](Rng& r) {
        Tensor x = rand_tensor(r, {3, 4});
        return GradCase{[=] { return ops::sum_all(x); }, {x}};
    });
    run("op mean_all", [](Rng& r) {
        Tensor x = rand_tensor(r, {3, 4});
        return GradCase{[=] { return ops::mean_all(x); }, {x}};
    });
    run("op mse", [](Rng& r) {
        Tensor p = rand_tensor(r, {3, 4}), t = rand_tensor(r, {3, 4});
        return GradCase{[=] { return ops::mse(p, t); }, {p, t}};
    });

    auto glpe_case = [](Pool pool, Act local) {
        return [pool, local](Rng& r) {
            auto net = std::make_shared<GlpeNetwork>();
            net->add_glpe(4, 3, pool, Act::Tanh, local, pool == Pool::Sum);
            net->init(r);
            Tensor x = pool == Pool::Max || local != Act::Identity
                           ? rand_offzero(r, {2, 3, 4})
                           : rand_tensor(r, {2, 3, 4});
            Tensor cst = rand_tensor(r, {2, 3, 3});
            std::vector<Tensor> leaves = net->parameters();
            leaves.push_back(x);
            return GradCase{[=] { return readout(net->forward(x), cst); }, leaves};
        };
    };
    run("layer glpe mean", glpe_case(Pool::Mean, Act::Elu));
    run("layer glpe sum", glpe_case(Pool::Sum, Act::Relu));
    run("layer glpe max", glpe_case(Pool::Max, Act::Identity));
    run("layer affine", [](Rng& r) {
        auto net = std::make_shared<GlpeNetwork>();
        net->add_affine(4, 3, Act::Relu);
        net->init(r);
        Tensor x = rand_offzero(r, {2, 3, 4});
        Tensor cst = rand_tensor(r, {2, 3, 3});
        std::vector<Tensor> leaves = net->parameters();
        leaves.push_back(x);
        return GradCase{[=] { return readout(net->forward(x), cst); }, leaves};
    });
    run("layer gru 2-step", [](Rng& r) {
        auto net = std::make_shared<GlpeNetwork>();
        net->add_gru(4, 5);
        net->init(r);
        Tensor x1 = rand_tensor(r, {2, 3, 4}), x2 = rand_tensor(r, {2, 3, 4});
        Tensor cst = rand_tensor(r, {2, 3, 5});
        std::vector<Tensor> leaves = net->parameters();
        leaves.push_back(x1);
        leaves.push_back(x2);
        return GradCase{[=] {
                            auto h = net->initial_hidden(2, 3);
                            net->forward(x1, &h);
                            return readout(net->forward(x2, &h), cst);
                        },
                        leaves};
    });
    run(
        "policy cpe 2-step",
        [](Rng& r) {
            auto net = std::make_shared<GlpeNetwork>(make_cpe_policy(6, 3, 5));
            net->init(r);
            Tensor x1 = rand_tensor(r, {1, 3, 6}), x2 = rand_tensor(r, {1, 3, 6});
            Tensor cst = rand_tensor(r, {1, 3, 3});
            std::vector<Tensor> leaves = net->parameters();
            leaves.push_back(x1);
            leaves.push_back(x2);
            return GradCase{[=] {
                                auto h = net->initial_hidden(1, 3);
                                net->forward(x1, &h);
                                return readout(net->forward(x2, &h), cst);
                            },
                            leaves};
        },
        5);
    run("mixer vdn", [](Rng& r) {
        auto mixer = std::make_shared<VdnMixer>();
        Tensor q = rand_tensor(r, {2, 3}), s = rand_tensor(r, {2, 4});
        Tensor cst = rand_tensor(r, {2});
        return GradCase{[=] { return readout(mixer->mix(q, s), cst); }, {q}};
    });
    run("mixer qmix", [](Rng& r) {
        auto mixer = std::make_shared<QmixMixer>(3, 4, 4, 6);
        mixer->init(r);
        Tensor q = rand_tensor(r, {2, 3}), s = rand_tensor(r, {2, 4});
        Tensor cst = rand_tensor(r, {2});
        std::vector<Tensor> leaves = mixer->parameters();
        leaves.push_back(q);
        leaves.push_back(s);
        return GradCase{[=] { return readout(mixer->mix(q, s), cst); }, leaves};
    });

    return out;
}

}  // namespace glpe
