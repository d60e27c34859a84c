#include "glpe/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "glpe/checkpoint.hpp"

namespace glpe {

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Greedy action per row, restricted to available actions, ties to the
// lowest index.
std::vector<long> masked_argmax(const double* q, const double* avail, long rows, long a) {
    std::vector<long> out(static_cast<size_t>(rows));
    for (long r = 0; r < rows; ++r) {
        long best = -1;
        for (long j = 0; j < a; ++j) {
            if (avail[r * a + j] <= 0.5) continue;
            if (best < 0 || q[r * a + j] > q[r * a + best]) best = j;
        }
        if (best < 0) throw StateError("empty available-action set");
        out[static_cast<size_t>(r)] = best;
    }
    return out;
}

EvalStats stats_of(std::vector<double> returns) {
    EvalStats es;
    es.returns = std::move(returns);
    const double n = static_cast<double>(es.returns.size());
    for (double r : es.returns) es.mean_return += r;
    es.mean_return /= n;
    double sq = 0.0;
    for (double r : es.returns) sq += (r - es.mean_return) * (r - es.mean_return);
    es.std_return = std::sqrt(sq / n);
    return es;
}

}  // namespace

PolicyKind parse_policy_kind(const std::string& s) {
    if (s == "distributed" || s == "gru") return PolicyKind::DistributedGru;
    if (s == "glpe" || s == "cpe") return PolicyKind::CentralizedGlpe;
    throw ConfigError("unknown policy kind: " + s);
}

std::string to_string(PolicyKind kind) {
    return kind == PolicyKind::DistributedGru ? "distributed" : "glpe";
}

void TrainConfig::validate() const {
    if (total_steps < 1 || batch_size < 1 || buffer_capacity < batch_size)
        throw ConfigError("train: bad step/batch/buffer sizes");
    if (lr <= 0 || gamma < 0 || gamma > 1) throw ConfigError("train: bad lr or gamma");
    if (eps_start < eps_end || eps_end < 0 || eps_anneal_steps < 1)
        throw ConfigError("train: bad epsilon schedule");
    if (target_update_interval < 1 || eval_every < 1 || eval_episodes < 1)
        throw ConfigError("train: bad eval/target settings");
    if (grad_clip <= 0 || hidden < 1) throw ConfigError("train: bad clip or hidden");
}

double epsilon_at(const TrainConfig& cfg, long env_steps) {
    const double frac =
        static_cast<double>(env_steps) / static_cast<double>(cfg.eps_anneal_steps);
    return std::max(cfg.eps_end, cfg.eps_start - (cfg.eps_start - cfg.eps_end) * frac);
}

long policy_feat_dim(const SpreadConfig& env) {
    return env.obs_dim() + env.n_agents + kSpreadActions;
}

GlpeNetwork make_policy(PolicyKind kind, long feat_dim, long n_actions, long hidden) {
    return kind == PolicyKind::CentralizedGlpe
               ? make_cpe_policy(feat_dim, n_actions, hidden)
               : make_distributed_policy(feat_dim, n_actions, hidden);
}

std::vector<double> assemble_feats(const Tensor& base_obs,
                                   const std::vector<long>& last_action, long n_actions) {
    const long n = base_obs.dim(0);
    const long d = base_obs.dim(1);
    if (static_cast<long>(last_action.size()) != n)
        throw DimensionError("assemble_feats: last_action size mismatch");
    const long f = d + n + n_actions;
    std::vector<double> out(static_cast<size_t>(n * f), 0.0);
    auto obs = base_obs.data();
    for (long i = 0; i < n; ++i) {
        double* row = out.data() + i * f;
        for (long j = 0; j < d; ++j) row[j] = obs[i * d + j];
        row[d + i] = 1.0;
        const long la = last_action[static_cast<size_t>(i)];
        if (la >= n_actions) throw DimensionError("assemble_feats: bad last action");
        if (la >= 0) row[d + n + la] = 1.0;
    }
    return out;
}

std::vector<long> select_actions(const GlpeNetwork& policy, const Tensor& feats,
                                 std::vector<Tensor>& hiddens,
                                 const std::vector<double>& avail, double eps, Rng& rng) {
    if (feats.rank() != 2) throw DimensionError("select_actions: want [n, feat_dim]");
    const long n = feats.dim(0);
    const long a = policy.output_dim();
    if (avail.size() != static_cast<size_t>(n * a))
        throw DimensionError("select_actions: avail mask size mismatch");
    NoGradGuard ng;
    Tensor q = policy.forward(feats, &hiddens);
    std::vector<long> greedy = masked_argmax(q.data().data(), avail.data(), n, a);
    std::vector<long> actions(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        if (rng.uniform() < eps) {
            long n_avail = 0;
            for (long j = 0; j < a; ++j)
                if (avail[static_cast<size_t>(i * a + j)] > 0.5) ++n_avail;
            if (n_avail == 0) throw StateError("empty available-action set");
            long pick = rng.uniform_int(n_avail);
            for (long j = 0; j < a; ++j) {
                if (avail[static_cast<size_t>(i * a + j)] <= 0.5) continue;
                if (pick == 0) {
                    actions[static_cast<size_t>(i)] = j;
                    break;
                }
                --pick;
            }
        } else {
            actions[static_cast<size_t>(i)] = greedy[static_cast<size_t>(i)];
        }
    }
    return actions;
}

Episode run_training_episode(SpreadEnv& env, const GlpeNetwork& policy,
                             const TrainConfig& cfg, long env_steps_base,
                             Rng& explore_rng) {
    const long n = env.n_agents();
    const long a = kSpreadActions;
    const long f = policy_feat_dim(env.config());
    const long t_len = env.config().episode_length;

    Episode ep;
    ep.n_agents = n;
    ep.feat_dim = f;
    ep.state_dim = env.config().state_dim();
    ep.n_actions = a;
    ep.T = t_len;
    ep.feats.reserve(static_cast<size_t>((t_len + 1) * n * f));
    ep.states.reserve(static_cast<size_t>((t_len + 1) * ep.state_dim));
    ep.avail.reserve(static_cast<size_t>((t_len + 1) * n * a));

    Tensor obs = env.reset();
    std::vector<long> last(static_cast<size_t>(n), -1);
    auto hiddens = policy.initial_hidden(1, n);
    const std::vector<double> avail(static_cast<size_t>(n * a), 1.0);

    auto push_step_fields = [&](const Tensor& o) {
        auto row = assemble_feats(o, last, a);
        ep.feats.insert(ep.feats.end(), row.begin(), row.end());
        Tensor st = env.global_state();
        ep.states.insert(ep.states.end(), st.data().begin(), st.data().end());
        ep.avail.insert(ep.avail.end(), avail.begin(), avail.end());
        return Tensor({n, f}, std::move(row));
    };

    for (long t = 0; t < t_len; ++t) {
        Tensor feats = push_step_fields(obs);
        const double eps = epsilon_at(cfg, env_steps_base + t);
        auto actions = select_actions(policy, feats, hiddens, avail, eps, explore_rng);
        auto sr = env.step(actions);
        ep.actions.insert(ep.actions.end(), actions.begin(), actions.end());
        ep.rewards.push_back(sr.reward);
        ep.dones.push_back(sr.done ? 1.0 : 0.0);
        ep.mask.push_back(1.0);
        ep.return_sum += sr.reward;
        obs = sr.obs;
        last = actions;
    }
    push_step_fields(obs);
    return ep;
}

double run_greedy_episode(SpreadEnv& env, const GlpeNetwork& policy) {
    const long n = env.n_agents();
    const long a = kSpreadActions;
    Tensor obs = env.reset();
    std::vector<long> last(static_cast<size_t>(n), -1);
    auto hiddens = policy.initial_hidden(1, n);
    const std::vector<double> avail(static_cast<size_t>(n * a), 1.0);
    Rng unused(0);
    double ret = 0.0;
    while (!env.done()) {
        Tensor feats({n, policy_feat_dim(env.config())}, assemble_feats(obs, last, a));
        auto actions = select_actions(policy, feats, hiddens, avail, 0.0, unused);
        auto sr = env.step(actions);
        ret += sr.reward;
        obs = sr.obs;
        last = actions;
    }
    return ret;
}

double run_random_episode(SpreadEnv& env, Rng& rng) {
    const long n = env.n_agents();
    env.reset();
    double ret = 0.0;
    std::vector<long> actions(static_cast<size_t>(n));
    while (!env.done()) {
        for (auto& act : actions) act = rng.uniform_int(kSpreadActions);
        ret += env.step(actions).reward;
    }
    return ret;
}

TdLoss td_loss(const std::vector<const Episode*>& batch, const GlpeNetwork& policy,
               const Mixer& mixer, const GlpeNetwork& target_policy,
               const Mixer& target_mixer, double gamma) {
    if (batch.empty()) throw StateError("td_loss: empty batch");
    const long b = static_cast<long>(batch.size());
    const long n = batch[0]->n_agents;
    const long f = batch[0]->feat_dim;
    const long s = batch[0]->state_dim;
    const long a = batch[0]->n_actions;
    long t_max = 0;
    for (const Episode* ep : batch) {
        if (ep->n_agents != n || ep->feat_dim != f || ep->state_dim != s ||
            ep->n_actions != a)
            throw DimensionError("td_loss: episodes in batch disagree on layout");
        t_max = std::max(t_max, ep->T);
    }

    // Stack per-step tensors; episodes shorter than t_max are padded with
    // zero features, done=1, mask=0.
    auto feats_at = [&](long t) {
        std::vector<double> v(static_cast<size_t>(b * n * f), 0.0);
        for (long e = 0; e < b; ++e) {
            const Episode* ep = batch[static_cast<size_t>(e)];
            if (t <= ep->T)
                std::copy_n(ep->feats.begin() + t * n * f, n * f, v.begin() + e * n * f);
        }
        return Tensor({b, n, f}, std::move(v));
    };
    auto states_at = [&](long t) {
        std::vector<double> v(static_cast<size_t>(b * s), 0.0);
        for (long e = 0; e < b; ++e) {
            const Episode* ep = batch[static_cast<size_t>(e)];
            if (t <= ep->T) std::copy_n(ep->states.begin() + t * s, s, v.begin() + e * s);
        }
        return Tensor({b, s}, std::move(v));
    };
    auto avail_at = [&](long t) {
        std::vector<double> v(static_cast<size_t>(b * n * a), 1.0);
        for (long e = 0; e < b; ++e) {
            const Episode* ep = batch[static_cast<size_t>(e)];
            if (t <= ep->T)
                std::copy_n(ep->avail.begin() + t * n * a, n * a, v.begin() + e * n * a);
        }
        return v;
    };
    auto actions_at = [&](long t) {
        std::vector<long> v(static_cast<size_t>(b * n), 0);
        for (long e = 0; e < b; ++e) {
            const Episode* ep = batch[static_cast<size_t>(e)];
            if (t < ep->T)
                std::copy_n(ep->actions.begin() + t * n, n, v.begin() + e * n);
        }
        return v;
    };

    // Target pass: Q_tot^target at every step from the target nets' own
    // hidden-state rollforward; no gradients.
    std::vector<std::vector<double>> target_qtot(static_cast<size_t>(t_max + 1));
    {
        NoGradGuard ng;
        auto th = target_policy.initial_hidden(b, n);
        for (long t = 0; t <= t_max; ++t) {
            Tensor tq = target_policy.forward(feats_at(t), &th);
            if (t == 0) continue;
            auto avail = avail_at(t);
            auto greedy = masked_argmax(tq.data().data(), avail.data(), b * n, a);
            Tensor chosen = ops::gather_last(tq, greedy);
            Tensor qtot = target_mixer.mix(chosen, states_at(t));
            target_qtot[static_cast<size_t>(t)].assign(qtot.data().begin(),
                                                       qtot.data().end());
        }
    }

    // Online pass on the tape.
    Tensor loss_sum;
    double mask_total = 0.0;
    auto hiddens = policy.initial_hidden(b, n);
    for (long t = 0; t < t_max; ++t) {
        Tensor q = policy.forward(feats_at(t), &hiddens);
        Tensor chosen = ops::gather_last(q, actions_at(t));
        Tensor qtot = mixer.mix(chosen, states_at(t));

        std::vector<double> y(static_cast<size_t>(b), 0.0);
        std::vector<double> m(static_cast<size_t>(b), 0.0);
        for (long e = 0; e < b; ++e) {
            const Episode* ep = batch[static_cast<size_t>(e)];
            if (t >= ep->T || ep->mask[static_cast<size_t>(t)] == 0.0) continue;
            m[static_cast<size_t>(e)] = 1.0;
            const double done = ep->dones[static_cast<size_t>(t)];
            y[static_cast<size_t>(e)] =
                ep->rewards[static_cast<size_t>(t)] +
                gamma * (1.0 - done) * target_qtot[static_cast<size_t>(t + 1)][static_cast<size_t>(e)];
            mask_total += 1.0;
        }
        Tensor err = ops::mul(ops::sub(qtot, Tensor({b}, std::move(y))), Tensor({b}, std::move(m)));
        Tensor term = ops::sum_all(ops::mul(err, err));
        loss_sum = loss_sum.defined() ? ops::add(loss_sum, term) : term;
    }
    if (mask_total == 0.0) throw StateError("td_loss: batch has no unmasked steps");

    TdLoss out;
    out.loss = ops::scale_shift(loss_sum, 1.0 / mask_total, 0.0);
    out.value = out.loss.item();
    out.masked_steps = static_cast<long>(mask_total);
    return out;
}

EvalStats evaluate_policy(const GlpeNetwork& policy, const SpreadConfig& env_cfg,
                          long episodes, Rng rng) {
    SpreadEnv env(env_cfg, rng);
    std::vector<double> returns;
    returns.reserve(static_cast<size_t>(episodes));
    for (long e = 0; e < episodes; ++e) returns.push_back(run_greedy_episode(env, policy));
    return stats_of(std::move(returns));
}

EvalStats random_baseline(const SpreadConfig& env_cfg, long episodes, Rng rng) {
    SpreadEnv env(env_cfg, rng.derive(1));
    Rng action_rng = rng.derive(2);
    std::vector<double> returns;
    returns.reserve(static_cast<size_t>(episodes));
    for (long e = 0; e < episodes; ++e)
        returns.push_back(run_random_episode(env, action_rng));
    return stats_of(std::move(returns));
}

TrainRunResult train_run(const TrainConfig& cfg, const SpreadConfig& env_cfg,
                         PolicyKind policy_kind, const std::string& mixer_kind,
                         const std::string& out_dir) {
    cfg.validate();
    env_cfg.validate();
    std::filesystem::create_directories(out_dir);

    const long n = env_cfg.n_agents;
    const long f = policy_feat_dim(env_cfg);
    const long s = env_cfg.state_dim();

    Rng master(cfg.seed);
    Rng init_rng = master.derive(1);
    Rng env_rng = master.derive(2);
    Rng explore_rng = master.derive(3);
    Rng buffer_rng = master.derive(4);
    Rng eval_master = master.derive(5);
    Rng baseline_rng = master.derive(6);

    GlpeNetwork policy = make_policy(policy_kind, f, kSpreadActions, cfg.hidden);
    policy.init(init_rng);
    auto mixer = make_mixer(mixer_kind, n, s);
    mixer->init(init_rng);

    GlpeNetwork target = policy;
    target.set_requires_grad(false);
    auto target_mixer = mixer->clone();
    target_mixer->set_requires_grad(false);

    std::vector<Tensor> params = policy.parameters();
    for (auto& p : mixer->parameters()) params.push_back(p);
    AdamConfig ac;
    ac.lr = cfg.lr;
    Adam opt(params, ac);

    checkpoint::save(out_dir + "/init_policy", policy.named_parameters());
    checkpoint::save(out_dir + "/init_mixer", mixer->named_parameters());

    EvalStats baseline = random_baseline(env_cfg, cfg.eval_episodes, baseline_rng);
    {
        std::ofstream bcsv(out_dir + "/random_baseline.csv");
        bcsv << "seed,episodes,mean_return,std_return\n";
        bcsv << cfg.seed << ',' << cfg.eval_episodes << ',' << fmt_g(baseline.mean_return)
             << ',' << fmt_g(baseline.std_return) << '\n';
    }

    std::ofstream csv(out_dir + "/metrics.csv");
    csv << "seed,env_steps,mean_test_return,std_test_return,epsilon,loss\n";

    TrainRunResult res;
    res.baseline_mean = baseline.mean_return;
    res.metrics_path = out_dir + "/metrics.csv";

    EpisodeBuffer buffer(cfg.buffer_capacity);
    SpreadEnv env(env_cfg, env_rng);

    long env_steps = 0, train_steps = 0, eval_idx = 0;
    double last_loss = 0.0;

    auto do_eval = [&]() {
        EvalStats es =
            evaluate_policy(policy, env_cfg, cfg.eval_episodes,
                            eval_master.derive(static_cast<uint64_t>(eval_idx)));
        ++eval_idx;
        csv << cfg.seed << ',' << env_steps << ',' << fmt_g(es.mean_return) << ','
            << fmt_g(es.std_return) << ',' << fmt_g(epsilon_at(cfg, env_steps)) << ','
            << fmt_g(last_loss) << '\n';
        csv.flush();
        res.final_eval_mean = es.mean_return;
        res.final_eval_std = es.std_return;
        checkpoint::save(out_dir + "/latest_policy", policy.named_parameters());
        checkpoint::save(out_dir + "/latest_mixer", mixer->named_parameters());
    };

    const auto t0 = std::chrono::steady_clock::now();
    do_eval();
    long next_eval = cfg.eval_every;
    try {
        while (env_steps < cfg.total_steps) {
            Episode ep = run_training_episode(env, policy, cfg, env_steps, explore_rng);
            env_steps += ep.T;
            buffer.push(std::move(ep));

            if (buffer.size() >= cfg.batch_size) {
                auto batch = buffer.sample(cfg.batch_size, buffer_rng);
                Tape tape;
                tape.activate();
                TdLoss tl = td_loss(batch, policy, *mixer, target, *target_mixer, cfg.gamma);
                opt.zero_grad();
                tape.backward(tl.loss);
                tape.deactivate();
                clip_grad_norm(params, cfg.grad_clip);
                opt.step();
                last_loss = tl.value;
                ++train_steps;
                if (train_steps % cfg.target_update_interval == 0) {
                    target.copy_params_from(policy);
                    target_mixer->copy_params_from(*mixer);
                }
            }
            while (env_steps >= next_eval) {
                do_eval();
                next_eval += cfg.eval_every;
            }
        }
    } catch (const NumericError&) {
        const double nan = std::nan("");
        csv << cfg.seed << ',' << env_steps << ',' << fmt_g(nan) << ',' << fmt_g(nan) << ','
            << fmt_g(epsilon_at(cfg, env_steps)) << ',' << fmt_g(nan) << '\n';
        res.diverged = true;
    }

    checkpoint::save(out_dir + "/final_policy", policy.named_parameters());
    checkpoint::save(out_dir + "/final_mixer", mixer->named_parameters());
    res.env_steps = env_steps;
    res.train_steps = train_steps;
    res.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

EvalStats evaluate_checkpoint(const std::string& stem, const SpreadConfig& env_cfg,
                              PolicyKind policy_kind, long hidden, long episodes,
                              uint64_t eval_seed) {
    GlpeNetwork policy =
        make_policy(policy_kind, policy_feat_dim(env_cfg), kSpreadActions, hidden);
    checkpoint::load_into(stem + "_policy", policy.named_parameters());
    return evaluate_policy(policy, env_cfg, episodes, Rng(eval_seed));
}

}  // namespace glpe
