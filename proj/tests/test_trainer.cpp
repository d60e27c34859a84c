#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "glpe/mixer.hpp"
#include "glpe/ops.hpp"
#include "glpe/pe_check.hpp"
#include "glpe/trainer.hpp"

namespace fs = std::filesystem;
using namespace glpe;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Single affine layer with zero weights and a fixed bias: every agent's
// Q-vector equals the bias regardless of input.
GlpeNetwork bias_policy(long feat_dim, const std::vector<double>& bias) {
    GlpeNetwork net;
    net.add_affine(feat_dim, static_cast<long>(bias.size()), Act::Identity);
    for (auto& p : net.named_parameters()) {
        if (p.name.ends_with(".b"))
            std::copy(bias.begin(), bias.end(), p.tensor.raw().begin());
        else
            std::fill(p.tensor.raw().begin(), p.tensor.raw().end(), 0.0);
    }
    return net;
}

Episode blank_episode(long n, long f, long s, long a, long T) {
    Episode ep;
    ep.n_agents = n;
    ep.feat_dim = f;
    ep.state_dim = s;
    ep.n_actions = a;
    ep.T = T;
    ep.feats.assign(static_cast<size_t>((T + 1) * n * f), 0.0);
    ep.states.assign(static_cast<size_t>((T + 1) * s), 0.0);
    ep.avail.assign(static_cast<size_t>((T + 1) * n * a), 1.0);
    ep.actions.assign(static_cast<size_t>(T * n), 0);
    ep.rewards.assign(static_cast<size_t>(T), 0.0);
    ep.dones.assign(static_cast<size_t>(T), 0.0);
    ep.dones.back() = 1.0;
    ep.mask.assign(static_cast<size_t>(T), 1.0);
    return ep;
}

}  // namespace

TEST(TrainerCfg, EpsilonSchedule) {
    TrainConfig cfg;
    EXPECT_DOUBLE_EQ(epsilon_at(cfg, 0), 1.0);
    EXPECT_NEAR(epsilon_at(cfg, 25000), 0.525, 1e-12);
    EXPECT_NEAR(epsilon_at(cfg, 50000), 0.05, 1e-15);
    EXPECT_NEAR(epsilon_at(cfg, 300000), 0.05, 1e-15);
    EXPECT_NO_THROW(cfg.validate());
    TrainConfig bad = cfg;
    bad.buffer_capacity = bad.batch_size - 1;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.eps_start = 0.01;  // below eps_end
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TrainerCfg, FeatDim) {
    SpreadConfig env;
    env.n_agents = 4;
    EXPECT_EQ(policy_feat_dim(env), (4 + 2 * 4) + 4 + 5);
    env.n_agents = 8;
    EXPECT_EQ(policy_feat_dim(env), (4 + 2 * 8) + 8 + 5);
}

TEST(AssembleFeats, LayoutAndStartMarker) {
    Tensor obs({2, 3}, {1., 2., 3., 4., 5., 6.});
    auto rows = assemble_feats(obs, {-1, 2}, 4);
    // width = 3 obs + 2 id + 4 action
    ASSERT_EQ(rows.size(), static_cast<size_t>(2 * 9));
    std::vector<double> expect = {1, 2, 3, 1, 0, 0, 0, 0, 0,
                                  4, 5, 6, 0, 1, 0, 0, 1, 0};
    for (size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(rows[i], expect[i]);
    EXPECT_THROW(assemble_feats(obs, {0}, 4), DimensionError);
    EXPECT_THROW(assemble_feats(obs, {0, 4}, 4), DimensionError);
}

TEST(SelectActions, GreedyTieBreaksToLowestIndex) {
    GlpeNetwork net = bias_policy(3, {0, 5, 5, 1, 0});
    Tensor feats({2, 3}, 0.5);
    auto hiddens = net.initial_hidden(1, 2);
    std::vector<double> avail(10, 1.0);
    Rng rng(1);
    auto acts = select_actions(net, feats, hiddens, avail, 0.0, rng);
    EXPECT_EQ(acts[0], 1);
    EXPECT_EQ(acts[1], 1);
    // Masking the tied winner moves the pick to the other tied action.
    avail[1] = 0.0;
    acts = select_actions(net, feats, hiddens, avail, 0.0, rng);
    EXPECT_EQ(acts[0], 2);
    EXPECT_EQ(acts[1], 1);
    // No available action at all is an error.
    std::fill(avail.begin(), avail.begin() + 5, 0.0);
    EXPECT_THROW(select_actions(net, feats, hiddens, avail, 0.0, rng), StateError);
}

TEST(SelectActions, FullyRandomIsUniformOverAvailable) {
    GlpeNetwork net = bias_policy(3, {0, 0, 0, 0, 0});
    Tensor feats({2, 3}, 0.1);
    std::vector<double> avail(10, 1.0);
    avail[2] = 0.0;  // agent 0 cannot take action 2
    Rng rng(99);
    std::vector<long> count0(5, 0), count1(5, 0);
    const long draws = 10000;
    auto hiddens = net.initial_hidden(1, 2);
    for (long k = 0; k < draws; ++k) {
        auto acts = select_actions(net, feats, hiddens, avail, 1.0, rng);
        ++count0[static_cast<size_t>(acts[0])];
        ++count1[static_cast<size_t>(acts[1])];
    }
    EXPECT_EQ(count0[2], 0);
    auto check = [&](long c, double p) {
        double sigma = std::sqrt(p * (1 - p) * draws);
        EXPECT_NEAR(static_cast<double>(c), p * draws, 3 * sigma);
    };
    for (long j = 0; j < 5; ++j) {
        if (j != 2) check(count0[static_cast<size_t>(j)], 0.25);
        check(count1[static_cast<size_t>(j)], 0.2);
    }
}

TEST(TdLoss, TerminalTransitionHandOracle) {
    const long n = 2, f = 3, s = 4, a = 5;
    GlpeNetwork policy = bias_policy(f, {.1, .2, .3, .4, .5});
    GlpeNetwork target = policy;
    VdnMixer mixer, target_mixer;
    Episode ep = blank_episode(n, f, s, a, 1);
    ep.actions = {1, 3};
    ep.rewards = {1.0};
    TdLoss out = td_loss({&ep}, policy, mixer, target, target_mixer, 0.9);
    // Q_tot = 0.2 + 0.4; done, so y = r = 1.
    EXPECT_NEAR(out.value, (0.6 - 1.0) * (0.6 - 1.0), 1e-12);
    EXPECT_EQ(out.masked_steps, 1);
}

TEST(TdLoss, BootstrapUsesTargetGreedyValue) {
    const long n = 2, f = 3, s = 4, a = 5;
    GlpeNetwork policy = bias_policy(f, {.1, .2, .3, .4, .5});
    GlpeNetwork target = policy;
    VdnMixer mixer, target_mixer;
    Episode ep = blank_episode(n, f, s, a, 1);
    ep.actions = {1, 3};
    ep.rewards = {1.0};
    ep.dones = {0.0};  // not terminal: bootstrap from t=1
    TdLoss out = td_loss({&ep}, policy, mixer, target, target_mixer, 0.9);
    // Target greedy picks action 4 for both agents: Q_tot^target = 1.0;
    // y = 1 + 0.9 * 1.0 = 1.9; online Q_tot = 0.6.
    EXPECT_NEAR(out.value, (0.6 - 1.9) * (0.6 - 1.9), 1e-12);
}

TEST(TdLoss, GammaZeroZeroNetGivesMeanSquaredReward) {
    const long n = 2, f = 3, s = 4, a = 5;
    GlpeNetwork policy = bias_policy(f, {0, 0, 0, 0, 0});
    GlpeNetwork target = policy;
    VdnMixer mixer, target_mixer;
    Episode ep = blank_episode(n, f, s, a, 3);
    ep.rewards = {0.5, -1.5, 2.0};
    TdLoss out = td_loss({&ep}, policy, mixer, target, target_mixer, 0.0);
    double expect = (0.25 + 2.25 + 4.0) / 3.0;
    EXPECT_NEAR(out.value, expect, 1e-12);
    EXPECT_EQ(out.masked_steps, 3);
}

TEST(TdLoss, PaddingIsMaskedOut) {
    const long n = 2, f = 3, s = 4, a = 5;
    GlpeNetwork policy = bias_policy(f, {.1, .2, .3, .4, .5});
    GlpeNetwork target = policy;
    VdnMixer mixer, target_mixer;
    Episode ep1 = blank_episode(n, f, s, a, 2);
    ep1.actions = {1, 3, 0, 2};
    ep1.rewards = {1.0, -0.5};
    Episode ep2 = blank_episode(n, f, s, a, 1);
    ep2.actions = {4, 4};
    ep2.rewards = {0.25};
    TdLoss batch = td_loss({&ep1, &ep2}, policy, mixer, target, target_mixer, 0.9);
    TdLoss a1 = td_loss({&ep1}, policy, mixer, target, target_mixer, 0.9);
    TdLoss a2 = td_loss({&ep2}, policy, mixer, target, target_mixer, 0.9);
    EXPECT_NEAR(batch.value * 3.0, a1.value * 2.0 + a2.value * 1.0, 1e-12);
    EXPECT_EQ(batch.masked_steps, 3);
}

TEST(TdLoss, LayoutMismatchAndEmptyBatchErrors) {
    const long n = 2, f = 3, s = 4, a = 5;
    GlpeNetwork policy = bias_policy(f, {0, 0, 0, 0, 0});
    VdnMixer mixer;
    Episode ep1 = blank_episode(n, f, s, a, 1);
    Episode ep2 = blank_episode(n, f + 1, s, a, 1);
    EXPECT_THROW(td_loss({&ep1, &ep2}, policy, mixer, policy, mixer, 0.9),
                 DimensionError);
    EXPECT_THROW(td_loss({}, policy, mixer, policy, mixer, 0.9), StateError);
    Episode ep3 = blank_episode(n, f, s, a, 1);
    ep3.mask = {0.0};
    EXPECT_THROW(td_loss({&ep3}, policy, mixer, policy, mixer, 0.9), StateError);
}

TEST(Episodes, RunTrainingEpisodeIsWellFormed) {
    SpreadConfig env_cfg;
    env_cfg.n_agents = 2;
    env_cfg.episode_length = 4;
    SpreadEnv env(env_cfg, Rng(5));
    TrainConfig cfg;
    cfg.hidden = 8;
    GlpeNetwork policy = make_policy(PolicyKind::DistributedGru,
                                     policy_feat_dim(env_cfg), kSpreadActions, 8);
    Rng init(3);
    policy.init(init);
    Rng explore(4);
    Episode ep = run_training_episode(env, policy, cfg, 0, explore);
    EXPECT_NO_THROW(ep.validate());
    EXPECT_EQ(ep.T, 4);
    EXPECT_EQ(ep.feats.size(), static_cast<size_t>(5 * 2 * policy_feat_dim(env_cfg)));
    EXPECT_EQ(ep.states.size(), static_cast<size_t>(5 * env_cfg.state_dim()));
    EXPECT_EQ(ep.actions.size(), static_cast<size_t>(4 * 2));
    std::vector<double> expect_dones = {0, 0, 0, 1};
    for (size_t t = 0; t < 4; ++t) {
        EXPECT_EQ(ep.dones[t], expect_dones[t]);
        EXPECT_EQ(ep.mask[t], 1.0);
    }
    double sum = 0;
    for (double r : ep.rewards) sum += r;
    EXPECT_DOUBLE_EQ(ep.return_sum, sum);
}

TEST(Episodes, BufferRingAndSampling) {
    EpisodeBuffer buf(3);
    for (long k = 0; k < 5; ++k) {
        Episode ep = blank_episode(2, 3, 4, 5, 1);
        ep.return_sum = static_cast<double>(k);
        buf.push(std::move(ep));
    }
    EXPECT_EQ(buf.size(), 3);
    // Ring overwrote episodes 0 and 1.
    double max_seen = -1;
    for (long i = 0; i < 3; ++i) max_seen = std::max(max_seen, buf.at(i).return_sum);
    EXPECT_EQ(max_seen, 4.0);
    Rng rng(8);
    auto sample = buf.sample(3, rng);
    EXPECT_EQ(sample.size(), 3u);
    EXPECT_TRUE(sample[0] != sample[1] && sample[1] != sample[2] && sample[0] != sample[2]);
    EXPECT_THROW(buf.sample(4, rng), StateError);
}

TEST(Eval, SeedDeterminism) {
    SpreadConfig env_cfg;
    env_cfg.n_agents = 2;
    env_cfg.episode_length = 5;
    GlpeNetwork policy = make_policy(PolicyKind::CentralizedGlpe,
                                     policy_feat_dim(env_cfg), kSpreadActions, 8);
    Rng init(21);
    policy.init(init);
    EvalStats a = evaluate_policy(policy, env_cfg, 4, Rng(5));
    EvalStats b = evaluate_policy(policy, env_cfg, 4, Rng(5));
    EXPECT_EQ(a.mean_return, b.mean_return);
    EXPECT_EQ(a.std_return, b.std_return);
    EvalStats r1 = random_baseline(env_cfg, 6, Rng(9));
    EvalStats r2 = random_baseline(env_cfg, 6, Rng(9));
    EXPECT_EQ(r1.mean_return, r2.mean_return);
    EXPECT_LE(r1.mean_return, 0.0);
}

TEST(Policies, GreedyActionsPermuteWithAgents) {
    SpreadConfig env_cfg;
    env_cfg.n_agents = 4;
    const long f = policy_feat_dim(env_cfg);
    GlpeNetwork policy = make_policy(PolicyKind::CentralizedGlpe, f, kSpreadActions, 16);
    Rng init(31);
    policy.init(init);
    Rng data(32);
    Tensor feats({4, f}, 0.0);
    data.fill_uniform(feats.raw(), -1, 1);
    std::vector<long> perm = {2, 0, 3, 1};
    Tensor permuted = apply_perm_rows(feats, perm);
    std::vector<double> avail(static_cast<size_t>(4 * kSpreadActions), 1.0);
    Rng unused(0);
    auto h1 = policy.initial_hidden(1, 4);
    auto a1 = select_actions(policy, feats, h1, avail, 0.0, unused);
    auto h2 = policy.initial_hidden(1, 4);
    auto a2 = select_actions(policy, permuted, h2, avail, 0.0, unused);
    for (size_t i = 0; i < perm.size(); ++i)
        EXPECT_EQ(a2[i], a1[static_cast<size_t>(perm[i])]);
}

TEST(TrainRun, SmokeWritesArtifactsAndIsByteDeterministic) {
    SpreadConfig env_cfg;
    env_cfg.n_agents = 2;
    env_cfg.episode_length = 5;
    TrainConfig cfg;
    cfg.total_steps = 40;
    cfg.batch_size = 2;
    cfg.buffer_capacity = 4;
    cfg.eval_every = 20;
    cfg.eval_episodes = 2;
    cfg.eps_anneal_steps = 30;
    cfg.hidden = 8;
    cfg.seed = 1;

    fs::path dir = fs::temp_directory_path() / "glpe_trainrun_a";
    fs::path dir2 = fs::temp_directory_path() / "glpe_trainrun_b";
    fs::remove_all(dir);
    fs::remove_all(dir2);
    TrainRunResult res =
        train_run(cfg, env_cfg, PolicyKind::CentralizedGlpe, "qmix", dir.string());
    EXPECT_FALSE(res.diverged);
    EXPECT_EQ(res.env_steps, 40);
    EXPECT_GT(res.train_steps, 0);
    for (const char* f :
         {"metrics.csv", "random_baseline.csv", "init_policy.bin", "init_mixer.bin",
          "latest_policy.bin", "final_policy.bin", "final_mixer.manifest"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    std::string metrics = read_file(dir / "metrics.csv");
    EXPECT_TRUE(metrics.starts_with(
        "seed,env_steps,mean_test_return,std_test_return,epsilon,loss\n"));
    // Rows at env steps 0, 20, 40.
    EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 4);
    // Learning moved the parameters.
    EXPECT_NE(read_file(dir / "init_policy.bin"), read_file(dir / "final_policy.bin"));

    TrainRunResult res2 =
        train_run(cfg, env_cfg, PolicyKind::CentralizedGlpe, "qmix", dir2.string());
    EXPECT_EQ(res.final_eval_mean, res2.final_eval_mean);
    EXPECT_EQ(metrics, read_file(dir2 / "metrics.csv"));
    EXPECT_EQ(read_file(dir / "random_baseline.csv"),
              read_file(dir2 / "random_baseline.csv"));
    EXPECT_EQ(read_file(dir / "final_policy.bin"), read_file(dir2 / "final_policy.bin"));

    // Greedy rollouts from the saved checkpoint reproduce the recorded final
    // evaluation when run with the same eval stream index.
    EvalStats ev = evaluate_checkpoint((dir / "final").string(), env_cfg,
                                       PolicyKind::CentralizedGlpe, 8, 2, cfg.seed);
    EXPECT_TRUE(std::isfinite(ev.mean_return));
}

TEST(TrainRun, DistributedVdnSmoke) {
    SpreadConfig env_cfg;
    env_cfg.n_agents = 2;
    env_cfg.episode_length = 5;
    TrainConfig cfg;
    cfg.total_steps = 30;
    cfg.batch_size = 2;
    cfg.buffer_capacity = 4;
    cfg.eval_every = 15;
    cfg.eval_episodes = 2;
    cfg.eps_anneal_steps = 30;
    cfg.hidden = 8;
    fs::path dir = fs::temp_directory_path() / "glpe_trainrun_vdn";
    fs::remove_all(dir);
    TrainRunResult res =
        train_run(cfg, env_cfg, PolicyKind::DistributedGru, "vdn", dir.string());
    EXPECT_FALSE(res.diverged);
    EXPECT_TRUE(std::isfinite(res.final_eval_mean));
    EXPECT_LT(res.baseline_mean, 0.0);
}
