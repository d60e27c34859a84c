#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "glpe/adam.hpp"
#include "glpe/buffer.hpp"
#include "glpe/layers.hpp"
#include "glpe/mixer.hpp"
#include "glpe/spread.hpp"

namespace glpe {

enum class PolicyKind { DistributedGru, CentralizedGlpe };

PolicyKind parse_policy_kind(const std::string& s);
std::string to_string(PolicyKind kind);

struct TrainConfig {
    long total_steps = 500000;
    long batch_size = 32;  // episodes per gradient step
    double lr = 5e-4;
    double gamma = 0.99;
    double eps_start = 1.0;
    double eps_end = 0.05;
    long eps_anneal_steps = 50000;
    long target_update_interval = 200;  // training steps
    long eval_every = 10000;            // env steps
    long eval_episodes = 20;
    long buffer_capacity = 5000;
    double grad_clip = 10.0;
    long hidden = 64;
    uint64_t seed = 1;

    void validate() const;
};

// max(eps_end, 1 - (1 - eps_end) * t / anneal)
double epsilon_at(const TrainConfig& cfg, long env_steps);

// Policy input width per agent: base observation + agent-id one-hot +
// last-action one-hot.
long policy_feat_dim(const SpreadConfig& env);

GlpeNetwork make_policy(PolicyKind kind, long feat_dim, long n_actions, long hidden = 64);

// Feature rows for one step: [obs | id one-hot | last-action one-hot].
// last_action entries of -1 mean "episode start" (zero one-hot).
std::vector<double> assemble_feats(const Tensor& base_obs,
                                   const std::vector<long>& last_action, long n_actions);

// Per-agent epsilon-greedy over available actions; greedy ties break to the
// lowest action index. Advances the hidden state through the policy.
std::vector<long> select_actions(const GlpeNetwork& policy, const Tensor& feats,
                                 std::vector<Tensor>& hiddens,
                                 const std::vector<double>& avail, double eps, Rng& rng);

struct TdLoss {
    Tensor loss;
    double value = 0.0;
    long masked_steps = 0;
};

// Masked mean squared TD error over a batch of episodes:
// y_t = r_t + gamma * (1 - done_t) * Q_tot^target(t+1, per-agent argmax).
TdLoss td_loss(const std::vector<const Episode*>& batch, const GlpeNetwork& policy,
               const Mixer& mixer, const GlpeNetwork& target_policy,
               const Mixer& target_mixer, double gamma);

Episode run_training_episode(SpreadEnv& env, const GlpeNetwork& policy,
                             const TrainConfig& cfg, long env_steps_base, Rng& explore_rng);
double run_greedy_episode(SpreadEnv& env, const GlpeNetwork& policy);
double run_random_episode(SpreadEnv& env, Rng& rng);

struct EvalStats {
    double mean_return = 0.0;
    double std_return = 0.0;
    std::vector<double> returns;
};

EvalStats evaluate_policy(const GlpeNetwork& policy, const SpreadConfig& env_cfg,
                          long episodes, Rng rng);
EvalStats random_baseline(const SpreadConfig& env_cfg, long episodes, Rng rng);

struct TrainRunResult {
    bool diverged = false;
    double final_eval_mean = 0.0;
    double final_eval_std = 0.0;
    double baseline_mean = 0.0;
    long env_steps = 0;
    long train_steps = 0;
    double seconds = 0.0;
    std::string metrics_path;
};

// One seed of training. Writes metrics.csv, random_baseline.csv, and
// init/latest/final checkpoints under out_dir.
TrainRunResult train_run(const TrainConfig& cfg, const SpreadConfig& env_cfg,
                         PolicyKind policy_kind, const std::string& mixer_kind,
                         const std::string& out_dir);

// Greedy rollouts from a saved checkpoint stem (the "<stem>_policy" files).
EvalStats evaluate_checkpoint(const std::string& stem, const SpreadConfig& env_cfg,
                              PolicyKind policy_kind, long hidden, long episodes,
                              uint64_t eval_seed);

}  // namespace glpe
