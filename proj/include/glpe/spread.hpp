#pragma once

#include <vector>

#include "glpe/rng.hpp"
#include "glpe/tensor.hpp"

namespace glpe {

// Actions move the agent along one axis; indices are part of the contract.
enum class SpreadAction : long { NoMove = 0, Left = 1, Right = 2, Down = 3, Up = 4 };
inline constexpr long kSpreadActions = 5;

struct SpreadConfig {
    long n_agents = 4;
    long episode_length = 25;
    double dt = 0.1;
    double damping = 0.25;
    double force_mag = 5.0;
    double agent_radius = 0.15;
    double spawn_range = 1.0;
    double collision_penalty = 1.0;

    void validate() const;
    long obs_dim() const { return 4 + 2 * n_agents; }
    long state_dim() const { return n_agents * obs_dim(); }
};

struct SpreadState {
    std::vector<double> agent_pos;     // n_agents * 2
    std::vector<double> agent_vel;     // n_agents * 2
    std::vector<double> landmark_pos;  // n_agents * 2
    long t = 0;
};

struct SpreadStep {
    Tensor obs;  // [n_agents, obs_dim]
    double reward = 0.0;
    bool done = false;
};

// N agents cover N landmarks. Agents do not observe each other; the joint
// observation row for agent i is
//   (vel_x, vel_y, pos_x, pos_y, landmark_1 - pos, ..., landmark_N - pos).
// Shared reward: negative sum over landmarks of the closest-agent distance,
// minus collision_penalty per ordered colliding pair. Episodes end by the
// step limit only.
class SpreadEnv {
  public:
    SpreadEnv(SpreadConfig cfg, Rng rng);

    // Samples agent then landmark positions uniformly in the spawn box,
    // zeroes velocities, returns the joint observation.
    Tensor reset();
    SpreadStep step(const std::vector<long>& joint_action);

    Tensor observe() const;
    // Concatenated per-agent base observations, [n_agents * obs_dim].
    Tensor global_state() const;
    // Reward of the current state (distance term + collision term).
    double reward() const;
    bool done() const { return state_.t >= cfg_.episode_length; }

    const SpreadState& state() const { return state_; }
    void set_state(const SpreadState& s);
    const SpreadConfig& config() const { return cfg_; }
    long n_agents() const { return cfg_.n_agents; }
    long obs_dim() const { return cfg_.obs_dim(); }

  private:
    SpreadConfig cfg_;
    SpreadState state_;
    Rng rng_;
    bool live_ = false;  // reset() has run and the episode is not finished
};

}  // namespace glpe
