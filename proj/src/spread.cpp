#include "glpe/spread.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace glpe {

void SpreadConfig::validate() const {
    if (n_agents < 2) throw ConfigError("spread: n_agents must be >= 2");
    if (episode_length < 1) throw ConfigError("spread: episode_length must be >= 1");
    if (dt <= 0 || damping <= 0 || force_mag <= 0 || agent_radius <= 0 || spawn_range <= 0 ||
        collision_penalty < 0)
        throw ConfigError("spread: physical constants must be positive");
    if (damping >= 1) throw ConfigError("spread: damping must be < 1");
}

SpreadEnv::SpreadEnv(SpreadConfig cfg, Rng rng) : cfg_(cfg), rng_(rng) {
    cfg_.validate();
    const size_t n2 = static_cast<size_t>(cfg_.n_agents * 2);
    state_.agent_pos.assign(n2, 0.0);
    state_.agent_vel.assign(n2, 0.0);
    state_.landmark_pos.assign(n2, 0.0);
    state_.t = cfg_.episode_length;  // not live until reset()
}

Tensor SpreadEnv::reset() {
    rng_.fill_uniform(state_.agent_pos, -cfg_.spawn_range, cfg_.spawn_range);
    std::fill(state_.agent_vel.begin(), state_.agent_vel.end(), 0.0);
    rng_.fill_uniform(state_.landmark_pos, -cfg_.spawn_range, cfg_.spawn_range);
    state_.t = 0;
    live_ = true;
    return observe();
}

SpreadStep SpreadEnv::step(const std::vector<long>& joint_action) {
    if (!live_ || done()) throw StateError("spread: step on a finished episode");
    if (static_cast<long>(joint_action.size()) != cfg_.n_agents)
        throw DimensionError("spread: joint action size " +
                             std::to_string(joint_action.size()) + " for " +
                             std::to_string(cfg_.n_agents) + " agents");
    for (long a : joint_action)
        if (a < 0 || a >= kSpreadActions)
            throw DimensionError("spread: action index " + std::to_string(a));

    for (long i = 0; i < cfg_.n_agents; ++i) {
        double ux = 0.0, uy = 0.0;
        switch (static_cast<SpreadAction>(joint_action[static_cast<size_t>(i)])) {
            case SpreadAction::NoMove: break;
            case SpreadAction::Left: ux = -cfg_.force_mag; break;
            case SpreadAction::Right: ux = cfg_.force_mag; break;
            case SpreadAction::Down: uy = -cfg_.force_mag; break;
            case SpreadAction::Up: uy = cfg_.force_mag; break;
        }
        double& vx = state_.agent_vel[static_cast<size_t>(2 * i)];
        double& vy = state_.agent_vel[static_cast<size_t>(2 * i + 1)];
        vx = vx * (1.0 - cfg_.damping) + ux * cfg_.dt;
        vy = vy * (1.0 - cfg_.damping) + uy * cfg_.dt;
        state_.agent_pos[static_cast<size_t>(2 * i)] += vx * cfg_.dt;
        state_.agent_pos[static_cast<size_t>(2 * i + 1)] += vy * cfg_.dt;
    }
    state_.t += 1;

    SpreadStep out;
    out.obs = observe();
    out.reward = reward();
    out.done = done();
    if (out.done) live_ = false;
    return out;
}

double SpreadEnv::reward() const {
    const long n = cfg_.n_agents;
    double r = 0.0;
    for (long l = 0; l < n; ++l) {
        const double lx = state_.landmark_pos[static_cast<size_t>(2 * l)];
        const double ly = state_.landmark_pos[static_cast<size_t>(2 * l + 1)];
        double best = std::numeric_limits<double>::infinity();
        for (long i = 0; i < n; ++i) {
            const double dx = state_.agent_pos[static_cast<size_t>(2 * i)] - lx;
            const double dy = state_.agent_pos[static_cast<size_t>(2 * i + 1)] - ly;
            best = std::min(best, std::sqrt(dx * dx + dy * dy));
        }
        r -= best;
    }
    const double touch = 2.0 * cfg_.agent_radius;
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = state_.agent_pos[static_cast<size_t>(2 * i)] -
                              state_.agent_pos[static_cast<size_t>(2 * j)];
            const double dy = state_.agent_pos[static_cast<size_t>(2 * i + 1)] -
                              state_.agent_pos[static_cast<size_t>(2 * j + 1)];
            if (std::sqrt(dx * dx + dy * dy) < touch) r -= cfg_.collision_penalty;
        }
    return r;
}

Tensor SpreadEnv::observe() const {
    const long n = cfg_.n_agents;
    const long d = cfg_.obs_dim();
    std::vector<double> obs(static_cast<size_t>(n * d));
    for (long i = 0; i < n; ++i) {
        double* row = obs.data() + i * d;
        const double px = state_.agent_pos[static_cast<size_t>(2 * i)];
        const double py = state_.agent_pos[static_cast<size_t>(2 * i + 1)];
        row[0] = state_.agent_vel[static_cast<size_t>(2 * i)];
        row[1] = state_.agent_vel[static_cast<size_t>(2 * i + 1)];
        row[2] = px;
        row[3] = py;
        for (long l = 0; l < n; ++l) {
            row[4 + 2 * l] = state_.landmark_pos[static_cast<size_t>(2 * l)] - px;
            row[4 + 2 * l + 1] = state_.landmark_pos[static_cast<size_t>(2 * l + 1)] - py;
        }
    }
    return Tensor({n, d}, std::move(obs));
}

Tensor SpreadEnv::global_state() const {
    Tensor obs = observe();
    std::vector<double> flat(obs.data().begin(), obs.data().end());
    return Tensor({cfg_.state_dim()}, std::move(flat));
}

void SpreadEnv::set_state(const SpreadState& s) {
    const size_t n2 = static_cast<size_t>(cfg_.n_agents * 2);
    if (s.agent_pos.size() != n2 || s.agent_vel.size() != n2 || s.landmark_pos.size() != n2)
        throw DimensionError("spread: state size mismatch");
    if (s.t < 0 || s.t > cfg_.episode_length)
        throw StateError("spread: state step counter out of range");
    check_finite(s.agent_pos, "spread state");
    check_finite(s.agent_vel, "spread state");
    check_finite(s.landmark_pos, "spread state");
    state_ = s;
    live_ = state_.t < cfg_.episode_length;
}

}  // namespace glpe
