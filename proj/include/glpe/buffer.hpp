#pragma once

#include <vector>

#include "glpe/rng.hpp"
#include "glpe/tensor.hpp"

namespace glpe {

// One complete episode. Transitions are indexed t = 0..T-1; feats and states
// also carry the post-episode entry t = T used by bootstrap targets.
// mask[t] = 1 for real transitions, 0 for padding appended by batching.
struct Episode {
    long n_agents = 0;
    long feat_dim = 0;   // assembled policy input width per agent
    long state_dim = 0;
    long T = 0;

    std::vector<double> feats;    // (T+1) * n_agents * feat_dim
    std::vector<double> states;   // (T+1) * state_dim
    std::vector<double> avail;    // (T+1) * n_agents * n_actions, 0/1
    std::vector<long> actions;    // T * n_agents
    std::vector<double> rewards;  // T
    std::vector<double> dones;    // T, 0/1
    std::vector<double> mask;     // T, 0/1

    long n_actions = 0;
    double return_sum = 0.0;

    void validate() const;
};

// Ring buffer of complete episodes.
class EpisodeBuffer {
  public:
    explicit EpisodeBuffer(long capacity);

    void push(Episode ep);
    long size() const { return static_cast<long>(store_.size()); }
    long capacity() const { return capacity_; }
    const Episode& at(long i) const { return store_[static_cast<size_t>(i)]; }

    // Uniform sample without replacement.
    std::vector<const Episode*> sample(long count, Rng& rng) const;

  private:
    long capacity_;
    long next_ = 0;
    std::vector<Episode> store_;
};

}  // namespace glpe
