#include "glpe/buffer.hpp"

#include <numeric>

namespace glpe {

void Episode::validate() const {
    if (T < 1 || n_agents < 1 || feat_dim < 1 || state_dim < 1 || n_actions < 1)
        throw DimensionError("episode: empty or malformed");
    const size_t tf = static_cast<size_t>((T + 1) * n_agents * feat_dim);
    const size_t ts = static_cast<size_t>((T + 1) * state_dim);
    const size_t ta = static_cast<size_t>((T + 1) * n_agents * n_actions);
    if (feats.size() != tf || states.size() != ts || avail.size() != ta ||
        actions.size() != static_cast<size_t>(T * n_agents) ||
        rewards.size() != static_cast<size_t>(T) || dones.size() != static_cast<size_t>(T) ||
        mask.size() != static_cast<size_t>(T))
        throw DimensionError("episode: field sizes inconsistent with T");
    check_finite(feats, "episode feats");
    check_finite(states, "episode states");
    check_finite(rewards, "episode rewards");
}

EpisodeBuffer::EpisodeBuffer(long capacity) : capacity_(capacity) {
    if (capacity < 1) throw DimensionError("buffer capacity must be >= 1");
    store_.reserve(static_cast<size_t>(capacity));
}

void EpisodeBuffer::push(Episode ep) {
    ep.validate();
    if (size() < capacity_) {
        store_.push_back(std::move(ep));
    } else {
        store_[static_cast<size_t>(next_)] = std::move(ep);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<const Episode*> EpisodeBuffer::sample(long count, Rng& rng) const {
    if (count < 1 || count > size())
        throw StateError("buffer: sampling " + std::to_string(count) + " of " +
                         std::to_string(size()) + " episodes");
    std::vector<long> idx(static_cast<size_t>(size()));
    std::iota(idx.begin(), idx.end(), 0L);
    std::vector<const Episode*> out;
    out.reserve(static_cast<size_t>(count));
    for (long i = 0; i < count; ++i) {
        const long j = i + rng.uniform_int(static_cast<long>(idx.size()) - i);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        out.push_back(&store_[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
    }
    return out;
}

}  // namespace glpe
