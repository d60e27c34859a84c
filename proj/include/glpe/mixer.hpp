#pragma once

#include <memory>
#include <string>
#include <vector>

#include "glpe/layers.hpp"

namespace glpe {

// Combines per-agent chosen Q-values q [batch, n_agents] into Q_tot [batch],
// optionally conditioned on the global state [batch, state_dim].
class Mixer {
  public:
    virtual ~Mixer() = default;
    virtual Tensor mix(const Tensor& q, const Tensor& state) const = 0;
    virtual std::vector<Tensor> parameters() const = 0;
    virtual std::vector<NamedParam> named_parameters() const = 0;
    virtual void init(Rng& rng) = 0;
    virtual long param_count() const = 0;
    virtual std::unique_ptr<Mixer> clone() const = 0;
    virtual std::string kind() const = 0;

    void copy_params_from(const Mixer& other);
    void set_requires_grad(bool rg);
};

// Q_tot = sum_i Q_i, exactly.
class VdnMixer final : public Mixer {
  public:
    Tensor mix(const Tensor& q, const Tensor& state) const override;
    std::vector<Tensor> parameters() const override { return {}; }
    std::vector<NamedParam> named_parameters() const override { return {}; }
    void init(Rng&) override {}
    long param_count() const override { return 0; }
    std::unique_ptr<Mixer> clone() const override { return std::make_unique<VdnMixer>(); }
    std::string kind() const override { return "vdn"; }
};

// State-conditioned monotonic mixer. Hypernetworks emit the mixing weights;
// absolute values keep dQ_tot/dQ_i >= 0. Biases are unconstrained.
class QmixMixer final : public Mixer {
  public:
    QmixMixer(long n_agents, long state_dim, long embed_dim = 32, long hyper_hidden = 64);

    Tensor mix(const Tensor& q, const Tensor& state) const override;
    std::vector<Tensor> parameters() const override;
    std::vector<NamedParam> named_parameters() const override;
    void init(Rng& rng) override;
    long param_count() const override;
    std::unique_ptr<Mixer> clone() const override;
    std::string kind() const override { return "qmix"; }

    long n_agents() const { return n_agents_; }
    long embed_dim() const { return embed_; }

  private:
    long n_agents_, state_dim_, embed_, hyper_hidden_;
    PlainMlp hyper_w1_;  // state -> n_agents * embed
    PlainMlp hyper_w2_;  // state -> embed
    PlainMlp hyper_b1_;  // state -> embed, single affine
    PlainMlp value_;     // state -> 1
};

std::unique_ptr<Mixer> make_mixer(const std::string& kind, long n_agents, long state_dim);

}  // namespace glpe
