#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "glpe/ops.hpp"
#include "glpe/rng.hpp"
#include "glpe/tensor.hpp"

namespace glpe {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// One layer of an agent-axis network. Inputs are [groups, n, d_in]; every
// layer applies the same parameters for any n, so parameter counts never
// depend on the agent count.
class Layer {
  public:
    virtual ~Layer() = default;
    // h is the recurrent state slot ([groups, n, hidden_dim]); stateless
    // layers ignore it, recurrent layers read it and write the successor.
    virtual Tensor forward(const Tensor& x, Tensor* h) const = 0;
    virtual long in_dim() const = 0;
    virtual long out_dim() const = 0;
    virtual long hidden_dim() const { return 0; }
    virtual long param_count() const = 0;
    // Parameter count of the distributed (local-only) counterpart.
    virtual long distributed_param_count() const = 0;
    virtual void init(Rng& rng) = 0;
    virtual void collect(const std::string& prefix, std::vector<NamedParam>& out) const = 0;
    virtual std::string kind() const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;
};

// y_i = local_act(x_i W_loc + b_loc) + global_act(pool(x) W_pool) [+ pool_bias]
// The pooled path is shared by all rows of a group, which is what makes the
// layer permutation equivariant.
class GlpeLayer final : public Layer {
  public:
    GlpeLayer(long d_in, long d_out, Pool pool, Act global_act, Act local_act,
              bool with_pool_bias);

    Tensor forward(const Tensor& x, Tensor* h) const override;
    long in_dim() const override { return d_in_; }
    long out_dim() const override { return d_out_; }
    long param_count() const override;
    long distributed_param_count() const override;
    void init(Rng& rng) override;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const override;
    std::string kind() const override { return "glpe"; }
    std::unique_ptr<Layer> clone() const override;

    Pool pooling() const { return pool_; }
    Act global_activation() const { return global_act_; }
    Act local_activation() const { return local_act_; }
    bool has_pool_bias() const { return pool_bias_.defined(); }

  private:
    long d_in_, d_out_;
    Pool pool_;
    Act global_act_, local_act_;
    Tensor W_loc_, b_loc_, W_pool_, pool_bias_;
};

// GRU cell applied row-wise with shared parameters; a local-only PE layer.
// Gate layout in the fused weights is [reset | update | candidate].
class GruGlpeLayer final : public Layer {
  public:
    GruGlpeLayer(long d_in, long d_hidden);

    Tensor forward(const Tensor& x, Tensor* h) const override;
    long in_dim() const override { return d_in_; }
    long out_dim() const override { return d_h_; }
    long hidden_dim() const override { return d_h_; }
    long param_count() const override;
    long distributed_param_count() const override { return param_count(); }
    void init(Rng& rng) override;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const override;
    std::string kind() const override { return "gru"; }
    std::unique_ptr<Layer> clone() const override;

  private:
    long d_in_, d_h_;
    Tensor W_ih_, W_hh_, b_ih_, b_hh_;
};

// y_i = act(x_i W + b); the building block of distributed policies.
class LocalAffineLayer final : public Layer {
  public:
    LocalAffineLayer(long d_in, long d_out, Act act);

    Tensor forward(const Tensor& x, Tensor* h) const override;
    long in_dim() const override { return d_in_; }
    long out_dim() const override { return d_out_; }
    long param_count() const override;
    long distributed_param_count() const override { return param_count(); }
    void init(Rng& rng) override;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const override;
    std::string kind() const override { return "affine"; }
    std::unique_ptr<Layer> clone() const override;

    Act activation() const { return act_; }

  private:
    long d_in_, d_out_;
    Act act_;
    Tensor W_, b_;
};

// Stack of agent-axis layers. Accepts [groups, n, d_in] for any n >= 1, or
// [n, d_in] as a single group.
class GlpeNetwork {
  public:
    GlpeNetwork() = default;
    GlpeNetwork(GlpeNetwork&&) = default;
    GlpeNetwork& operator=(GlpeNetwork&&) = default;
    GlpeNetwork(const GlpeNetwork& other);
    GlpeNetwork& operator=(const GlpeNetwork& other);

    GlpeNetwork& add_glpe(long d_in, long d_out, Pool pool, Act global_act, Act local_act,
                          bool with_pool_bias = false);
    GlpeNetwork& add_gru(long d_in, long d_hidden);
    GlpeNetwork& add_affine(long d_in, long d_out, Act act);

    long layer_count() const { return static_cast<long>(layers_.size()); }
    const Layer& layer(long i) const { return *layers_[static_cast<size_t>(i)]; }
    long input_dim() const;
    long output_dim() const;
    long recurrent_layer_count() const;

    // Zero hidden states, one per recurrent layer.
    std::vector<Tensor> initial_hidden(long groups, long n) const;
    Tensor forward(const Tensor& x, std::vector<Tensor>* hiddens = nullptr) const;

    void init(Rng& rng);
    std::vector<Tensor> parameters() const;
    std::vector<NamedParam> named_parameters() const;
    long param_count() const;
    void copy_params_from(const GlpeNetwork& other);
    void set_requires_grad(bool rg);

  private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// MLP over the flattened joint input [n*d_in] -> [n*d_out]; the non-PE
// baseline. Forward input is [batch, total_in].
class PlainMlp {
  public:
    PlainMlp& add_layer(long d_in, long d_out, Act act);

    Tensor forward(const Tensor& x) const;
    long input_dim() const;
    long output_dim() const;

    void init(Rng& rng);
    std::vector<Tensor> parameters() const;
    std::vector<NamedParam> named_parameters() const;
    long param_count() const;

  private:
    struct Affine {
        Tensor W, b;
        Act act;
    };
    std::vector<Affine> layers_;
};

// The local-only counterpart used by the size-bound comparison: every GLPE
// layer collapses to its local affine path, recurrent layers carry over.
GlpeNetwork distributed_twin(const GlpeNetwork& net);

// True when param_count(net) <= 2 * param_count(distributed). Throws
// DimensionError when the two stacks are not layer-by-layer comparable.
bool check_size_bound(const GlpeNetwork& net, const GlpeNetwork& distributed);

GlpeNetwork make_cpe_policy(long obs_dim, long n_actions, long hidden = 64);
GlpeNetwork make_distributed_policy(long obs_dim, long n_actions, long hidden = 64);
GlpeNetwork make_toy_pe_network(long d, Pool pool, Act global_act, long hidden = 64,
                                long n_layers = 3);
PlainMlp make_toy_mlp(long n_agents, long d, long hidden = 64, long n_layers = 3);

}  // namespace glpe
