#include "glpe/mixer.hpp"

#include <algorithm>

namespace glpe {

void Mixer::copy_params_from(const Mixer& other) {
    auto dst = named_parameters();
    auto src = other.named_parameters();
    if (dst.size() != src.size()) throw DimensionError("mixer parameter copy mismatch");
    for (size_t i = 0; i < dst.size(); ++i) {
        if (dst[i].name != src[i].name || dst[i].tensor.dims() != src[i].tensor.dims())
            throw DimensionError("mixer parameter copy mismatch at " + dst[i].name);
        std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(),
                  dst[i].tensor.raw().begin());
    }
}

void Mixer::set_requires_grad(bool rg) {
    for (auto& p : parameters()) p.set_requires_grad(rg);
}

Tensor VdnMixer::mix(const Tensor& q, const Tensor&) const {
    if (q.rank() != 2) throw DimensionError("vdn: want q [batch, n_agents]");
    return ops::sum_last(q);
}

QmixMixer::QmixMixer(long n_agents, long state_dim, long embed_dim, long hyper_hidden)
    : n_agents_(n_agents),
      state_dim_(state_dim),
      embed_(embed_dim),
      hyper_hidden_(hyper_hidden) {
    if (n_agents < 1 || state_dim < 1 || embed_dim < 1 || hyper_hidden < 1)
        throw DimensionError("qmix: dims must be positive");
    hyper_w1_.add_layer(state_dim, hyper_hidden, Act::Relu)
        .add_layer(hyper_hidden, n_agents * embed_dim, Act::Identity);
    hyper_w2_.add_layer(state_dim, hyper_hidden, Act::Relu)
        .add_layer(hyper_hidden, embed_dim, Act::Identity);
    hyper_b1_.add_layer(state_dim, embed_dim, Act::Identity);
    value_.add_layer(state_dim, hyper_hidden, Act::Relu)
        .add_layer(hyper_hidden, 1, Act::Identity);
}

Tensor QmixMixer::mix(const Tensor& q, const Tensor& state) const {
    if (q.rank() != 2 || q.dim(1) != n_agents_)
        throw DimensionError("qmix: q shape " + dims_str(q.dims()) + " for " +
                             std::to_string(n_agents_) + " agents");
    if (state.rank() != 2 || state.dim(0) != q.dim(0) || state.dim(1) != state_dim_)
        throw DimensionError("qmix: state shape " + dims_str(state.dims()));
    const long b = q.dim(0);
    Tensor w1 = ops::reshape(ops::abs(hyper_w1_.forward(state)), {b, n_agents_, embed_});
    Tensor b1 = hyper_b1_.forward(state);
    Tensor hidden = ops::elementwise(Act::Elu, ops::add(ops::bmm_vec(q, w1), b1));
    Tensor w2 = ops::reshape(ops::abs(hyper_w2_.forward(state)), {b, embed_, 1});
    Tensor v = value_.forward(state);
    return ops::reshape(ops::add(ops::bmm_vec(hidden, w2), v), {b});
}

std::vector<Tensor> QmixMixer::parameters() const {
    std::vector<Tensor> out;
    for (const auto& np : named_parameters()) out.push_back(np.tensor);
    return out;
}

std::vector<NamedParam> QmixMixer::named_parameters() const {
    std::vector<NamedParam> out;
    auto append = [&out](const char* prefix, const PlainMlp& net) {
        for (auto& np : net.named_parameters()) out.push_back({prefix + ("." + np.name), np.tensor});
    };
    append("hyper_w1", hyper_w1_);
    append("hyper_w2", hyper_w2_);
    append("hyper_b1", hyper_b1_);
    append("value", value_);
    return out;
}

void QmixMixer::init(Rng& rng) {
    hyper_w1_.init(rng);
    hyper_w2_.init(rng);
    hyper_b1_.init(rng);
    value_.init(rng);
}

long QmixMixer::param_count() const {
    return hyper_w1_.param_count() + hyper_w2_.param_count() + hyper_b1_.param_count() +
           value_.param_count();
}

std::unique_ptr<Mixer> QmixMixer::clone() const {
    auto c = std::make_unique<QmixMixer>(n_agents_, state_dim_, embed_, hyper_hidden_);
    c->copy_params_from(*this);
    return c;
}

std::unique_ptr<Mixer> make_mixer(const std::string& kind, long n_agents, long state_dim) {
    if (kind == "vdn") return std::make_unique<VdnMixer>();
    if (kind == "qmix") return std::make_unique<QmixMixer>(n_agents, state_dim);
    throw ConfigError("unknown mixer kind: " + kind);
}

}  // namespace glpe
