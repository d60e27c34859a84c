#include "glpe/layers.hpp"

#include <algorithm>
#include <cmath>

namespace glpe {

namespace {

Tensor weight(long fan_in, long fan_out) {
    return Tensor({fan_in, fan_out}, 0.0, true);
}

Tensor bias(long n) { return Tensor({n}, 0.0, true); }

void init_weight(Tensor& w, long fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    rng.fill_uniform(w.raw(), -bound, bound);
}

void zero_out(Tensor& t) {
    std::fill(t.raw().begin(), t.raw().end(), 0.0);
}

void check_layer_input(const Tensor& x, long d_in, const char* kind) {
    if (x.rank() != 3)
        throw DimensionError(std::string(kind) + ": want [groups, n, d], got " +
                             dims_str(x.dims()));
    if (x.dim(2) != d_in)
        throw DimensionError(std::string(kind) + ": input width " +
                             std::to_string(x.dim(2)) + ", layer expects " +
                             std::to_string(d_in));
    if (x.dim(1) < 1) throw DimensionError(std::string(kind) + ": empty agent axis");
}

}  // namespace

GlpeLayer::GlpeLayer(long d_in, long d_out, Pool pool, Act global_act, Act local_act,
                     bool with_pool_bias)
    : d_in_(d_in),
      d_out_(d_out),
      pool_(pool),
      global_act_(global_act),
      local_act_(local_act),
      W_loc_(weight(d_in, d_out)),
      b_loc_(bias(d_out)),
      W_pool_(weight(d_in, d_out)) {
    if (d_in < 1 || d_out < 1) throw DimensionError("glpe layer: dims must be positive");
    if (with_pool_bias) pool_bias_ = bias(d_out);
}

Tensor GlpeLayer::forward(const Tensor& x, Tensor*) const {
    check_layer_input(x, d_in_, "glpe");
    Tensor local = ops::elementwise(local_act_, ops::add_bias(ops::matmul(x, W_loc_), b_loc_));
    Tensor global = ops::elementwise(global_act_, ops::matmul(ops::pool_agents(pool_, x), W_pool_));
    if (pool_bias_.defined()) global = ops::add_bias(global, pool_bias_);
    return ops::add_pooled(local, global);
}

long GlpeLayer::param_count() const {
    return d_in_ * d_out_ + d_out_ + d_in_ * d_out_ + (pool_bias_.defined() ? d_out_ : 0);
}

long GlpeLayer::distributed_param_count() const { return d_in_ * d_out_ + d_out_; }

void GlpeLayer::init(Rng& rng) {
    init_weight(W_loc_, d_in_, rng);
    init_weight(W_pool_, d_in_, rng);
    zero_out(b_loc_);
    if (pool_bias_.defined()) zero_out(pool_bias_);
}

void GlpeLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".W_loc", W_loc_});
    out.push_back({prefix + ".b_loc", b_loc_});
    out.push_back({prefix + ".W_pool", W_pool_});
    if (pool_bias_.defined()) out.push_back({prefix + ".pool_bias", pool_bias_});
}

std::unique_ptr<Layer> GlpeLayer::clone() const {
    auto c = std::make_unique<GlpeLayer>(d_in_, d_out_, pool_, global_act_, local_act_,
                                         pool_bias_.defined());
    auto copy_into = [](Tensor& dst, const Tensor& src) {
        std::copy(src.data().begin(), src.data().end(), dst.raw().begin());
    };
    copy_into(c->W_loc_, W_loc_);
    copy_into(c->b_loc_, b_loc_);
    copy_into(c->W_pool_, W_pool_);
    if (pool_bias_.defined()) copy_into(c->pool_bias_, pool_bias_);
    return c;
}

GruGlpeLayer::GruGlpeLayer(long d_in, long d_hidden)
    : d_in_(d_in),
      d_h_(d_hidden),
      W_ih_(weight(d_in, 3 * d_hidden)),
      W_hh_(weight(d_hidden, 3 * d_hidden)),
      b_ih_(bias(3 * d_hidden)),
      b_hh_(bias(3 * d_hidden)) {
    if (d_in < 1 || d_hidden < 1) throw DimensionError("gru layer: dims must be positive");
}

Tensor GruGlpeLayer::forward(const Tensor& x, Tensor* h) const {
    check_layer_input(x, d_in_, "gru");
    if (h == nullptr || !h->defined())
        throw StateError("gru layer: missing hidden state slot");
    if (h->dims() != Dims{x.dim(0), x.dim(1), d_h_})
        throw DimensionError("gru layer: hidden shape " + dims_str(h->dims()) +
                             " for input " + dims_str(x.dims()));
    const long H = d_h_;
    Tensor gx = ops::add_bias(ops::matmul(x, W_ih_), b_ih_);
    Tensor gh = ops::add_bias(ops::matmul(*h, W_hh_), b_hh_);
    Tensor r = ops::elementwise(Act::Sigmoid,
                                ops::add(ops::slice_last(gx, 0, H), ops::slice_last(gh, 0, H)));
    Tensor z = ops::elementwise(Act::Sigmoid,
                                ops::add(ops::slice_last(gx, H, H), ops::slice_last(gh, H, H)));
    Tensor n = ops::elementwise(
        Act::Tanh,
        ops::add(ops::slice_last(gx, 2 * H, H), ops::mul(r, ops::slice_last(gh, 2 * H, H))));
    Tensor out = ops::add(ops::mul(z, *h), ops::mul(ops::scale_shift(z, -1.0, 1.0), n));
    *h = out;
    return out;
}

long GruGlpeLayer::param_count() const {
    return d_in_ * 3 * d_h_ + d_h_ * 3 * d_h_ + 3 * d_h_ + 3 * d_h_;
}

void GruGlpeLayer::init(Rng& rng) {
    init_weight(W_ih_, d_in_, rng);
    init_weight(W_hh_, d_h_, rng);
    zero_out(b_ih_);
    zero_out(b_hh_);
}

void GruGlpeLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".W_ih", W_ih_});
    out.push_back({prefix + ".W_hh", W_hh_});
    out.push_back({prefix + ".b_ih", b_ih_});
    out.push_back({prefix + ".b_hh", b_hh_});
}

std::unique_ptr<Layer> GruGlpeLayer::clone() const {
    auto c = std::make_unique<GruGlpeLayer>(d_in_, d_h_);
    auto copy_into = [](Tensor& dst, const Tensor& src) {
        std::copy(src.data().begin(), src.data().end(), dst.raw().begin());
    };
    copy_into(c->W_ih_, W_ih_);
    copy_into(c->W_hh_, W_hh_);
    copy_into(c->b_ih_, b_ih_);
    copy_into(c->b_hh_, b_hh_);
    return c;
}

LocalAffineLayer::LocalAffineLayer(long d_in, long d_out, Act act)
    : d_in_(d_in), d_out_(d_out), act_(act), W_(weight(d_in, d_out)), b_(bias(d_out)) {
    if (d_in < 1 || d_out < 1) throw DimensionError("affine layer: dims must be positive");
}

Tensor LocalAffineLayer::forward(const Tensor& x, Tensor*) const {
    check_layer_input(x, d_in_, "affine");
    return ops::elementwise(act_, ops::add_bias(ops::matmul(x, W_), b_));
}

long LocalAffineLayer::param_count() const { return d_in_ * d_out_ + d_out_; }

void LocalAffineLayer::init(Rng& rng) {
    init_weight(W_, d_in_, rng);
    zero_out(b_);
}

void LocalAffineLayer::collect(const std::string& prefix,
                               std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".W", W_});
    out.push_back({prefix + ".b", b_});
}

std::unique_ptr<Layer> LocalAffineLayer::clone() const {
    auto c = std::make_unique<LocalAffineLayer>(d_in_, d_out_, act_);
    std::copy(W_.data().begin(), W_.data().end(), c->W_.raw().begin());
    std::copy(b_.data().begin(), b_.data().end(), c->b_.raw().begin());
    return c;
}

GlpeNetwork::GlpeNetwork(const GlpeNetwork& other) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

GlpeNetwork& GlpeNetwork::operator=(const GlpeNetwork& other) {
    if (this != &other) {
        layers_.clear();
        layers_.reserve(other.layers_.size());
        for (const auto& l : other.layers_) layers_.push_back(l->clone());
    }
    return *this;
}

GlpeNetwork& GlpeNetwork::add_glpe(long d_in, long d_out, Pool pool, Act global_act,
                                   Act local_act, bool with_pool_bias) {
    layers_.push_back(
        std::make_unique<GlpeLayer>(d_in, d_out, pool, global_act, local_act, with_pool_bias));
    return *this;
}

GlpeNetwork& GlpeNetwork::add_gru(long d_in, long d_hidden) {
    layers_.push_back(std::make_unique<GruGlpeLayer>(d_in, d_hidden));
    return *this;
}

GlpeNetwork& GlpeNetwork::add_affine(long d_in, long d_out, Act act) {
    layers_.push_back(std::make_unique<LocalAffineLayer>(d_in, d_out, act));
    return *this;
}

long GlpeNetwork::input_dim() const {
    if (layers_.empty()) throw StateError("empty network");
    return layers_.front()->in_dim();
}

long GlpeNetwork::output_dim() const {
    if (layers_.empty()) throw StateError("empty network");
    return layers_.back()->out_dim();
}

long GlpeNetwork::recurrent_layer_count() const {
    long n = 0;
    for (const auto& l : layers_)
        if (l->hidden_dim() > 0) ++n;
    return n;
}

std::vector<Tensor> GlpeNetwork::initial_hidden(long groups, long n) const {
    std::vector<Tensor> h;
    for (const auto& l : layers_)
        if (l->hidden_dim() > 0) h.push_back(Tensor::zeros({groups, n, l->hidden_dim()}));
    return h;
}

Tensor GlpeNetwork::forward(const Tensor& x, std::vector<Tensor>* hiddens) const {
    if (layers_.empty()) throw StateError("empty network");
    const long n_rec = recurrent_layer_count();
    if (n_rec > 0) {
        if (hiddens == nullptr)
            throw StateError("network has recurrent layers but no hidden slots given");
        if (static_cast<long>(hiddens->size()) != n_rec)
            throw StateError("hidden slot count " + std::to_string(hiddens->size()) +
                             ", network has " + std::to_string(n_rec) +
                             " recurrent layers");
    }
    const bool joint2d = x.rank() == 2;
    Tensor cur = joint2d ? ops::reshape(x, {1, x.dim(0), x.dim(1)}) : x;
    size_t hi = 0;
    for (const auto& l : layers_) {
        Tensor* h = l->hidden_dim() > 0 ? &(*hiddens)[hi++] : nullptr;
        cur = l->forward(cur, h);
    }
    if (joint2d) cur = ops::reshape(cur, {cur.dim(1), cur.dim(2)});
    return cur;
}

void GlpeNetwork::init(Rng& rng) {
    for (auto& l : layers_) l->init(rng);
}

std::vector<Tensor> GlpeNetwork::parameters() const {
    std::vector<Tensor> out;
    for (const auto& np : named_parameters()) out.push_back(np.tensor);
    return out;
}

std::vector<NamedParam> GlpeNetwork::named_parameters() const {
    std::vector<NamedParam> out;
    for (size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect("layer" + std::to_string(i), out);
    return out;
}

long GlpeNetwork::param_count() const {
    long n = 0;
    for (const auto& l : layers_) n += l->param_count();
    return n;
}

void GlpeNetwork::copy_params_from(const GlpeNetwork& other) {
    auto dst = named_parameters();
    auto src = other.named_parameters();
    if (dst.size() != src.size())
        throw DimensionError("parameter copy between differently shaped networks");
    for (size_t i = 0; i < dst.size(); ++i) {
        if (dst[i].name != src[i].name || dst[i].tensor.dims() != src[i].tensor.dims())
            throw DimensionError("parameter copy mismatch at " + dst[i].name);
        std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(),
                  dst[i].tensor.raw().begin());
    }
}

void GlpeNetwork::set_requires_grad(bool rg) {
    for (auto& p : parameters()) p.set_requires_grad(rg);
}

PlainMlp& PlainMlp::add_layer(long d_in, long d_out, Act act) {
    if (d_in < 1 || d_out < 1) throw DimensionError("mlp layer: dims must be positive");
    layers_.push_back({weight(d_in, d_out), bias(d_out), act});
    return *this;
}

Tensor PlainMlp::forward(const Tensor& x) const {
    if (layers_.empty()) throw StateError("empty mlp");
    if (x.rank() != 2 || x.dim(1) != input_dim())
        throw DimensionError("mlp: want [batch, " + std::to_string(input_dim()) +
                             "], got " + dims_str(x.dims()));
    Tensor cur = x;
    for (const auto& l : layers_)
        cur = ops::elementwise(l.act, ops::add_bias(ops::matmul(cur, l.W), l.b));
    return cur;
}

long PlainMlp::input_dim() const {
    if (layers_.empty()) throw StateError("empty mlp");
    return layers_.front().W.dim(0);
}

long PlainMlp::output_dim() const {
    if (layers_.empty()) throw StateError("empty mlp");
    return layers_.back().W.dim(1);
}

void PlainMlp::init(Rng& rng) {
    for (auto& l : layers_) {
        init_weight(l.W, l.W.dim(0), rng);
        zero_out(l.b);
    }
}

std::vector<Tensor> PlainMlp::parameters() const {
    std::vector<Tensor> out;
    for (const auto& l : layers_) {
        out.push_back(l.W);
        out.push_back(l.b);
    }
    return out;
}

std::vector<NamedParam> PlainMlp::named_parameters() const {
    std::vector<NamedParam> out;
    for (size_t i = 0; i < layers_.size(); ++i) {
        out.push_back({"layer" + std::to_string(i) + ".W", layers_[i].W});
        out.push_back({"layer" + std::to_string(i) + ".b", layers_[i].b});
    }
    return out;
}

long PlainMlp::param_count() const {
    long n = 0;
    for (const auto& l : layers_) n += l.W.size() + l.b.size();
    return n;
}

GlpeNetwork distributed_twin(const GlpeNetwork& net) {
    GlpeNetwork twin;
    for (long i = 0; i < net.layer_count(); ++i) {
        const Layer& l = net.layer(i);
        if (l.kind() == "gru") {
            twin.add_gru(l.in_dim(), l.out_dim());
        } else if (l.kind() == "glpe") {
            twin.add_affine(l.in_dim(), l.out_dim(),
                            static_cast<const GlpeLayer&>(l).local_activation());
        } else {
            twin.add_affine(l.in_dim(), l.out_dim(),
                            static_cast<const LocalAffineLayer&>(l).activation());
        }
    }
    return twin;
}

bool check_size_bound(const GlpeNetwork& net, const GlpeNetwork& distributed) {
    if (net.layer_count() != distributed.layer_count())
        throw DimensionError("size bound: different layer counts");
    for (long i = 0; i < net.layer_count(); ++i) {
        const Layer& a = net.layer(i);
        const Layer& b = distributed.layer(i);
        if (a.in_dim() != b.in_dim() || a.out_dim() != b.out_dim() ||
            a.hidden_dim() != b.hidden_dim())
            throw DimensionError("size bound: layer " + std::to_string(i) +
                                 " widths do not match");
        if ((a.kind() == "gru") != (b.kind() == "gru"))
            throw DimensionError("size bound: layer " + std::to_string(i) +
                                 " kinds do not match");
    }
    return net.param_count() <= 2 * distributed.param_count();
}

GlpeNetwork make_cpe_policy(long obs_dim, long n_actions, long hidden) {
    GlpeNetwork net;
    net.add_glpe(obs_dim, hidden, Pool::Mean, Act::Tanh, Act::Relu)
        .add_gru(hidden, hidden)
        .add_glpe(hidden, n_actions, Pool::Mean, Act::Tanh, Act::Identity);
    return net;
}

GlpeNetwork make_distributed_policy(long obs_dim, long n_actions, long hidden) {
    GlpeNetwork net;
    net.add_affine(obs_dim, hidden, Act::Relu)
        .add_gru(hidden, hidden)
        .add_affine(hidden, n_actions, Act::Identity);
    return net;
}

GlpeNetwork make_toy_pe_network(long d, Pool pool, Act global_act, long hidden,
                                long n_layers) {
    if (n_layers < 2) throw DimensionError("toy network needs at least 2 layers");
    GlpeNetwork net;
    net.add_glpe(d, hidden, pool, global_act, Act::Elu);
    for (long i = 0; i < n_layers - 2; ++i)
        net.add_glpe(hidden, hidden, pool, global_act, Act::Elu);
    net.add_glpe(hidden, d, pool, global_act, Act::Identity);
    return net;
}

PlainMlp make_toy_mlp(long n_agents, long d, long hidden, long n_layers) {
    if (n_layers < 2) throw DimensionError("toy mlp needs at least 2 layers");
    PlainMlp mlp;
    mlp.add_layer(n_agents * d, hidden, Act::Elu);
    for (long i = 0; i < n_layers - 2; ++i) mlp.add_layer(hidden, hidden, Act::Elu);
    mlp.add_layer(hidden, n_agents * d, Act::Identity);
    return mlp;
}

}  // namespace glpe
