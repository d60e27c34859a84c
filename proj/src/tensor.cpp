#include "glpe/tensor.hpp"

#include <sstream>

#include "glpe/kernels.hpp"

namespace glpe {

long numel(const Dims& dims) {
    long n = 1;
    for (long d : dims) n *= d;
    return n;
}

std::string dims_str(const Dims& dims) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < dims.size(); ++i) os << (i ? "," : "") << dims[i];
    os << ']';
    return os.str();
}

void check_rank(const Dims& dims) {
    if (dims.empty() || dims.size() > 3)
        throw DimensionError("tensor rank must be 1..3, got " + dims_str(dims));
    for (long d : dims)
        if (d < 0) throw DimensionError("negative dimension in " + dims_str(dims));
}

void check_finite(std::span<const double> v, const char* what) {
    if (!kernels::all_finite(v.data(), static_cast<long>(v.size())))
        throw NumericError(std::string("non-finite value in ") + what);
}

Tensor::Tensor(Dims dims, double fill, bool requires_grad) {
    check_rank(dims);
    impl_ = std::make_shared<TensorImpl>();
    impl_->data.assign(static_cast<size_t>(numel(dims)), fill);
    impl_->dims = std::move(dims);
    impl_->requires_grad = requires_grad;
    check_finite(impl_->data, "tensor fill");
}

Tensor::Tensor(Dims dims, std::vector<double> data, bool requires_grad) {
    check_rank(dims);
    if (numel(dims) != static_cast<long>(data.size()))
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + dims_str(dims));
    impl_ = std::make_shared<TensorImpl>();
    impl_->dims = std::move(dims);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
    check_finite(impl_->data, "tensor data");
}

Tensor Tensor::zeros(Dims dims, bool requires_grad) {
    return Tensor(std::move(dims), 0.0, requires_grad);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

double Tensor::item() const {
    if (size() != 1)
        throw DimensionError("item() on tensor of shape " + dims_str(dims()));
    return impl_->data[0];
}

double Tensor::at(std::initializer_list<long> idx) const {
    if (static_cast<long>(idx.size()) != rank())
        throw DimensionError("index rank mismatch");
    long off = 0;
    size_t i = 0;
    for (long v : idx) {
        if (v < 0 || v >= impl_->dims[i]) throw DimensionError("index out of range");
        off = off * impl_->dims[i] + v;
        ++i;
    }
    return impl_->data[static_cast<size_t>(off)];
}

Tensor& Tensor::set_requires_grad(bool rg) {
    impl_->requires_grad = rg;
    return *this;
}

std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::grad_raw() {
    ensure_grad();
    return impl_->grad;
}

void Tensor::ensure_grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
}

namespace {
thread_local Tape* t_active_tape = nullptr;
thread_local int t_no_grad_depth = 0;
}  // namespace

Tape::~Tape() {
    if (active_here_ && t_active_tape == this) t_active_tape = nullptr;
}

void Tape::record(std::function<void()> backward_rule) {
    nodes_.push_back(std::move(backward_rule));
}

void Tape::backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw DimensionError("backward requires a scalar loss, got shape " +
                             dims_str(loss.dims()));
    if (!loss.requires_grad())
        throw StateError("backward on a loss that requires no grad");
    auto& g = loss.impl()->grad;
    if (g.empty()) g.assign(1, 0.0);
    g[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void Tape::clear() { nodes_.clear(); }

Tape* Tape::active() { return t_active_tape; }

void Tape::activate() {
    if (t_active_tape && t_active_tape != this)
        throw StateError("another tape is already active on this thread");
    t_active_tape = this;
    active_here_ = true;
}

void Tape::deactivate() {
    if (t_active_tape == this) t_active_tape = nullptr;
    active_here_ = false;
}

NoGradGuard::NoGradGuard() { ++t_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --t_no_grad_depth; }

bool grad_enabled() { return t_no_grad_depth == 0; }

bool recording(bool any_input_requires_grad) {
    return any_input_requires_grad && grad_enabled() && t_active_tape != nullptr;
}

}  // namespace glpe
