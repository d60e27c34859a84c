#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "glpe/error.hpp"

namespace glpe {

// Dimension list, rank 1..3, row-major storage.
using Dims = std::vector<long>;

long numel(const Dims& dims);
std::string dims_str(const Dims& dims);
void check_rank(const Dims& dims);

struct TensorImpl {
    Dims dims;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
};

// Dense tensor of 64-bit floats. Value type over a shared buffer: copies
// alias the same storage, ops allocate fresh outputs. All entries are kept
// finite; a NaN/Inf produced by any op raises NumericError.
class Tensor {
  public:
    Tensor() = default;
    Tensor(Dims dims, double fill, bool requires_grad = false);
    Tensor(Dims dims, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Dims dims, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return impl_ != nullptr; }
    const Dims& dims() const { return impl_->dims; }
    long rank() const { return static_cast<long>(impl_->dims.size()); }
    long dim(long i) const { return impl_->dims[static_cast<size_t>(i)]; }
    long size() const { return static_cast<long>(impl_->data.size()); }

    std::span<const double> data() const { return impl_->data; }
    // Mutable access for initialization and optimizer updates; bypasses the
    // tape, so never use it on a tensor that is part of a live graph.
    std::span<double> raw() { return impl_->data; }

    double item() const;
    double at(std::initializer_list<long> idx) const;

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool rg);

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const double> grad() const;
    std::span<double> grad_raw();
    void ensure_grad();
    void zero_grad();

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

  private:
    std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of operations. Each node holds (via its closure) shared
// references to input and output buffers plus the backward rule; replaying
// in reverse order accumulates gradients into every reachable
// requires_grad leaf. One writer per tape.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape();

    void record(std::function<void()> backward_rule);
    void backward(const Tensor& loss);
    void clear();
    size_t size() const { return nodes_.size(); }

    // Thread-local active tape; ops record onto it when grad is enabled.
    static Tape* active();
    void activate();
    void deactivate();

  private:
    std::vector<std::function<void()>> nodes_;
    bool active_here_ = false;
};

// Disables recording (and requires_grad propagation) within scope.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// True when this op invocation should be recorded.
bool recording(bool any_input_requires_grad);

void check_finite(std::span<const double> v, const char* what);

}  // namespace glpe
