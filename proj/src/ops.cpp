#include "glpe/ops.hpp"

#include <utility>

namespace glpe::ops {

namespace {

void require_defined(const Tensor& t, const char* what) {
    if (!t.defined()) throw StateError(std::string("undefined tensor passed to ") + what);
}

void require_same_dims(const Tensor& a, const Tensor& b, const char* what) {
    if (a.dims() != b.dims())
        throw DimensionError(std::string(what) + ": shape mismatch " + dims_str(a.dims()) +
                             " vs " + dims_str(b.dims()));
}

long last_dim(const Tensor& t) { return t.dim(t.rank() - 1); }
long row_count(const Tensor& t) { return t.size() / last_dim(t); }

bool mark_output(Tensor& y, bool any_input_rg) {
    const bool rg = any_input_rg && grad_enabled();
    y.set_requires_grad(rg);
    return rg && Tape::active() != nullptr;
}

// Gradient span of the output if any was accumulated, else empty (the output
// never reached the loss, so the node has nothing to propagate).
std::span<const double> out_grad(const Tensor& y) { return y.impl()->grad; }

}  // namespace

Tensor matmul(const Tensor& x, const Tensor& w) {
    require_defined(x, "matmul");
    require_defined(w, "matmul");
    if (w.rank() != 2)
        throw DimensionError("matmul: weight must be rank 2, got " + dims_str(w.dims()));
    const long k = last_dim(x);
    if (k != w.dim(0))
        throw DimensionError("matmul: inner dims " + dims_str(x.dims()) + " x " +
                             dims_str(w.dims()));
    const long m = row_count(x);
    const long h = w.dim(1);
    Dims out_dims = x.dims();
    out_dims.back() = h;
    Tensor y(std::move(out_dims), 0.0);
    kernels::matmul(x.data().data(), w.data().data(), y.raw().data(), m, k, h, false);
    check_finite(y.data(), "matmul");
    if (mark_output(y, x.requires_grad() || w.requires_grad())) {
        Tape::active()->record([x, w, y, m, k, h]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            if (x.requires_grad()) {
                Tensor xg = x;
                std::vector<double> wt(static_cast<size_t>(k * h));
                kernels::transpose(w.data().data(), wt.data(), k, h);
                kernels::matmul(dy.data(), wt.data(), xg.grad_raw().data(), m, h, k, true);
            }
            if (w.requires_grad()) {
                Tensor wg = w;
                kernels::matmul_at_b(x.data().data(), dy.data(), wg.grad_raw().data(), m, k,
                                     h);
            }
        });
    }
    return y;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
    require_defined(x, "add_bias");
    require_defined(b, "add_bias");
    if (b.rank() != 1 || b.dim(0) != last_dim(x))
        throw DimensionError("add_bias: bias " + dims_str(b.dims()) + " vs input " +
                             dims_str(x.dims()));
    const long rows = row_count(x);
    const long d = last_dim(x);
    Tensor y(x.dims(), 0.0);
    kernels::add_rows(x.data().data(), b.data().data(), y.raw().data(), rows, d);
    check_finite(y.data(), "add_bias");
    if (mark_output(y, x.requires_grad() || b.requires_grad())) {
        Tape::active()->record([x, b, y, rows, d]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            if (x.requires_grad()) {
                Tensor xg = x;
                kernels::accumulate(xg.grad_raw().data(), dy.data(), rows * d);
            }
            if (b.requires_grad()) {
                Tensor bg = b;
                kernels::add_rows_backward(dy.data(), bg.grad_raw().data(), rows, d);
            }
        });
    }
    return y;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_defined(a, "add");
    require_defined(b, "add");
    require_same_dims(a, b, "add");
    Tensor y(a.dims(), 0.0);
    kernels::add(a.data().data(), b.data().data(), y.raw().data(), a.size());
    check_finite(y.data(), "add");
    if (mark_output(y, a.requires_grad() || b.requires_grad())) {
        Tape::active()->record([a, b, y]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            if (a.requires_grad()) {
                Tensor ag = a;
                kernels::accumulate(ag.grad_raw().data(), dy.data(), a.size());
            }
            if (b.requires_grad()) {
                Tensor bg = b;
                kernels::accumulate(bg.grad_raw().data(), dy.data(), b.size());
            }
        });
    }
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_defined(a, "sub");
    require_defined(b, "sub");
    require_same_dims(a, b, "sub");
    Tensor y(a.dims(), 0.0);
    kernels::sub(a.data().data(), b.data().data(), y.raw().data(), a.size());
    check_finite(y.data(), "sub");
    if (mark_output(y, a.requires_grad() || b.requires_grad())) {
        Tape::active()->record([a, b, y]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            if (a.requires_grad()) {
                Tensor ag = a;
                kernels::accumulate(ag.grad_raw().data(), dy.data(), a.size());
            }
            if (b.requires_grad()) {
                Tensor bg = b;
                kernels::accumulate_scaled(bg.grad_raw().data(), dy.data(), -1.0, b.size());
            }
        });
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_defined(a, "mul");
    require_defined(b, "mul");
    require_same_dims(a, b, "mul");
    Tensor y(a.dims(), 0.0);
    kernels::mul(a.data().data(), b.data().data(), y.raw().data(), a.size());
    check_finite(y.data(), "mul");
    if (mark_output(y, a.requires_grad() || b.requires_grad())) {
        Tape::active()->record([a, b, y]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            if (a.requires_grad()) {
                Tensor ag = a;
                kernels::accumulate_prod(ag.grad_raw().data(), dy.data(), b.data().data(),
                                         a.size());
            }
            if (b.requires_grad()) {
                Tensor bg = b;
                kernels::accumulate_prod(bg.grad_raw().data(), dy.data(), a.data().data(),
                                         b.size());
            }
        });
    }
    return y;
}

Tensor scale_shift(const Tensor& x, double s, double c) {
    require_defined(x, "scale_shift");
    Tensor y(x.dims(), 0.0);
    kernels::scale_shift(x.data().data(), y.raw().data(), s, c, x.size());
    check_finite(y.data(), "scale_shift");
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([x, y, s]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            kernels::accumulate_scaled(xg.grad_raw().data(), dy.data(), s, x.size());
        });
    }
    return y;
}

Tensor elementwise(Act f, const Tensor& x) {
    require_defined(x, "elementwise");
    Tensor y(x.dims(), 0.0);
    kernels::unary(f, x.data().data(), y.raw().data(), x.size());
    check_finite(y.data(), "elementwise");
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([f, x, y]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            kernels::unary_backward(f, x.data().data(), y.data().data(), dy.data(),
                                    xg.grad_raw().data(), x.size());
        });
    }
    return y;
}

Tensor abs(const Tensor& x) {
    require_defined(x, "abs");
    Tensor y(x.dims(), 0.0);
    kernels::abs_val(x.data().data(), y.raw().data(), x.size());
    check_finite(y.data(), "abs");
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([x, y]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            kernels::abs_backward(x.data().data(), dy.data(), xg.grad_raw().data(),
                                  x.size());
        });
    }
    return y;
}

Tensor pool_agents(Pool p, const Tensor& x) {
    require_defined(x, "pool_agents");
    if (x.rank() != 3)
        throw DimensionError("pool_agents: want [groups, n, d], got " + dims_str(x.dims()));
    const long groups = x.dim(0), n = x.dim(1), d = x.dim(2);
    if (n == 0) throw DimensionError("pool_agents: empty agent axis");
    Tensor y({groups, d}, 0.0);
    std::vector<long> argmax;
    if (p == Pool::Max) argmax.resize(static_cast<size_t>(groups * d));
    kernels::pool_forward(p, x.data().data(), y.raw().data(), groups, n, d,
                          argmax.empty() ? nullptr : argmax.data());
    check_finite(y.data(), "pool_agents");
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([p, x, y, groups, n, d, argmax = std::move(argmax)]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            kernels::pool_backward(p, dy.data(), xg.grad_raw().data(), groups, n, d,
                                   argmax.empty() ? nullptr : argmax.data());
        });
    }
    return y;
}

Tensor mean_over_agents(const Tensor& x) {
    require_defined(x, "mean_over_agents");
    if (x.rank() != 2)
        throw DimensionError("mean_over_agents: want [n, d], got " + dims_str(x.dims()));
    const long n = x.dim(0), d = x.dim(1);
    if (n == 0) throw DimensionError("mean_over_agents: empty agent axis");
    Tensor y({d}, 0.0);
    kernels::pool_forward(Pool::Mean, x.data().data(), y.raw().data(), 1, n, d, nullptr);
    check_finite(y.data(), "mean_over_agents");
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([x, y, n, d]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            kernels::pool_backward(Pool::Mean, dy.data(), xg.grad_raw().data(), 1, n, d,
                                   nullptr);
        });
    }
    return y;
}

Tensor add_pooled(const Tensor& x, const Tensor& r) {
    require_defined(x, "add_pooled");
    require_defined(r, "add_pooled");
    if (x.rank() != 3 || r.rank() != 2 || x.dim(0) != r.dim(0) || x.dim(2) != r.dim(1))
        throw DimensionError("add_pooled: " + dims_str(x.dims()) + " vs " +
                             dims_str(r.dims()));
    const long groups = x.dim(0), n = x.dim(1), d = x.dim(2);
    Tensor y(x.dims(), 0.0);
    kernels::add_group_rows(x.data().data(), r.data().data(), y.raw().data(), groups, n, d);
    check_finite(y.data(), "add_pooled");
    if (mark_output(y, x.requires_grad() || r.requires_grad())) {
        Tape::active()->record([x, r, y, groups, n, d]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            if (x.requires_grad()) {
                Tensor xg = x;
                kernels::accumulate(xg.grad_raw().data(), dy.data(), x.size());
            }
            if (r.requires_grad()) {
                Tensor rg = r;
                kernels::add_group_rows_backward(dy.data(), rg.grad_raw().data(), groups, n,
                                                 d);
            }
        });
    }
    return y;
}

Tensor reshape(const Tensor& x, Dims dims) {
    require_defined(x, "reshape");
    check_rank(dims);
    if (numel(dims) != x.size())
        throw DimensionError("reshape: " + dims_str(x.dims()) + " -> " + dims_str(dims));
    Tensor y(std::move(dims), std::vector<double>(x.data().begin(), x.data().end()));
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([x, y]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            kernels::accumulate(xg.grad_raw().data(), dy.data(), x.size());
        });
    }
    return y;
}

Tensor slice_last(const Tensor& x, long start, long len) {
    require_defined(x, "slice_last");
    const long width = last_dim(x);
    if (start < 0 || len <= 0 || start + len > width)
        throw DimensionError("slice_last: [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") of width " +
                             std::to_string(width));
    const long rows = row_count(x);
    Dims out_dims = x.dims();
    out_dims.back() = len;
    Tensor y(std::move(out_dims), 0.0);
    kernels::slice_cols(x.data().data(), y.raw().data(), rows, width, start, len);
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([x, y, rows, width, start, len]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            kernels::slice_cols_backward(dy.data(), xg.grad_raw().data(), rows, width,
                                         start, len);
        });
    }
    return y;
}

Tensor gather_last(const Tensor& x, const std::vector<long>& idx) {
    require_defined(x, "gather_last");
    if (x.rank() < 2) throw DimensionError("gather_last: need rank >= 2");
    const long width = last_dim(x);
    const long rows = row_count(x);
    if (static_cast<long>(idx.size()) != rows)
        throw DimensionError("gather_last: " + std::to_string(idx.size()) +
                             " indices for " + std::to_string(rows) + " rows");
    for (long i : idx)
        if (i < 0 || i >= width) throw DimensionError("gather_last: index out of range");
    Dims out_dims(x.dims().begin(), x.dims().end() - 1);
    Tensor y(std::move(out_dims), 0.0);
    kernels::gather(x.data().data(), idx.data(), y.raw().data(), rows, width);
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([x, y, idx, rows, width]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            kernels::gather_backward(dy.data(), idx.data(), xg.grad_raw().data(), rows,
                                     width);
        });
    }
    return y;
}

Tensor sum_last(const Tensor& x) {
    require_defined(x, "sum_last");
    if (x.rank() < 2) throw DimensionError("sum_last: need rank >= 2");
    const long width = last_dim(x);
    const long rows = row_count(x);
    Dims out_dims(x.dims().begin(), x.dims().end() - 1);
    Tensor y(std::move(out_dims), 0.0);
    auto yd = y.raw();
    auto xd = x.data();
    for (long i = 0; i < rows; ++i) yd[i] = kernels::sum(xd.data() + i * width, width);
    check_finite(y.data(), "sum_last");
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([x, y, rows, width]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            auto dx = xg.grad_raw();
            for (long i = 0; i < rows; ++i)
                for (long j = 0; j < width; ++j) dx[i * width + j] += dy[i];
        });
    }
    return y;
}

Tensor bmm_vec(const Tensor& q, const Tensor& w) {
    require_defined(q, "bmm_vec");
    require_defined(w, "bmm_vec");
    if (q.rank() != 2 || w.rank() != 3 || q.dim(0) != w.dim(0) || q.dim(1) != w.dim(1))
        throw DimensionError("bmm_vec: " + dims_str(q.dims()) + " vs " +
                             dims_str(w.dims()));
    const long groups = w.dim(0), n = w.dim(1), h = w.dim(2);
    Tensor y({groups, h}, 0.0);
    kernels::contract_mid(q.data().data(), w.data().data(), y.raw().data(), groups, n, h);
    check_finite(y.data(), "bmm_vec");
    if (mark_output(y, q.requires_grad() || w.requires_grad())) {
        Tape::active()->record([q, w, y, groups, n, h]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor qg = q, wg = w;
            kernels::contract_mid_backward(
                q.data().data(), w.data().data(), dy.data(),
                q.requires_grad() ? qg.grad_raw().data() : nullptr,
                w.requires_grad() ? wg.grad_raw().data() : nullptr, groups, n, h);
        });
    }
    return y;
}

Tensor sum_all(const Tensor& x) {
    require_defined(x, "sum_all");
    Tensor y({1}, kernels::sum(x.data().data(), x.size()));
    check_finite(y.data(), "sum_all");
    if (mark_output(y, x.requires_grad())) {
        Tape::active()->record([x, y]() {
            auto dy = out_grad(y);
            if (dy.empty()) return;
            Tensor xg = x;
            auto dx = xg.grad_raw();
            for (long i = 0; i < x.size(); ++i) dx[i] += dy[0];
        });
    }
    return y;
}

Tensor mean_all(const Tensor& x) {
    require_defined(x, "mean_all");
    if (x.size() == 0) throw DimensionError("mean_all: empty tensor");
    return scale_shift(sum_all(x), 1.0 / static_cast<double>(x.size()), 0.0);
}

Tensor mse(const Tensor& pred, const Tensor& target) {
    require_same_dims(pred, target, "mse");
    Tensor d = sub(pred, target);
    return mean_all(mul(d, d));
}

std::vector<long> argmax_last(const Tensor& x) {
    require_defined(x, "argmax_last");
    if (x.rank() < 2) throw DimensionError("argmax_last: need rank >= 2");
    const long width = last_dim(x);
    const long rows = row_count(x);
    std::vector<long> out(static_cast<size_t>(rows));
    auto xd = x.data();
    for (long i = 0; i < rows; ++i) {
        const double* row = xd.data() + i * width;
        long best = 0;
        for (long j = 1; j < width; ++j)
            if (row[j] > row[best]) best = j;
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

}  // namespace glpe::ops
