#include "sarlv/ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sarlv/parallel.hpp"

namespace sarlv {

namespace {

std::atomic<bool> g_strict_finite{false};

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

void check_finite(const Tensor& t, const char* op) {
    if (!g_strict_finite.load(std::memory_order_relaxed)) return;
    for (double v : t.data()) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(std::string(op) + ": non-finite input rejected");
        }
    }
}

Precision promote(const Tensor& a) { return a.precision() == Precision::f64 ? Precision::f64 : Precision::f32; }

Precision promote(const Tensor& a, const Tensor& b) {
    if (a.precision() == Precision::f64 || b.precision() == Precision::f64) return Precision::f64;
    return Precision::f32;
}

NodePtr fresh(Shape shape, Precision p, bool needs_grad) {
    auto node = std::make_shared<TensorNode>();
    node->data.assign(static_cast<std::size_t>(numel(shape)), 0.0);
    node->shape = std::move(shape);
    node->precision = p;
    node->needs_grad = needs_grad;
    return node;
}

bool wants_grad(const Tensor& t) { return t.node()->needs_grad; }

bool recording(bool needs) { return needs && Tape::current() != nullptr; }

std::vector<double>& grad_of(const NodePtr& n) {
    if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
    return n->grad;
}

void finish(std::vector<double>& data, Precision p) { round_to_precision(data, p); }

// Row-count heuristic below which matmul stays on the calling thread.
constexpr std::int64_t kParallelFlops = 1 << 15;

// c[m,n] = a[m,k] * b[k,n]
void mm_nn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
           std::int64_t n, bool accumulate) {
    auto body = [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            double* crow = c + i * n;
            if (!accumulate) std::fill(crow, crow + n, 0.0);
            const double* arow = a + i * k;
            for (std::int64_t p = 0; p < k; ++p) {
                double av = arow[p];
                const double* brow = b + p * n;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    };
    if (m * k * n < kParallelFlops) body(0, m);
    else parallel_for(m, body);
}

// c[m,k] = a[m,n] * b[k,n]^T
void mm_nt(const double* a, const double* b, double* c, std::int64_t m, std::int64_t n,
           std::int64_t k, bool accumulate) {
    auto body = [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            const double* arow = a + i * n;
            double* crow = c + i * k;
            for (std::int64_t p = 0; p < k; ++p) {
                const double* brow = b + p * n;
                double acc = 0.0;
                for (std::int64_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
                if (accumulate) crow[p] += acc;
                else crow[p] = acc;
            }
        }
    };
    if (m * n * k < kParallelFlops) body(0, m);
    else parallel_for(m, body);
}

// c[k,n] = a[m,k]^T * b[m,n]
void mm_tn(const double* a, const double* b, double* c, std::int64_t m, std::int64_t k,
           std::int64_t n, bool accumulate) {
    auto body = [&](std::int64_t p0, std::int64_t p1) {
        for (std::int64_t p = p0; p < p1; ++p) {
            double* crow = c + p * n;
            if (!accumulate) std::fill(crow, crow + n, 0.0);
            for (std::int64_t i = 0; i < m; ++i) {
                double av = a[i * k + p];
                const double* brow = b + i * n;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    };
    if (m * k * n < kParallelFlops) body(0, k);
    else parallel_for(k, body);
}

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    for (std::size_t i = 0; i < small.size(); ++i) {
        if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
    }
    return true;
}

int normalize_axis(int axis, int rank, const char* op) {
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) {
        throw std::invalid_argument(std::string(op) + ": axis out of range for rank " +
                                    std::to_string(rank));
    }
    return axis;
}

// Collapse a shape around `axis` into [outer, dim, inner].
struct AxisView {
    std::int64_t outer = 1, dim = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, int axis) {
    AxisView v;
    for (int i = 0; i < axis; ++i) v.outer *= shape[static_cast<std::size_t>(i)];
    v.dim = shape[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i)
        v.inner *= shape[i];
    return v;
}

}  // namespace

void set_strict_finite(bool on) { g_strict_finite.store(on, std::memory_order_relaxed); }
bool strict_finite() { return g_strict_finite.load(std::memory_order_relaxed); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_finite(a, "matmul");
    check_finite(b, "matmul");
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    }
    std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    bool needs = wants_grad(a) || wants_grad(b);
    auto out = fresh({m, n}, promote(a, b), needs);
    mm_nn(a.data().data(), b.data().data(), out->data.data(), m, k, n, false);
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node(), bn = b.node();
        Tape::current()->record("matmul", out, [an, bn, out, m, k, n] {
            const auto& dc = out->grad;
            if (an->needs_grad) {
                mm_nt(dc.data(), bn->data.data(), grad_of(an).data(), m, n, k, true);
            }
            if (bn->needs_grad) {
                mm_tn(an->data.data(), dc.data(), grad_of(bn).data(), m, k, n, true);
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_finite(a, "add");
    check_finite(b, "add");
    if (!is_suffix(b.shape(), a.shape())) {
        throw std::invalid_argument("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
    std::int64_t bn_size = b.size() == 0 ? 1 : b.size();
    bool needs = wants_grad(a) || wants_grad(b);
    auto out = fresh(a.shape(), promote(a, b), needs);
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i)
        out->data[i] = ad[i] + bd[i % static_cast<std::size_t>(bn_size)];
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node(), bn = b.node();
        Tape::current()->record("add", out, [an, bn, out, bn_size] {
            const auto& dc = out->grad;
            if (an->needs_grad) {
                auto& da = grad_of(an);
                for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
            }
            if (bn->needs_grad) {
                auto& db = grad_of(bn);
                for (std::size_t i = 0; i < dc.size(); ++i)
                    db[i % static_cast<std::size_t>(bn_size)] += dc[i];
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor multiply(const Tensor& a, const Tensor& b) {
    check_finite(a, "multiply");
    check_finite(b, "multiply");
    if (!is_suffix(b.shape(), a.shape())) {
        throw std::invalid_argument("multiply: shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
    }
    std::int64_t bn_size = b.size() == 0 ? 1 : b.size();
    bool needs = wants_grad(a) || wants_grad(b);
    auto out = fresh(a.shape(), promote(a, b), needs);
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i)
        out->data[i] = ad[i] * bd[i % static_cast<std::size_t>(bn_size)];
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node(), bn = b.node();
        Tape::current()->record("multiply", out, [an, bn, out, bn_size] {
            const auto& dc = out->grad;
            auto bsz = static_cast<std::size_t>(bn_size);
            if (an->needs_grad) {
                auto& da = grad_of(an);
                for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * bn->data[i % bsz];
            }
            if (bn->needs_grad) {
                auto& db = grad_of(bn);
                for (std::size_t i = 0; i < dc.size(); ++i) db[i % bsz] += dc[i] * an->data[i];
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor transpose(const Tensor& a) {
    check_finite(a, "transpose");
    if (a.rank() != 2) {
        throw std::invalid_argument("transpose: expects rank 2, got " + shape_str(a.shape()));
    }
    std::int64_t m = a.dim(0), n = a.dim(1);
    bool needs = wants_grad(a);
    auto out = fresh({n, m}, promote(a), needs);
    const auto& ad = a.data();
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) out->data[static_cast<std::size_t>(j * m + i)] = ad[static_cast<std::size_t>(i * n + j)];
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("transpose", out, [an, out, m, n] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            for (std::int64_t j = 0; j < n; ++j)
                for (std::int64_t i = 0; i < m; ++i)
                    da[static_cast<std::size_t>(i * n + j)] += dc[static_cast<std::size_t>(j * m + i)];
        });
    }
    return Tensor::wrap(out);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: empty input list");
    int rank = parts[0].rank();
    int ax = normalize_axis(axis, rank, "concat");
    Shape out_shape = parts[0].shape();
    std::int64_t total = 0;
    for (const auto& p : parts) {
        check_finite(p, "concat");
        if (p.rank() != rank) {
            throw std::invalid_argument("concat: rank mismatch " + shape_str(parts[0].shape()) +
                                        " vs " + shape_str(p.shape()));
        }
        for (int i = 0; i < rank; ++i) {
            if (i != ax && p.shape()[static_cast<std::size_t>(i)] != out_shape[static_cast<std::size_t>(i)]) {
                throw std::invalid_argument("concat: shape mismatch " +
                                            shape_str(parts[0].shape()) + " vs " +
                                            shape_str(p.shape()));
            }
        }
        total += p.dim(ax);
    }
    out_shape[static_cast<std::size_t>(ax)] = total;
    bool needs = false;
    Precision prec = Precision::f32;
    bool any64 = false;
    for (const auto& p : parts) {
        needs = needs || wants_grad(p);
        any64 = any64 || p.precision() == Precision::f64;
    }
    if (any64) prec = Precision::f64;
    auto out = fresh(out_shape, prec, needs);
    AxisView ov = axis_view(out_shape, ax);
    std::int64_t offset = 0;
    for (const auto& p : parts) {
        AxisView pv = axis_view(p.shape(), ax);
        const auto& pd = p.data();
        for (std::int64_t o = 0; o < pv.outer; ++o) {
            const double* src = pd.data() + o * pv.dim * pv.inner;
            double* dst = out->data.data() + (o * ov.dim + offset) * ov.inner;
            std::copy(src, src + pv.dim * pv.inner, dst);
        }
        offset += pv.dim;
    }
    finish(out->data, out->precision);
    if (recording(needs)) {
        std::vector<NodePtr> nodes;
        std::vector<std::int64_t> dims;
        for (const auto& p : parts) {
            nodes.push_back(p.node());
            dims.push_back(p.dim(ax));
        }
        Tape::current()->record("concat", out, [nodes, dims, out, ov] {
            const auto& dc = out->grad;
            std::int64_t offset = 0;
            for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                std::int64_t d = dims[pi];
                if (nodes[pi]->needs_grad) {
                    auto& da = grad_of(nodes[pi]);
                    for (std::int64_t o = 0; o < ov.outer; ++o) {
                        const double* src = dc.data() + (o * ov.dim + offset) * ov.inner;
                        double* dst = da.data() + o * d * ov.inner;
                        for (std::int64_t i = 0; i < d * ov.inner; ++i) dst[i] += src[i];
                    }
                }
                offset += d;
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t stop) {
    check_finite(a, "slice");
    int ax = normalize_axis(axis, a.rank(), "slice");
    std::int64_t d = a.dim(ax);
    if (start < 0 || stop > d || start > stop) {
        throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                    std::to_string(stop) + ") invalid for axis size " +
                                    std::to_string(d));
    }
    Shape out_shape = a.shape();
    out_shape[static_cast<std::size_t>(ax)] = stop - start;
    bool needs = wants_grad(a);
    auto out = fresh(out_shape, promote(a), needs);
    AxisView av = axis_view(a.shape(), ax);
    std::int64_t width = stop - start;
    const auto& ad = a.data();
    for (std::int64_t o = 0; o < av.outer; ++o) {
        const double* src = ad.data() + (o * av.dim + start) * av.inner;
        double* dst = out->data.data() + o * width * av.inner;
        std::copy(src, src + width * av.inner, dst);
    }
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("slice", out, [an, out, av, start, width] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            for (std::int64_t o = 0; o < av.outer; ++o) {
                const double* src = dc.data() + o * width * av.inner;
                double* dst = da.data() + (o * av.dim + start) * av.inner;
                for (std::int64_t i = 0; i < width * av.inner; ++i) dst[i] += src[i];
            }
        });
    }
    return Tensor::wrap(out);
}

namespace {

Tensor reduce_all(const Tensor& a, bool take_mean, const char* name) {
    check_finite(a, name);
    bool needs = wants_grad(a);
    auto out = fresh({}, promote(a), needs);
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    double denom = take_mean ? static_cast<double>(a.size() == 0 ? 1 : a.size()) : 1.0;
    out->data[0] = acc / denom;
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record(name, out, [an, out, denom] {
            auto& da = grad_of(an);
            double g = out->grad[0] / denom;
            for (auto& v : da) v += g;
        });
    }
    return Tensor::wrap(out);
}

}  // namespace

Tensor mean_all(const Tensor& a) { return reduce_all(a, true, "mean_all"); }
Tensor sum_all(const Tensor& a) { return reduce_all(a, false, "sum_all"); }

Tensor mean(const Tensor& a, int axis) {
    check_finite(a, "mean");
    int ax = normalize_axis(axis, a.rank(), "mean");
    AxisView av = axis_view(a.shape(), ax);
    Shape out_shape;
    for (int i = 0; i < a.rank(); ++i)
        if (i != ax) out_shape.push_back(a.shape()[static_cast<std::size_t>(i)]);
    bool needs = wants_grad(a);
    auto out = fresh(out_shape, promote(a), needs);
    const auto& ad = a.data();
    for (std::int64_t o = 0; o < av.outer; ++o) {
        for (std::int64_t i = 0; i < av.inner; ++i) {
            double acc = 0.0;
            for (std::int64_t d = 0; d < av.dim; ++d)
                acc += ad[static_cast<std::size_t>((o * av.dim + d) * av.inner + i)];
            out->data[static_cast<std::size_t>(o * av.inner + i)] = acc / static_cast<double>(av.dim);
        }
    }
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("mean", out, [an, out, av] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            for (std::int64_t o = 0; o < av.outer; ++o)
                for (std::int64_t d = 0; d < av.dim; ++d)
                    for (std::int64_t i = 0; i < av.inner; ++i)
                        da[static_cast<std::size_t>((o * av.dim + d) * av.inner + i)] +=
                            dc[static_cast<std::size_t>(o * av.inner + i)] / static_cast<double>(av.dim);
        });
    }
    return Tensor::wrap(out);
}

Tensor scale(const Tensor& a, double c) {
    check_finite(a, "scale");
    bool needs = wants_grad(a);
    auto out = fresh(a.shape(), promote(a), needs);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < ad.size(); ++i) out->data[i] = ad[i] * c;
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("scale", out, [an, out, c] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * c;
        });
    }
    return Tensor::wrap(out);
}

Tensor exp(const Tensor& a) {
    check_finite(a, "exp");
    bool needs = wants_grad(a);
    auto out = fresh(a.shape(), promote(a), needs);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < ad.size(); ++i) out->data[i] = std::exp(ad[i]);
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("exp", out, [an, out] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * out->data[i];
        });
    }
    return Tensor::wrap(out);
}

Tensor log(const Tensor& a) {
    check_finite(a, "log");
    bool needs = wants_grad(a);
    auto out = fresh(a.shape(), promote(a), needs);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < ad.size(); ++i) out->data[i] = std::log(ad[i]);
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("log", out, [an, out] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i] / an->data[i];
        });
    }
    return Tensor::wrap(out);
}

Tensor softmax(const Tensor& a, int axis) {
    check_finite(a, "softmax");
    int ax = normalize_axis(axis, a.rank(), "softmax");
    AxisView av = axis_view(a.shape(), ax);
    bool needs = wants_grad(a);
    auto out = fresh(a.shape(), promote(a), needs);
    const auto& ad = a.data();
    for (std::int64_t o = 0; o < av.outer; ++o) {
        for (std::int64_t i = 0; i < av.inner; ++i) {
            auto at = [&](std::int64_t d) -> std::size_t {
                return static_cast<std::size_t>((o * av.dim + d) * av.inner + i);
            };
            double mx = -std::numeric_limits<double>::infinity();
            for (std::int64_t d = 0; d < av.dim; ++d) mx = std::max(mx, ad[at(d)]);
            double denom = 0.0;
            for (std::int64_t d = 0; d < av.dim; ++d) denom += std::exp(ad[at(d)] - mx);
            for (std::int64_t d = 0; d < av.dim; ++d)
                out->data[at(d)] = std::exp(ad[at(d)] - mx) / denom;
        }
    }
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("softmax", out, [an, out, av] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            const auto& y = out->data;
            for (std::int64_t o = 0; o < av.outer; ++o) {
                for (std::int64_t i = 0; i < av.inner; ++i) {
                    auto at = [&](std::int64_t d) -> std::size_t {
                        return static_cast<std::size_t>((o * av.dim + d) * av.inner + i);
                    };
                    double dot = 0.0;
                    for (std::int64_t d = 0; d < av.dim; ++d) dot += dc[at(d)] * y[at(d)];
                    for (std::int64_t d = 0; d < av.dim; ++d)
                        da[at(d)] += y[at(d)] * (dc[at(d)] - dot);
                }
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    check_finite(x, "layer_norm");
    check_finite(gamma, "layer_norm");
    check_finite(beta, "layer_norm");
    std::int64_t d = x.dim(-1);
    if (gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != d || beta.dim(0) != d) {
        throw std::invalid_argument("layer_norm: affine shapes " + shape_str(gamma.shape()) +
                                    "/" + shape_str(beta.shape()) + " do not match feature dim " +
                                    std::to_string(d));
    }
    std::int64_t rows = x.size() / d;
    bool needs = wants_grad(x) || wants_grad(gamma) || wants_grad(beta);
    auto out = fresh(x.shape(), promote(x, gamma), needs);
    // xhat and inv_sigma are captured for the backward pass.
    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows * d));
    auto inv_sigma = std::make_shared<std::vector<double>>(static_cast<std::size_t>(rows));
    const auto& xd = x.data();
    const auto& gd = gamma.data();
    const auto& bd = beta.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = xd.data() + r * d;
        double mu = 0.0;
        for (std::int64_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(d);
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[static_cast<std::size_t>(r)] = is;
        for (std::int64_t j = 0; j < d; ++j) {
            double xh = (row[j] - mu) * is;
            (*xhat)[static_cast<std::size_t>(r * d + j)] = xh;
            out->data[static_cast<std::size_t>(r * d + j)] = xh * gd[static_cast<std::size_t>(j)] + bd[static_cast<std::size_t>(j)];
        }
    }
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto xn = x.node(), gn = gamma.node(), bn = beta.node();
        Tape::current()->record("layer_norm", out, [xn, gn, bn, out, xhat, inv_sigma, rows, d] {
            const auto& dc = out->grad;
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* dyr = dc.data() + r * d;
                const double* xhr = xhat->data() + r * d;
                if (gn->needs_grad) {
                    auto& dg = grad_of(gn);
                    for (std::int64_t j = 0; j < d; ++j) dg[static_cast<std::size_t>(j)] += dyr[j] * xhr[j];
                }
                if (bn->needs_grad) {
                    auto& db = grad_of(bn);
                    for (std::int64_t j = 0; j < d; ++j) db[static_cast<std::size_t>(j)] += dyr[j];
                }
                if (xn->needs_grad) {
                    auto& dx = grad_of(xn);
                    double is = (*inv_sigma)[static_cast<std::size_t>(r)];
                    double mean_g = 0.0, mean_gx = 0.0;
                    for (std::int64_t j = 0; j < d; ++j) {
                        double gdy = dyr[j] * gn->data[static_cast<std::size_t>(j)];
                        mean_g += gdy;
                        mean_gx += gdy * xhr[j];
                    }
                    mean_g /= static_cast<double>(d);
                    mean_gx /= static_cast<double>(d);
                    for (std::int64_t j = 0; j < d; ++j) {
                        double gdy = dyr[j] * gn->data[static_cast<std::size_t>(j)];
                        dx[static_cast<std::size_t>(r * d + j)] += is * (gdy - mean_g - xhr[j] * mean_gx);
                    }
                }
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor gelu(const Tensor& a) {
    check_finite(a, "gelu");
    bool needs = wants_grad(a);
    auto out = fresh(a.shape(), promote(a), needs);
    const auto& ad = a.data();
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    for (std::size_t i = 0; i < ad.size(); ++i) {
        out->data[i] = 0.5 * ad[i] * (1.0 + std::erf(ad[i] * inv_sqrt2));
    }
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("gelu", out, [an, out] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            constexpr double inv_sqrt2 = 0.7071067811865475244;
            constexpr double inv_sqrt2pi = 0.3989422804014326779;
            for (std::size_t i = 0; i < dc.size(); ++i) {
                double x = an->data[i];
                double phi = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                da[i] += dc[i] * (phi + x * pdf);
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<std::int64_t>& ids) {
    check_finite(table, "embedding_lookup");
    if (table.rank() != 2) {
        throw std::invalid_argument("embedding_lookup: table must be rank 2, got " +
                                    shape_str(table.shape()));
    }
    std::int64_t v = table.dim(0), d = table.dim(1);
    for (auto id : ids) {
        if (id < 0 || id >= v) {
            throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                        " out of range [0," + std::to_string(v) + ")");
        }
    }
    std::int64_t n = static_cast<std::int64_t>(ids.size());
    bool needs = wants_grad(table);
    auto out = fresh({n, d}, promote(table), needs);
    const auto& td = table.data();
    for (std::int64_t i = 0; i < n; ++i) {
        std::copy(td.data() + ids[static_cast<std::size_t>(i)] * d,
                  td.data() + (ids[static_cast<std::size_t>(i)] + 1) * d,
                  out->data.data() + i * d);
    }
    if (recording(needs)) {
        auto tn = table.node();
        auto idv = ids;
        Tape::current()->record("embedding_lookup", out, [tn, out, idv, d] {
            auto& dt = grad_of(tn);
            const auto& dc = out->grad;
            for (std::size_t i = 0; i < idv.size(); ++i) {
                double* dst = dt.data() + idv[i] * d;
                const double* src = dc.data() + static_cast<std::int64_t>(i) * d;
                for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor cross_entropy_with_logits(const Tensor& logits,
                                 const std::vector<std::int64_t>& targets) {
    check_finite(logits, "cross_entropy_with_logits");
    if (logits.rank() != 2 || logits.dim(0) != static_cast<std::int64_t>(targets.size())) {
        throw std::invalid_argument("cross_entropy_with_logits: logits " +
                                    shape_str(logits.shape()) + " vs " +
                                    std::to_string(targets.size()) + " targets");
    }
    std::int64_t n = logits.dim(0), v = logits.dim(1);
    for (auto t : targets) {
        if (t < 0 || t >= v) {
            throw std::invalid_argument("cross_entropy_with_logits: target " + std::to_string(t) +
                                        " out of range [0," + std::to_string(v) + ")");
        }
    }
    bool needs = wants_grad(logits);
    auto out = fresh({n}, promote(logits), needs);
    // Captured softmax rows keep the backward cheap; loss rows are few.
    auto probs = std::make_shared<std::vector<double>>(logits.data());
    const auto& ld = logits.data();
    for (std::int64_t i = 0; i < n; ++i) {
        const double* row = ld.data() + i * v;
        double* prow = probs->data() + i * v;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < v; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::int64_t j = 0; j < v; ++j) denom += std::exp(row[j] - mx);
        double log_denom = std::log(denom);
        for (std::int64_t j = 0; j < v; ++j) prow[j] = std::exp(row[j] - mx) / denom;
        out->data[static_cast<std::size_t>(i)] =
            log_denom + mx - row[targets[static_cast<std::size_t>(i)]];
    }
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto ln = logits.node();
        auto tgt = targets;
        Tape::current()->record("cross_entropy_with_logits", out, [ln, out, probs, tgt, v] {
            auto& dl = grad_of(ln);
            const auto& dc = out->grad;
            for (std::size_t i = 0; i < tgt.size(); ++i) {
                double g = dc[i];
                if (g == 0.0) continue;
                const double* prow = probs->data() + static_cast<std::int64_t>(i) * v;
                double* drow = dl.data() + static_cast<std::int64_t>(i) * v;
                for (std::int64_t j = 0; j < v; ++j) drow[j] += g * prow[j];
                drow[tgt[i]] -= g;
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor l2_normalize(const Tensor& a, int axis) {
    check_finite(a, "l2_normalize");
    int ax = normalize_axis(axis, a.rank(), "l2_normalize");
    AxisView av = axis_view(a.shape(), ax);
    bool needs = wants_grad(a);
    auto out = fresh(a.shape(), promote(a), needs);
    auto inv_norms = std::make_shared<std::vector<double>>(static_cast<std::size_t>(av.outer * av.inner));
    const auto& ad = a.data();
    constexpr double eps = 1e-12;
    for (std::int64_t o = 0; o < av.outer; ++o) {
        for (std::int64_t i = 0; i < av.inner; ++i) {
            auto at = [&](std::int64_t d) -> std::size_t {
                return static_cast<std::size_t>((o * av.dim + d) * av.inner + i);
            };
            double ss = 0.0;
            for (std::int64_t d = 0; d < av.dim; ++d) ss += ad[at(d)] * ad[at(d)];
            double inv = 1.0 / std::max(std::sqrt(ss), eps);
            (*inv_norms)[static_cast<std::size_t>(o * av.inner + i)] = inv;
            for (std::int64_t d = 0; d < av.dim; ++d) out->data[at(d)] = ad[at(d)] * inv;
        }
    }
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("l2_normalize", out, [an, out, av, inv_norms] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            const auto& y = out->data;
            for (std::int64_t o = 0; o < av.outer; ++o) {
                for (std::int64_t i = 0; i < av.inner; ++i) {
                    auto at = [&](std::int64_t d) -> std::size_t {
                        return static_cast<std::size_t>((o * av.dim + d) * av.inner + i);
                    };
                    double inv = (*inv_norms)[static_cast<std::size_t>(o * av.inner + i)];
                    double dot = 0.0;
                    for (std::int64_t d = 0; d < av.dim; ++d) dot += dc[at(d)] * y[at(d)];
                    for (std::int64_t d = 0; d < av.dim; ++d)
                        da[at(d)] += inv * (dc[at(d)] - y[at(d)] * dot);
                }
            }
        });
    }
    return Tensor::wrap(out);
}

Tensor dropout(const Tensor& a, double p, RngState& rng, bool training) {
    check_finite(a, "dropout");
    if (p < 0.0 || p >= 1.0) {
        throw std::invalid_argument("dropout: probability " + std::to_string(p) +
                                    " outside [0,1)");
    }
    if (!training || p == 0.0) return a;  // evaluation mode is the identity
    bool needs = wants_grad(a);
    auto out = fresh(a.shape(), promote(a), needs);
    auto mask = std::make_shared<std::vector<double>>(a.data().size());
    double inv_keep = 1.0 / (1.0 - p);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < ad.size(); ++i) {
        double m = rng.uniform() < p ? 0.0 : inv_keep;
        (*mask)[i] = m;
        out->data[i] = ad[i] * m;
    }
    finish(out->data, out->precision);
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("dropout", out, [an, out, mask] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i] * (*mask)[i];
        });
    }
    return Tensor::wrap(out);
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                    shape_str(shape));
    }
    bool needs = wants_grad(a);
    auto out = fresh(shape, promote(a), needs);
    out->data = a.data();
    out->precision = a.precision();
    if (recording(needs)) {
        auto an = a.node();
        Tape::current()->record("reshape", out, [an, out] {
            auto& da = grad_of(an);
            const auto& dc = out->grad;
            for (std::size_t i = 0; i < dc.size(); ++i) da[i] += dc[i];
        });
    }
    return Tensor::wrap(out);
}

Tensor bf16_round(const Tensor& a) {
    auto out = fresh(a.shape(), Precision::bf16, false);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < ad.size(); ++i) out->data[i] = bf16_round_scalar(ad[i]);
    return Tensor::wrap(out);
}

double global_norm(const std::vector<Tensor>& tensors) {
    double ss = 0.0;
    for (const auto& t : tensors) {
        if (!t.defined()) continue;
        for (double v : t.data()) ss += v * v;
    }
    return std::sqrt(ss);
}

std::int64_t argmax_last_row(const Tensor& logits) {
    if (logits.rank() != 2 || logits.dim(0) < 1) {
        throw std::invalid_argument("argmax_last_row: need a non-empty rank-2 tensor, got " +
                                    shape_str(logits.shape()));
    }
    std::int64_t n = logits.dim(0), v = logits.dim(1);
    const double* row = logits.data().data() + (n - 1) * v;
    std::int64_t best = 0;
    for (std::int64_t j = 1; j < v; ++j) {
        if (row[j] > row[best]) best = j;  // ties keep the lowest id
    }
    return best;
}

}  // namespace sarlv
