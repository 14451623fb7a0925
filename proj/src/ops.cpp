#include "edlb/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "edlb/errors.hpp"

namespace edlb {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapC = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapM = Eigen::Map<RowMat<T>>;

template <typename T>
using NodeT = TensorNode<T>;

int norm_axis(int axis, std::size_t ndim, const char* op) {
    const int n = static_cast<int>(ndim);
    const int a = axis < 0 ? axis + n : axis;
    if (a < 0 || a >= n) {
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for rank " +
                             std::to_string(n));
    }
    return a;
}

// Splits a shape around `axis` into outer * len * inner.
struct AxisSplit {
    std::int64_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, int axis) {
    AxisSplit r;
    for (int i = 0; i < axis; ++i) r.outer *= s[i];
    r.len = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

// ---------------------------------------------------------------------------
// Broadcasting.

struct Broadcast {
    Shape out;
    std::vector<std::int64_t> sa, sb;
    std::int64_t numel = 1;
};

std::vector<std::int64_t> contiguous_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size());
    std::int64_t acc = 1;
    for (std::size_t i = s.size(); i-- > 0;) {
        st[i] = acc;
        acc *= s[i];
    }
    return st;
}

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
    const std::size_t nd = std::max(a.size(), b.size());
    Broadcast p;
    p.out.assign(nd, 1);
    p.sa.assign(nd, 0);
    p.sb.assign(nd, 0);
    const auto sta = contiguous_strides(a);
    const auto stb = contiguous_strides(b);
    for (std::size_t i = 0; i < nd; ++i) {
        const std::ptrdiff_t ia = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(nd - a.size());
        const std::ptrdiff_t ib = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(nd - b.size());
        const std::int64_t da = ia >= 0 ? a[ia] : 1;
        const std::int64_t db = ib >= 0 ? b[ib] : 1;
        if (da != db && da != 1 && db != 1) {
            throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        p.out[i] = std::max(da, db);
        if (da == 0 || db == 0) p.out[i] = 0;
        p.sa[i] = (ia >= 0 && da != 1) ? sta[ia] : 0;
        p.sb[i] = (ib >= 0 && db != 1) ? stb[ib] : 0;
    }
    p.numel = numel_of(p.out);
    return p;
}

// Calls f(i_out, i_a, i_b) for every output element in row-major order.
template <class F>
void for_each_broadcast(const Broadcast& p, F&& f) {
    const std::size_t nd = p.out.size();
    if (p.numel == 0) return;
    if (nd == 0) {
        f(0, 0, 0);
        return;
    }
    const std::int64_t inner = p.out[nd - 1];
    const std::int64_t ia_in = p.sa[nd - 1], ib_in = p.sb[nd - 1];
    const std::int64_t outer = p.numel / inner;
    std::vector<std::int64_t> idx(nd, 0);
    std::int64_t oa = 0, ob = 0, i = 0;
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t j = 0; j < inner; ++j) f(i++, oa + j * ia_in, ob + j * ib_in);
        for (std::ptrdiff_t d = static_cast<std::ptrdiff_t>(nd) - 2; d >= 0; --d) {
            ++idx[d];
            oa += p.sa[d];
            ob += p.sb[d];
            if (idx[d] < p.out[d]) break;
            oa -= p.sa[d] * p.out[d];
            ob -= p.sb[d] * p.out[d];
            idx[d] = 0;
        }
    }
}

// dfa(x, y, z) = dz/dx, dfb(x, y, z) = dz/dy.
template <typename T, class Fwd, class DA, class DB>
BasicTensor<T> binary(const char* name, const BasicTensor<T>& a, const BasicTensor<T>& b, Fwd fwd, DA dfa,
                      DB dfb) {
    Broadcast p = plan_broadcast(a.shape(), b.shape(), name);
    std::vector<T> out(static_cast<std::size_t>(p.numel));
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    if (a.shape() == b.shape()) {
        for (std::int64_t i = 0; i < p.numel; ++i) out[i] = fwd(pa[i], pb[i]);
    } else {
        for_each_broadcast(p, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) { out[i] = fwd(pa[ia], pb[ib]); });
    }
    Shape shape = p.out;
    return make_op<T>(name, std::move(shape), std::move(out), {a, b}, [p, dfa, dfb](NodeT<T>& self) {
        NodeT<T>& na = *self.inputs[0];
        NodeT<T>& nb = *self.inputs[1];
        const T* g = self.grad.data();
        const T* x = na.data.data();
        const T* y = nb.data.data();
        const T* z = self.data.data();
        T* ga = na.requires_grad ? na.grad_buffer() : nullptr;
        T* gb = nb.requires_grad ? nb.grad_buffer() : nullptr;
        for_each_broadcast(p, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
            if (ga) ga[ia] += g[i] * dfa(x[ia], y[ib], z[i]);
            if (gb) gb[ib] += g[i] * dfb(x[ia], y[ib], z[i]);
        });
    });
}

// df(x, y) = dy/dx.
template <typename T, class Fwd, class DF>
BasicTensor<T> unary(const char* name, const BasicTensor<T>& x, Fwd fwd, DF df) {
    const auto in = x.data();
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
    return make_op<T>(name, x.shape(), std::move(out), {x}, [df](NodeT<T>& self) {
        NodeT<T>& nx = *self.inputs[0];
        T* gx = nx.grad_buffer();
        const T* g = self.grad.data();
        for (std::size_t i = 0; i < self.data.size(); ++i) gx[i] += g[i] * df(nx.data[i], self.data[i]);
    });
}

Shape reduced_shape(const Shape& s, int axis, bool keepdim) {
    Shape r = s;
    if (keepdim) {
        r[axis] = 1;
    } else {
        r.erase(r.begin() + axis);
    }
    return r;
}

// ---------------------------------------------------------------------------
// im2col helpers for one image and one channel group.

struct ConvGeom {
    std::int64_t c, h, w, kh, kw, ho, wo;
    int stride, pad;
};

template <typename T>
void im2col(const T* img, const ConvGeom& g, T* col) {
    const std::int64_t plane = g.ho * g.wo;
    for (std::int64_t c = 0; c < g.c; ++c) {
        const T* src = img + c * g.h * g.w;
        for (std::int64_t i = 0; i < g.kh; ++i) {
            for (std::int64_t j = 0; j < g.kw; ++j) {
                T* dst = col + ((c * g.kh + i) * g.kw + j) * plane;
                for (std::int64_t oy = 0; oy < g.ho; ++oy) {
                    const std::int64_t y = oy * g.stride - g.pad + i;
                    T* row = dst + oy * g.wo;
                    if (y < 0 || y >= g.h) {
                        std::fill(row, row + g.wo, T(0));
                        continue;
                    }
                    const T* srow = src + y * g.w;
                    for (std::int64_t ox = 0; ox < g.wo; ++ox) {
                        const std::int64_t x = ox * g.stride - g.pad + j;
                        row[ox] = (x >= 0 && x < g.w) ? srow[x] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const ConvGeom& g, T* img) {
    const std::int64_t plane = g.ho * g.wo;
    for (std::int64_t c = 0; c < g.c; ++c) {
        T* dst = img + c * g.h * g.w;
        for (std::int64_t i = 0; i < g.kh; ++i) {
            for (std::int64_t j = 0; j < g.kw; ++j) {
                const T* src = col + ((c * g.kh + i) * g.kw + j) * plane;
                for (std::int64_t oy = 0; oy < g.ho; ++oy) {
                    const std::int64_t y = oy * g.stride - g.pad + i;
                    if (y < 0 || y >= g.h) continue;
                    T* drow = dst + y * g.w;
                    const T* row = src + oy * g.wo;
                    for (std::int64_t ox = 0; ox < g.wo; ++ox) {
                        const std::int64_t x = ox * g.stride - g.pad + j;
                        if (x >= 0 && x < g.w) drow[x] += row[ox];
                    }
                }
            }
        }
    }
}

void require_4d(const Shape& s, const char* op) {
    if (s.size() != 4) throw DimensionError(std::string(op) + ": expected N x C x H x W, got " + shape_str(s));
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise.

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(1); });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); }, [](T, T, T) { return T(-1); });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; }, [](T x, T, T) { return x; });
}

template <typename T>
BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "div", a, b, [](T x, T y) { return x / y; }, [](T, T y, T) { return T(1) / y; },
        [](T, T y, T z) { return -z / y; });
}

template <typename T>
BasicTensor<T> maximum(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return binary<T>(
        "maximum", a, b, [](T x, T y) { return x >= y ? x : y; }, [](T x, T y, T) { return x >= y ? T(1) : T(0); },
        [](T x, T y, T) { return x >= y ? T(0) : T(1); });
}

template <typename T>
BasicTensor<T> neg(const BasicTensor<T>& x) {
    return unary<T>("neg", x, [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <typename T>
BasicTensor<T> exp(const BasicTensor<T>& x) {
    return unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x) {
    return unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& x) {
    return unary<T>(
        "abs", x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
BasicTensor<T> sqrt(const BasicTensor<T>& x) {
    return unary<T>("sqrt", x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x) {
    return unary<T>("square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
    return unary<T>(
        "relu", x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    return unary<T>(
        "gelu", x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v * T(kInvSqrt2))); },
        [](T v, T) {
            const T cdf = T(0.5) * (T(1) + std::erf(v * T(kInvSqrt2)));
            const T pdf = T(kInvSqrt2Pi) * std::exp(T(-0.5) * v * v);
            return cdf + v * pdf;
        });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
    return unary<T>(
        "sigmoid", x,
        [](T v) {
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            const T e = std::exp(v);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) {
    return unary<T>("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
BasicTensor<T> clamp_min(const BasicTensor<T>& x, T lo) {
    return unary<T>(
        "clamp_min", x, [lo](T v) { return v > lo ? v : lo; }, [lo](T v, T) { return v > lo ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, T s) {
    return unary<T>("add_scalar", x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
BasicTensor<T> mul_scalar(const BasicTensor<T>& x, T s) {
    return unary<T>("mul_scalar", x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

// ---------------------------------------------------------------------------
// Reductions.

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
    T acc = T(0);
    for (T v : x.data()) acc += v;
    return make_op<T>("sum", {}, {acc}, {x}, [](NodeT<T>& self) {
        NodeT<T>& nx = *self.inputs[0];
        T* gx = nx.grad_buffer();
        const T g = self.grad[0];
        for (std::size_t i = 0; i < nx.data.size(); ++i) gx[i] += g;
    });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x, int axis, bool keepdim) {
    const int a = norm_axis(axis, x.ndim(), "sum");
    const AxisSplit sp = split_at(x.shape(), a);
    std::vector<T> out(static_cast<std::size_t>(sp.outer * sp.inner), T(0));
    const T* px = x.data().data();
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t l = 0; l < sp.len; ++l)
            for (std::int64_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += px[(o * sp.len + l) * sp.inner + i];
    return make_op<T>("sum_axis", reduced_shape(x.shape(), a, keepdim), std::move(out), {x}, [sp](NodeT<T>& self) {
        NodeT<T>& nx = *self.inputs[0];
        T* gx = nx.grad_buffer();
        for (std::int64_t o = 0; o < sp.outer; ++o)
            for (std::int64_t l = 0; l < sp.len; ++l)
                for (std::int64_t i = 0; i < sp.inner; ++i)
                    gx[(o * sp.len + l) * sp.inner + i] += self.grad[o * sp.inner + i];
    });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
    if (x.numel() == 0) throw ContractError("mean of an empty tensor");
    return mul_scalar(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x, int axis, bool keepdim) {
    const int a = norm_axis(axis, x.ndim(), "mean");
    return mul_scalar(sum(x, a, keepdim), T(1) / static_cast<T>(x.shape()[a]));
}

template <typename T>
BasicTensor<T> max(const BasicTensor<T>& x) {
    if (x.numel() == 0) throw ContractError("max of an empty tensor");
    const auto d = x.data();
    const std::size_t arg = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
    return make_op<T>("max", {}, {d[arg]}, {x}, [arg](NodeT<T>& self) {
        self.inputs[0]->grad_buffer()[arg] += self.grad[0];
    });
}

namespace {
template <typename T, class Better>
BasicTensor<T> extreme_axis(const char* name, const BasicTensor<T>& x, int axis, bool keepdim, Better better) {
    const int a = norm_axis(axis, x.ndim(), name);
    const AxisSplit sp = split_at(x.shape(), a);
    if (sp.len == 0) throw ContractError(std::string(name) + " over an empty axis");
    std::vector<T> out(static_cast<std::size_t>(sp.outer * sp.inner));
    std::vector<std::int64_t> arg(out.size());
    const T* px = x.data().data();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        for (std::int64_t i = 0; i < sp.inner; ++i) {
            std::int64_t best = o * sp.len * sp.inner + i;
            for (std::int64_t l = 1; l < sp.len; ++l) {
                const std::int64_t k = (o * sp.len + l) * sp.inner + i;
                if (better(px[k], px[best])) best = k;
            }
            out[o * sp.inner + i] = px[best];
            arg[o * sp.inner + i] = best;
        }
    }
    return make_op<T>(name, reduced_shape(x.shape(), a, keepdim), std::move(out), {x},
                      [arg = std::move(arg)](NodeT<T>& self) {
                          T* gx = self.inputs[0]->grad_buffer();
                          for (std::size_t j = 0; j < arg.size(); ++j) gx[arg[j]] += self.grad[j];
                      });
}
}  // namespace

template <typename T>
BasicTensor<T> max(const BasicTensor<T>& x, int axis, bool keepdim) {
    return extreme_axis<T>("max_axis", x, axis, keepdim, [](T a, T b) { return a > b; });
}

template <typename T>
BasicTensor<T> min(const BasicTensor<T>& x, int axis, bool keepdim) {
    return extreme_axis<T>("min_axis", x, axis, keepdim, [](T a, T b) { return a < b; });
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& x) {
    if (x.ndim() == 0) throw DimensionError("softmax: needs at least one dimension");
    const std::int64_t d = x.shape().back();
    const std::int64_t rows = d == 0 ? 0 : x.numel() / d;
    std::vector<T> out(x.data().begin(), x.data().end());
    for (std::int64_t r = 0; r < rows; ++r) {
        T* row = out.data() + r * d;
        const T m = *std::max_element(row, row + d);
        T s = T(0);
        for (std::int64_t j = 0; j < d; ++j) s += (row[j] = std::exp(row[j] - m));
        for (std::int64_t j = 0; j < d; ++j) row[j] /= s;
    }
    return make_op<T>("softmax", x.shape(), std::move(out), {x}, [d, rows](NodeT<T>& self) {
        T* gx = self.inputs[0]->grad_buffer();
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* y = self.data.data() + r * d;
            const T* g = self.grad.data() + r * d;
            T dot = T(0);
            for (std::int64_t j = 0; j < d; ++j) dot += g[j] * y[j];
            for (std::int64_t j = 0; j < d; ++j) gx[r * d + j] += y[j] * (g[j] - dot);
        }
    });
}

template <typename T>
BasicTensor<T> layernorm(const BasicTensor<T>& x, const BasicTensor<T>& gamma, const BasicTensor<T>& beta,
                         T eps) {
    if (x.ndim() == 0) throw DimensionError("layernorm: needs at least one dimension");
    const std::int64_t d = x.shape().back();
    for (const auto* p : {&gamma, &beta}) {
        if (p->defined() && p->shape() != Shape{d}) {
            throw DimensionError("layernorm: affine parameter " + shape_str(p->shape()) + " does not match " +
                                 shape_str(x.shape()));
        }
    }
    const std::int64_t rows = x.numel() / d;
    std::vector<T> xhat(static_cast<std::size_t>(x.numel()));
    std::vector<T> rstd(static_cast<std::size_t>(rows));
    std::vector<T> out(xhat.size());
    const T* px = x.data().data();
    const T* pg = gamma.defined() ? gamma.data().data() : nullptr;
    const T* pb = beta.defined() ? beta.data().data() : nullptr;
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* row = px + r * d;
        T m = T(0);
        for (std::int64_t j = 0; j < d; ++j) m += row[j];
        m /= static_cast<T>(d);
        T v = T(0);
        for (std::int64_t j = 0; j < d; ++j) v += (row[j] - m) * (row[j] - m);
        v /= static_cast<T>(d);
        const T rs = T(1) / std::sqrt(v + eps);
        rstd[r] = rs;
        for (std::int64_t j = 0; j < d; ++j) {
            const T h = (row[j] - m) * rs;
            xhat[r * d + j] = h;
            out[r * d + j] = (pg ? h * pg[j] : h) + (pb ? pb[j] : T(0));
        }
    }
    TensorList<T> inputs{x};
    if (gamma.defined()) inputs.push_back(gamma);
    if (beta.defined()) inputs.push_back(beta);
    const bool has_g = gamma.defined(), has_b = beta.defined();
    return make_op<T>(
        "layernorm", x.shape(), std::move(out), inputs,
        [d, rows, has_g, has_b, xhat = std::move(xhat), rstd = std::move(rstd)](NodeT<T>& self) {
            NodeT<T>& nx = *self.inputs[0];
            NodeT<T>* ng = has_g ? self.inputs[1].get() : nullptr;
            NodeT<T>* nb = has_b ? self.inputs[has_g ? 2 : 1].get() : nullptr;
            T* gx = nx.requires_grad ? nx.grad_buffer() : nullptr;
            T* gg = (ng && ng->requires_grad) ? ng->grad_buffer() : nullptr;
            T* gb = (nb && nb->requires_grad) ? nb->grad_buffer() : nullptr;
            std::vector<T> dh(static_cast<std::size_t>(d));
            for (std::int64_t r = 0; r < rows; ++r) {
                const T* g = self.grad.data() + r * d;
                const T* h = xhat.data() + r * d;
                T s1 = T(0), s2 = T(0);
                for (std::int64_t j = 0; j < d; ++j) {
                    dh[j] = ng ? g[j] * ng->data[j] : g[j];
                    s1 += dh[j];
                    s2 += dh[j] * h[j];
                    if (gg) gg[j] += g[j] * h[j];
                    if (gb) gb[j] += g[j];
                }
                if (gx) {
                    const T inv_d = T(1) / static_cast<T>(d);
                    for (std::int64_t j = 0; j < d; ++j)
                        gx[r * d + j] += rstd[r] * (dh[j] - inv_d * s1 - h[j] * inv_d * s2);
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Layout.

template <typename T>
BasicTensor<T> permute(const BasicTensor<T>& x, const std::vector<int>& perm) {
    const std::size_t nd = x.ndim();
    if (perm.size() != nd) throw DimensionError("permute: permutation rank does not match " + shape_str(x.shape()));
    std::vector<bool> seen(nd, false);
    Shape out_shape(nd);
    for (std::size_t i = 0; i < nd; ++i) {
        const int p = norm_axis(perm[i], nd, "permute");
        if (seen[p]) throw DimensionError("permute: repeated axis");
        seen[p] = true;
        out_shape[i] = x.shape()[p];
    }
    const auto in_strides = contiguous_strides(x.shape());
    // Walk the output in order; the "a" side of the plan indexes the input.
    Broadcast plan;
    plan.out = out_shape;
    plan.numel = x.numel();
    plan.sa.resize(nd);
    plan.sb.assign(nd, 0);
    for (std::size_t i = 0; i < nd; ++i) plan.sa[i] = in_strides[norm_axis(perm[i], nd, "permute")];
    std::vector<T> out(static_cast<std::size_t>(x.numel()));
    const T* px = x.data().data();
    for_each_broadcast(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t) { out[i] = px[ia]; });
    return make_op<T>("permute", std::move(out_shape), std::move(out), {x}, [plan](NodeT<T>& self) {
        T* gx = self.inputs[0]->grad_buffer();
        const T* g = self.grad.data();
        for_each_broadcast(plan, [&](std::int64_t i, std::int64_t ia, std::int64_t) { gx[ia] += g[i]; });
    });
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& x, int d0, int d1) {
    std::vector<int> perm(x.ndim());
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm[norm_axis(d0, x.ndim(), "transpose")], perm[norm_axis(d1, x.ndim(), "transpose")]);
    return permute(x, perm);
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
    std::int64_t known = 1;
    int infer = -1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1) {
            if (infer >= 0) throw DimensionError("reshape: more than one inferred dimension");
            infer = static_cast<int>(i);
        } else {
            known *= shape[i];
        }
    }
    if (infer >= 0 && known > 0) shape[infer] = x.numel() / known;
    if (numel_of(shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    std::vector<T> out(x.data().begin(), x.data().end());
    return make_op<T>("reshape", std::move(shape), std::move(out), {x}, [](NodeT<T>& self) {
        T* gx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    });
}

template <typename T>
BasicTensor<T> concat(const TensorList<T>& xs, int axis) {
    if (xs.empty()) throw DimensionError("concat: no inputs");
    const int a = norm_axis(axis, xs[0].ndim(), "concat");
    Shape out_shape = xs[0].shape();
    out_shape[a] = 0;
    std::vector<std::int64_t> lens;
    for (const auto& t : xs) {
        Shape s = t.shape();
        if (s.size() != out_shape.size()) throw DimensionError("concat: rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (static_cast<int>(i) != a && s[i] != xs[0].shape()[i]) {
                throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(xs[0].shape()));
            }
        }
        out_shape[a] += s[a];
        lens.push_back(s[a]);
    }
    const AxisSplit sp = split_at(out_shape, a);
    std::vector<T> out(static_cast<std::size_t>(numel_of(out_shape)));
    std::int64_t offset = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const T* src = xs[k].data().data();
        const std::int64_t chunk = lens[k] * sp.inner;
        for (std::int64_t o = 0; o < sp.outer; ++o)
            std::copy(src + o * chunk, src + (o + 1) * chunk, out.begin() + o * sp.len * sp.inner + offset * sp.inner);
        offset += lens[k];
    }
    return make_op<T>("concat", std::move(out_shape), std::move(out), xs, [sp, lens](NodeT<T>& self) {
        std::int64_t off = 0;
        for (std::size_t k = 0; k < lens.size(); ++k) {
            NodeT<T>& nk = *self.inputs[k];
            if (nk.requires_grad) {
                T* gk = nk.grad_buffer();
                const std::int64_t chunk = lens[k] * sp.inner;
                for (std::int64_t o = 0; o < sp.outer; ++o) {
                    const T* g = self.grad.data() + o * sp.len * sp.inner + off * sp.inner;
                    for (std::int64_t j = 0; j < chunk; ++j) gk[o * chunk + j] += g[j];
                }
            }
            off += lens[k];
        }
    });
}

template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& x, int axis, std::int64_t start, std::int64_t end) {
    const int a = norm_axis(axis, x.ndim(), "slice");
    const AxisSplit sp = split_at(x.shape(), a);
    if (start < 0 || end > sp.len || start > end) {
        throw DimensionError("slice: range [" + std::to_string(start) + ", " + std::to_string(end) +
                             ") invalid for axis of length " + std::to_string(sp.len));
    }
    Shape out_shape = x.shape();
    out_shape[a] = end - start;
    const std::int64_t chunk = (end - start) * sp.inner;
    std::vector<T> out(static_cast<std::size_t>(sp.outer * chunk));
    const T* px = x.data().data();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        const T* src = px + (o * sp.len + start) * sp.inner;
        std::copy(src, src + chunk, out.begin() + o * chunk);
    }
    return make_op<T>("slice", std::move(out_shape), std::move(out), {x}, [sp, start, chunk](NodeT<T>& self) {
        T* gx = self.inputs[0]->grad_buffer();
        for (std::int64_t o = 0; o < sp.outer; ++o) {
            T* dst = gx + (o * sp.len + start) * sp.inner;
            const T* g = self.grad.data() + o * chunk;
            for (std::int64_t j = 0; j < chunk; ++j) dst[j] += g[j];
        }
    });
}

// ---------------------------------------------------------------------------
// Products.

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.ndim() < 2 || b.ndim() < 2) {
        throw DimensionError("matmul: operands need rank >= 2, got " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const std::int64_t m = a.dim(-2), k = a.dim(-1), kb = b.dim(-2), n = b.dim(-1);
    if (k != kb) {
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    if (b.ndim() == 2) {
        const std::int64_t rows = a.numel() / k;
        std::vector<T> out(static_cast<std::size_t>(rows * n));
        MapM<T>(out.data(), rows, n).noalias() = MapC<T>(a.data().data(), rows, k) * MapC<T>(b.data().data(), k, n);
        return make_op<T>("matmul", std::move(out_shape), std::move(out), {a, b}, [rows, k, n](NodeT<T>& self) {
            NodeT<T>& na = *self.inputs[0];
            NodeT<T>& nb = *self.inputs[1];
            MapC<T> g(self.grad.data(), rows, n);
            if (na.requires_grad)
                MapM<T>(na.grad_buffer(), rows, k).noalias() += g * MapC<T>(nb.data.data(), k, n).transpose();
            if (nb.requires_grad)
                MapM<T>(nb.grad_buffer(), k, n).noalias() += MapC<T>(na.data.data(), rows, k).transpose() * g;
        });
    }
    const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
    const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
    if (batch_a != batch_b) {
        throw DimensionError("matmul: batch dimensions differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const std::int64_t batches = numel_of(batch_a);
    std::vector<T> out(static_cast<std::size_t>(batches * m * n));
    for (std::int64_t i = 0; i < batches; ++i) {
        MapM<T>(out.data() + i * m * n, m, n).noalias() =
            MapC<T>(a.data().data() + i * m * k, m, k) * MapC<T>(b.data().data() + i * k * n, k, n);
    }
    return make_op<T>("bmm", std::move(out_shape), std::move(out), {a, b}, [batches, m, k, n](NodeT<T>& self) {
        NodeT<T>& na = *self.inputs[0];
        NodeT<T>& nb = *self.inputs[1];
        T* ga = na.requires_grad ? na.grad_buffer() : nullptr;
        T* gb = nb.requires_grad ? nb.grad_buffer() : nullptr;
        for (std::int64_t i = 0; i < batches; ++i) {
            MapC<T> g(self.grad.data() + i * m * n, m, n);
            if (ga)
                MapM<T>(ga + i * m * k, m, k).noalias() += g * MapC<T>(nb.data.data() + i * k * n, k, n).transpose();
            if (gb)
                MapM<T>(gb + i * k * n, k, n).noalias() += MapC<T>(na.data.data() + i * m * k, m, k).transpose() * g;
        }
    });
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
    if (weight.ndim() != 2) throw DimensionError("linear: weight must be 2-D, got " + shape_str(weight.shape()));
    const std::int64_t m = weight.dim(0), n = weight.dim(1);
    if (x.ndim() == 0 || x.dim(-1) != n) {
        throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                             shape_str(weight.shape()));
    }
    if (bias.defined() && bias.shape() != Shape{m}) {
        throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                             shape_str(weight.shape()));
    }
    const std::int64_t rows = x.numel() / n;
    Shape out_shape = x.shape();
    out_shape.back() = m;
    std::vector<T> out(static_cast<std::size_t>(rows * m));
    MapM<T> y(out.data(), rows, m);
    y.noalias() = MapC<T>(x.data().data(), rows, n) * MapC<T>(weight.data().data(), m, n).transpose();
    if (bias.defined()) {
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bv(bias.data().data(), m);
        y.rowwise() += bv;
    }
    TensorList<T> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    return make_op<T>("linear", std::move(out_shape), std::move(out), inputs, [rows, m, n](NodeT<T>& self) {
        NodeT<T>& nx = *self.inputs[0];
        NodeT<T>& nw = *self.inputs[1];
        MapC<T> g(self.grad.data(), rows, m);
        if (nx.requires_grad)
            MapM<T>(nx.grad_buffer(), rows, n).noalias() += g * MapC<T>(nw.data.data(), m, n);
        if (nw.requires_grad)
            MapM<T>(nw.grad_buffer(), m, n).noalias() += g.transpose() * MapC<T>(nx.data.data(), rows, n);
        if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
            Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(self.inputs[2]->grad_buffer(), m);
            gb += g.colwise().sum();
        }
    });
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel, const BasicTensor<T>& bias,
                      Conv2dOptions opt) {
    require_4d(input.shape(), "conv2d");
    if (kernel.ndim() != 4) throw DimensionError("conv2d: kernel must be 4-D, got " + shape_str(kernel.shape()));
    const std::int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::int64_t O = kernel.dim(0), Cg = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    const int G = opt.groups;
    if (G < 1 || C % G != 0 || O % G != 0) {
        throw ConfigError("conv2d: " + std::to_string(C) + " input and " + std::to_string(O) +
                          " output channels are not divisible by groups=" + std::to_string(G));
    }
    if (Cg != C / G) {
        throw ConfigError("conv2d: kernel " + shape_str(kernel.shape()) + " expects " + std::to_string(Cg) +
                          " channels per group, input provides " + std::to_string(C / G));
    }
    if (opt.stride < 1 || opt.padding < 0) throw ConfigError("conv2d: stride must be >= 1 and padding >= 0");
    if (bias.defined() && bias.shape() != Shape{O}) {
        throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match " + std::to_string(O) +
                             " output channels");
    }
    const std::int64_t Ho = (H + 2 * opt.padding - kh) / opt.stride + 1;
    const std::int64_t Wo = (W + 2 * opt.padding - kw) / opt.stride + 1;
    if (Ho <= 0 || Wo <= 0) throw DimensionError("conv2d: kernel larger than padded input " + shape_str(input.shape()));
    const ConvGeom geom{Cg, H, W, kh, kw, Ho, Wo, opt.stride, opt.padding};
    const std::int64_t Og = O / G, K = Cg * kh * kw, P = Ho * Wo;
    const bool pointwise = kh == 1 && kw == 1 && opt.stride == 1 && opt.padding == 0;

    std::vector<T> out(static_cast<std::size_t>(N * O * P));
    std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(K * P));
    const T* px = input.data().data();
    const T* pw = kernel.data().data();
    for (std::int64_t b = 0; b < N; ++b) {
        for (int g = 0; g < G; ++g) {
            const T* img = px + (b * C + g * Cg) * H * W;
            const T* colp = img;
            if (!pointwise) {
                im2col(img, geom, col.data());
                colp = col.data();
            }
            MapM<T>(out.data() + (b * O + g * Og) * P, Og, P).noalias() =
                MapC<T>(pw + g * Og * K, Og, K) * MapC<T>(colp, K, P);
        }
        if (bias.defined()) {
            for (std::int64_t o = 0; o < O; ++o) {
                T* row = out.data() + (b * O + o) * P;
                const T bv = bias.data()[o];
                for (std::int64_t p = 0; p < P; ++p) row[p] += bv;
            }
        }
    }
    TensorList<T> inputs{input, kernel};
    if (bias.defined()) inputs.push_back(bias);
    return make_op<T>(
        "conv2d", {N, O, Ho, Wo}, std::move(out), inputs,
        [=](NodeT<T>& self) {
            NodeT<T>& nx = *self.inputs[0];
            NodeT<T>& nw = *self.inputs[1];
            T* gx = nx.requires_grad ? nx.grad_buffer() : nullptr;
            T* gw = nw.requires_grad ? nw.grad_buffer() : nullptr;
            std::vector<T> colb(pointwise ? 0 : static_cast<std::size_t>(K * P));
            std::vector<T> dcol(pointwise ? 0 : static_cast<std::size_t>(K * P));
            for (std::int64_t b = 0; b < N; ++b) {
                for (int g = 0; g < G; ++g) {
                    MapC<T> dy(self.grad.data() + (b * O + g * Og) * P, Og, P);
                    const T* img = nx.data.data() + (b * C + g * Cg) * H * W;
                    if (gw) {
                        const T* colp = img;
                        if (!pointwise) {
                            im2col(img, geom, colb.data());
                            colp = colb.data();
                        }
                        MapM<T>(gw + g * Og * K, Og, K).noalias() += dy * MapC<T>(colp, K, P).transpose();
                    }
                    if (gx) {
                        T* gimg = gx + (b * C + g * Cg) * H * W;
                        if (pointwise) {
                            MapM<T>(gimg, K, P).noalias() += MapC<T>(nw.data.data() + g * Og * K, Og, K).transpose() * dy;
                        } else {
                            MapM<T>(dcol.data(), K, P).noalias() =
                                MapC<T>(nw.data.data() + g * Og * K, Og, K).transpose() * dy;
                            col2im_add(dcol.data(), geom, gimg);
                        }
                    }
                }
            }
            if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
                T* gb = self.inputs[2]->grad_buffer();
                for (std::int64_t b = 0; b < N; ++b)
                    for (std::int64_t o = 0; o < O; ++o) {
                        const T* row = self.grad.data() + (b * O + o) * P;
                        T s = T(0);
                        for (std::int64_t p = 0; p < P; ++p) s += row[p];
                        gb[o] += s;
                    }
            }
        });
}

template <typename T>
BasicTensor<T> avg_pool2d(const BasicTensor<T>& x, int kernel, int stride, int padding) {
    require_4d(x.shape(), "avg_pool2d");
    if (kernel < 1 || stride < 1 || padding < 0) throw ConfigError("avg_pool2d: invalid kernel/stride/padding");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::int64_t Ho = (H + 2 * padding - kernel) / stride + 1;
    const std::int64_t Wo = (W + 2 * padding - kernel) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw DimensionError("avg_pool2d: window larger than input " + shape_str(x.shape()));
    const T inv = T(1) / static_cast<T>(kernel * kernel);
    std::vector<T> out(static_cast<std::size_t>(N * C * Ho * Wo), T(0));
    const T* px = x.data().data();
    auto visit = [=](std::int64_t plane, auto&& f) {
        for (std::int64_t oy = 0; oy < Ho; ++oy)
            for (std::int64_t ox = 0; ox < Wo; ++ox)
                for (int i = 0; i < kernel; ++i) {
                    const std::int64_t y = oy * stride - padding + i;
                    if (y < 0 || y >= H) continue;
                    for (int j = 0; j < kernel; ++j) {
                        const std::int64_t xx = ox * stride - padding + j;
                        if (xx < 0 || xx >= W) continue;
                        f(plane * Ho * Wo + oy * Wo + ox, plane * H * W + y * W + xx);
                    }
                }
    };
    for (std::int64_t pl = 0; pl < N * C; ++pl) visit(pl, [&](std::int64_t o, std::int64_t i) { out[o] += px[i] * inv; });
    return make_op<T>("avg_pool2d", {N, C, Ho, Wo}, std::move(out), {x}, [=](NodeT<T>& self) {
        T* gx = self.inputs[0]->grad_buffer();
        for (std::int64_t pl = 0; pl < N * C; ++pl)
            visit(pl, [&](std::int64_t o, std::int64_t i) { gx[i] += self.grad[o] * inv; });
    });
}

template <typename T>
BasicTensor<T> reflection_pad2d(const BasicTensor<T>& x, int pad) {
    require_4d(x.shape(), "reflection_pad2d");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (pad < 0 || pad >= H || pad >= W) throw DimensionError("reflection_pad2d: padding must be smaller than the input");
    const std::int64_t Hp = H + 2 * pad, Wp = W + 2 * pad;
    std::vector<std::int64_t> src(static_cast<std::size_t>(Hp * Wp));
    auto reflect = [](std::int64_t i, std::int64_t n) {
        if (i < 0) return -i;
        if (i >= n) return 2 * (n - 1) - i;
        return i;
    };
    for (std::int64_t y = 0; y < Hp; ++y)
        for (std::int64_t xx = 0; xx < Wp; ++xx) src[y * Wp + xx] = reflect(y - pad, H) * W + reflect(xx - pad, W);
    std::vector<T> out(static_cast<std::size_t>(N * C * Hp * Wp));
    const T* px = x.data().data();
    for (std::int64_t pl = 0; pl < N * C; ++pl)
        for (std::int64_t i = 0; i < Hp * Wp; ++i) out[pl * Hp * Wp + i] = px[pl * H * W + src[i]];
    return make_op<T>("reflection_pad2d", {N, C, Hp, Wp}, std::move(out), {x},
                      [src = std::move(src), N, C, H, W, Hp, Wp](NodeT<T>& self) {
                          T* gx = self.inputs[0]->grad_buffer();
                          for (std::int64_t pl = 0; pl < N * C; ++pl)
                              for (std::int64_t i = 0; i < Hp * Wp; ++i)
                                  gx[pl * H * W + src[i]] += self.grad[pl * Hp * Wp + i];
                      });
}

template <typename T>
BasicTensor<T> bilinear_upsample(const BasicTensor<T>& x, std::int64_t out_h, std::int64_t out_w) {
    require_4d(x.shape(), "bilinear_upsample");
    if (out_h < 1 || out_w < 1) throw DimensionError("bilinear_upsample: output size must be positive");
    const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    struct Tap {
        std::int64_t i0, i1;
        T w1;
    };
    auto taps = [](std::int64_t in, std::int64_t out) {
        std::vector<Tap> t(static_cast<std::size_t>(out));
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        for (std::int64_t o = 0; o < out; ++o) {
            double s = (static_cast<double>(o) + 0.5) * scale - 0.5;
            if (s < 0) s = 0;
            std::int64_t i0 = static_cast<std::int64_t>(s);
            if (i0 > in - 1) i0 = in - 1;
            const std::int64_t i1 = std::min(i0 + 1, in - 1);
            t[o] = {i0, i1, static_cast<T>(s - static_cast<double>(i0))};
        }
        return t;
    };
    const auto ty = taps(H, out_h), tx = taps(W, out_w);
    std::vector<T> out(static_cast<std::size_t>(N * C * out_h * out_w));
    const T* px = x.data().data();
    for (std::int64_t pl = 0; pl < N * C; ++pl) {
        const T* in = px + pl * H * W;
        T* o = out.data() + pl * out_h * out_w;
        for (std::int64_t y = 0; y < out_h; ++y) {
            const Tap& a = ty[y];
            for (std::int64_t xx = 0; xx < out_w; ++xx) {
                const Tap& b = tx[xx];
                const T top = in[a.i0 * W + b.i0] * (T(1) - b.w1) + in[a.i0 * W + b.i1] * b.w1;
                const T bot = in[a.i1 * W + b.i0] * (T(1) - b.w1) + in[a.i1 * W + b.i1] * b.w1;
                o[y * out_w + xx] = top * (T(1) - a.w1) + bot * a.w1;
            }
        }
    }
    return make_op<T>("bilinear_upsample", {N, C, out_h, out_w}, std::move(out), {x},
                      [ty, tx, N, C, H, W, out_h, out_w](NodeT<T>& self) {
                          T* gx = self.inputs[0]->grad_buffer();
                          for (std::int64_t pl = 0; pl < N * C; ++pl) {
                              T* gi = gx + pl * H * W;
                              const T* g = self.grad.data() + pl * out_h * out_w;
                              for (std::int64_t y = 0; y < out_h; ++y) {
                                  const Tap& a = ty[y];
                                  for (std::int64_t xx = 0; xx < out_w; ++xx) {
                                      const Tap& b = tx[xx];
                                      const T v = g[y * out_w + xx];
                                      gi[a.i0 * W + b.i0] += v * (T(1) - a.w1) * (T(1) - b.w1);
                                      gi[a.i0 * W + b.i1] += v * (T(1) - a.w1) * b.w1;
                                      gi[a.i1 * W + b.i0] += v * a.w1 * (T(1) - b.w1);
                                      gi[a.i1 * W + b.i1] += v * a.w1 * b.w1;
                                  }
                              }
                          }
                      });
}

// ---------------------------------------------------------------------------

#define EDLB_INSTANTIATE_OPS(T)                                                                              \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                               \
    template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                               \
    template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                               \
    template BasicTensor<T> div(const BasicTensor<T>&, const BasicTensor<T>&);                               \
    template BasicTensor<T> maximum(const BasicTensor<T>&, const BasicTensor<T>&);                           \
    template BasicTensor<T> neg(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> exp(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> log(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> abs(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> sqrt(const BasicTensor<T>&);                                                     \
    template BasicTensor<T> square(const BasicTensor<T>&);                                                   \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                     \
    template BasicTensor<T> gelu(const BasicTensor<T>&);                                                     \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                  \
    template BasicTensor<T> tanh(const BasicTensor<T>&);                                                     \
    template BasicTensor<T> clamp_min(const BasicTensor<T>&, T);                                             \
    template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                                            \
    template BasicTensor<T> mul_scalar(const BasicTensor<T>&, T);                                            \
    template BasicTensor<T> sum(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> sum(const BasicTensor<T>&, int, bool);                                           \
    template BasicTensor<T> mean(const BasicTensor<T>&);                                                     \
    template BasicTensor<T> mean(const BasicTensor<T>&, int, bool);                                          \
    template BasicTensor<T> max(const BasicTensor<T>&);                                                      \
    template BasicTensor<T> max(const BasicTensor<T>&, int, bool);                                           \
    template BasicTensor<T> min(const BasicTensor<T>&, int, bool);                                           \
    template BasicTensor<T> softmax(const BasicTensor<T>&);                                                  \
    template BasicTensor<T> layernorm(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, T); \
    template BasicTensor<T> transpose(const BasicTensor<T>&, int, int);                                      \
    template BasicTensor<T> permute(const BasicTensor<T>&, const std::vector<int>&);                         \
    template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                           \
    template BasicTensor<T> concat(const TensorList<T>&, int);                                               \
    template BasicTensor<T> slice(const BasicTensor<T>&, int, std::int64_t, std::int64_t);                   \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                            \
    template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);     \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,      \
                                   Conv2dOptions);                                                           \
    template BasicTensor<T> avg_pool2d(const BasicTensor<T>&, int, int, int);                                \
    template BasicTensor<T> reflection_pad2d(const BasicTensor<T>&, int);                                    \
    template BasicTensor<T> bilinear_upsample(const BasicTensor<T>&, std::int64_t, std::int64_t);

EDLB_INSTANTIATE_OPS(float)
EDLB_INSTANTIATE_OPS(double)

}  // namespace edlb
