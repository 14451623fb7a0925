#pragma once

#include <vector>

#include "edlb/tensor.hpp"

// Differentiable primitives. Every function here records a backward rule
// through make_op. Shapes follow NumPy conventions; binary elementwise ops
// broadcast from the trailing dimension. Image tensors are N x C x H x W.
namespace edlb {

template <typename T> using TensorList = std::vector<BasicTensor<T>>;

// Elementwise, broadcasting.
template <typename T> BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T> BasicTensor<T> maximum(const BasicTensor<T>& a, const BasicTensor<T>& b);

// Elementwise, unary.
template <typename T> BasicTensor<T> neg(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> exp(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> log(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> abs(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> sqrt(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> square(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> relu(const BasicTensor<T>& x);
// Exact (erf) form.
template <typename T> BasicTensor<T> gelu(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> sigmoid(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> tanh(const BasicTensor<T>& x);
// Gradient passes only where x > lo.
template <typename T> BasicTensor<T> clamp_min(const BasicTensor<T>& x, T lo);
template <typename T> BasicTensor<T> add_scalar(const BasicTensor<T>& x, T s);
template <typename T> BasicTensor<T> mul_scalar(const BasicTensor<T>& x, T s);

// Reductions. `axis` may be negative.
template <typename T> BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> sum(const BasicTensor<T>& x, int axis, bool keepdim = false);
template <typename T> BasicTensor<T> mean(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> mean(const BasicTensor<T>& x, int axis, bool keepdim = false);
// Gradient goes to the first maximal element.
template <typename T> BasicTensor<T> max(const BasicTensor<T>& x);
template <typename T> BasicTensor<T> max(const BasicTensor<T>& x, int axis, bool keepdim = false);
template <typename T> BasicTensor<T> min(const BasicTensor<T>& x, int axis, bool keepdim = false);

// Along the last axis.
template <typename T> BasicTensor<T> softmax(const BasicTensor<T>& x);
// Normalises the last axis; gamma/beta are optional [D] affine parameters.
template <typename T>
BasicTensor<T> layernorm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                         const BasicTensor<T>& beta, T eps = T(1e-5));

// Layout.
template <typename T> BasicTensor<T> transpose(const BasicTensor<T>& x, int d0, int d1);
template <typename T> BasicTensor<T> permute(const BasicTensor<T>& x, const std::vector<int>& perm);
// One dimension may be -1.
template <typename T> BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);
template <typename T> BasicTensor<T> concat(const TensorList<T>& xs, int axis);
template <typename T>
BasicTensor<T> slice(const BasicTensor<T>& x, int axis, std::int64_t start, std::int64_t end);

// a: [..., m, k]. b: [k, n] (shared) or [..., k, n] with identical batch dims.
template <typename T> BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
// x: [..., n], weight: [m, n], bias: optional [m]. Returns x * weight^T + bias.
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

struct Conv2dOptions {
    int stride = 1;
    int padding = 0;
    int groups = 1;
};

// Cross-correlation with zero padding, computed by im2col + matmul.
// input [N, C, H, W], kernel [O, C/groups, kh, kw], bias optional [O].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, Conv2dOptions opt = {});

// Zero padding, padded cells counted in the divisor.
template <typename T>
BasicTensor<T> avg_pool2d(const BasicTensor<T>& x, int kernel, int stride, int padding = 0);
template <typename T> BasicTensor<T> reflection_pad2d(const BasicTensor<T>& x, int pad);
// Half-pixel (align_corners = false) bilinear resize.
template <typename T>
BasicTensor<T> bilinear_upsample(const BasicTensor<T>& x, std::int64_t out_h, std::int64_t out_w);

// Operator sugar.
template <typename T> BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) { return add(a, b); }
template <typename T> BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) { return sub(a, b); }
template <typename T> BasicTensor<T> operator*(const BasicTensor<T>& a, const BasicTensor<T>& b) { return mul(a, b); }
template <typename T> BasicTensor<T> operator/(const BasicTensor<T>& a, const BasicTensor<T>& b) { return div(a, b); }
template <typename T> BasicTensor<T> operator-(const BasicTensor<T>& a) { return neg(a); }
template <typename T> BasicTensor<T> operator+(const BasicTensor<T>& a, T s) { return add_scalar(a, s); }
template <typename T> BasicTensor<T> operator+(T s, const BasicTensor<T>& a) { return add_scalar(a, s); }
template <typename T> BasicTensor<T> operator-(const BasicTensor<T>& a, T s) { return add_scalar(a, -s); }
template <typename T> BasicTensor<T> operator-(T s, const BasicTensor<T>& a) { return add_scalar(neg(a), s); }
template <typename T> BasicTensor<T> operator*(const BasicTensor<T>& a, T s) { return mul_scalar(a, s); }
template <typename T> BasicTensor<T> operator*(T s, const BasicTensor<T>& a) { return mul_scalar(a, s); }
template <typename T> BasicTensor<T> operator/(const BasicTensor<T>& a, T s) { return mul_scalar(a, T(1) / s); }

}  // namespace edlb
