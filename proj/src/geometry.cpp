#include "edlb/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "edlb/errors.hpp"

namespace edlb {

void Intrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(cx) || !std::isfinite(cy)) {
        throw ConfigError("intrinsics need fx, fy > 0 and a finite principal point");
    }
}

Mat3 Intrinsics::matrix() const { return {fx, 0, cx, 0, fy, cy, 0, 0, 1}; }

Mat3 Intrinsics::inverse() const { return {1.0 / fx, 0, -cx / fx, 0, 1.0 / fy, -cy / fy, 0, 0, 1}; }

Intrinsics Intrinsics::rescaled(double sx, double sy) const {
    // Pixel centres map as u' = (u + 0.5) * s - 0.5.
    return {fx * sx, fy * sy, (cx + 0.5) * sx - 0.5, (cy + 0.5) * sy - 0.5};
}

Mat3 matmul3(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) c[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
    return c;
}

Vec3 matvec3(const Mat3& a, const Vec3& v) {
    return {a[0] * v[0] + a[1] * v[1] + a[2] * v[2], a[3] * v[0] + a[4] * v[1] + a[5] * v[2],
            a[6] * v[0] + a[7] * v[1] + a[8] * v[2]};
}

Mat3 transpose3(const Mat3& a) { return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]}; }

double det3(const Mat3& a) {
    return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6]);
}

Mat3 axis_angle_to_rotation(const Vec3& aa) {
    const double theta = std::sqrt(aa[0] * aa[0] + aa[1] * aa[1] + aa[2] * aa[2]);
    if (theta < 1e-12) return {1, 0, 0, 0, 1, 0, 0, 0, 1};
    const double kx = aa[0] / theta, ky = aa[1] / theta, kz = aa[2] / theta;
    const Mat3 K{0, -kz, ky, kz, 0, -kx, -ky, kx, 0};
    const Mat3 K2 = matmul3(K, K);
    const double s = std::sin(theta), c = 1.0 - std::cos(theta);
    Mat3 R{1, 0, 0, 0, 1, 0, 0, 0, 1};
    for (int i = 0; i < 9; ++i) R[i] += s * K[i] + c * K2[i];
    return R;
}

Vec3 rotation_to_axis_angle(const Mat3& R) {
    const double cos_t = std::clamp((R[0] + R[4] + R[8] - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_t);
    if (theta < 1e-9) return {0.5 * (R[7] - R[5]), 0.5 * (R[2] - R[6]), 0.5 * (R[3] - R[1])};
    if (M_PI - theta < 1e-6) {
        // Axis from the symmetric part: R = 2 k k^T - I.
        Vec3 k{std::sqrt(std::max(0.0, (R[0] + 1) * 0.5)), std::sqrt(std::max(0.0, (R[4] + 1) * 0.5)),
               std::sqrt(std::max(0.0, (R[8] + 1) * 0.5))};
        if (R[1] < 0) k[1] = -k[1];
        if (R[2] < 0) k[2] = -k[2];
        return {k[0] * theta, k[1] * theta, k[2] * theta};
    }
    const double f = theta / (2.0 * std::sin(theta));
    return {f * (R[7] - R[5]), f * (R[2] - R[6]), f * (R[3] - R[1])};
}

PoseSE3 PoseSE3::from_axis_angle(const Vec3& aa, const Vec3& t) { return {axis_angle_to_rotation(aa), t}; }

Vec3 PoseSE3::apply(const Vec3& p) const {
    Vec3 q = matvec3(R, p);
    for (int i = 0; i < 3; ++i) q[i] += t[i];
    return q;
}

PoseSE3 PoseSE3::inverse() const {
    PoseSE3 inv;
    inv.R = transpose3(R);
    const Vec3 rt = matvec3(inv.R, t);
    inv.t = {-rt[0], -rt[1], -rt[2]};
    return inv;
}

PoseSE3 PoseSE3::compose(const PoseSE3& other) const {
    PoseSE3 out;
    out.R = matmul3(R, other.R);
    out.t = apply(other.t);
    return out;
}

std::array<double, 4> PoseSE3::quaternion() const {
    const double tr = R[0] + R[4] + R[8];
    double qx, qy, qz, qw;
    if (tr > 0) {
        const double s = std::sqrt(tr + 1.0) * 2.0;
        qw = 0.25 * s;
        qx = (R[7] - R[5]) / s;
        qy = (R[2] - R[6]) / s;
        qz = (R[3] - R[1]) / s;
    } else if (R[0] > R[4] && R[0] > R[8]) {
        const double s = std::sqrt(1.0 + R[0] - R[4] - R[8]) * 2.0;
        qw = (R[7] - R[5]) / s;
        qx = 0.25 * s;
        qy = (R[1] + R[3]) / s;
        qz = (R[2] + R[6]) / s;
    } else if (R[4] > R[8]) {
        const double s = std::sqrt(1.0 + R[4] - R[0] - R[8]) * 2.0;
        qw = (R[2] - R[6]) / s;
        qx = (R[1] + R[3]) / s;
        qy = 0.25 * s;
        qz = (R[5] + R[7]) / s;
    } else {
        const double s = std::sqrt(1.0 + R[8] - R[0] - R[4]) * 2.0;
        qw = (R[3] - R[1]) / s;
        qx = (R[2] + R[6]) / s;
        qy = (R[5] + R[7]) / s;
        qz = 0.25 * s;
    }
    const double n = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
    const double sign = qw < 0 ? -1.0 : 1.0;
    return {sign * qx / n, sign * qy / n, sign * qz / n, sign * qw / n};
}

PoseSE3 PoseSE3::from_quaternion(const std::array<double, 4>& q, const Vec3& t) {
    const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    const double x = q[0] / n, y = q[1] / n, z = q[2] / n, w = q[3] / n;
    PoseSE3 p;
    p.R = {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
           2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
           2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
    p.t = t;
    return p;
}

// ---------------------------------------------------------------------------

namespace {

// (A, B) = (sin t / t, (1 - cos t) / t^2) as functions of s = t^2.
template <typename T>
BasicTensor<T> rodrigues_coefficients(const BasicTensor<T>& theta_sq) {
    const std::int64_t n = theta_sq.numel();
    std::vector<T> out(static_cast<std::size_t>(2 * n));
    std::vector<T> deriv(static_cast<std::size_t>(2 * n));
    for (std::int64_t i = 0; i < n; ++i) {
        const double s = static_cast<double>(theta_sq.data()[i]);
        double a, b, da, db;
        if (s < 1e-4) {
            a = 1.0 - s / 6.0 + s * s / 120.0 - s * s * s / 5040.0;
            b = 0.5 - s / 24.0 + s * s / 720.0 - s * s * s / 40320.0;
            da = -1.0 / 6.0 + s / 60.0 - s * s / 1680.0;
            db = -1.0 / 24.0 + s / 360.0 - s * s / 13440.0;
        } else {
            const double t = std::sqrt(s);
            const double sn = std::sin(t), cs = std::cos(t);
            a = sn / t;
            b = (1.0 - cs) / s;
            da = (t * cs - sn) / (2.0 * s * t);
            db = (t * sn - 2.0 * (1.0 - cs)) / (2.0 * s * s);
        }
        out[2 * i] = static_cast<T>(a);
        out[2 * i + 1] = static_cast<T>(b);
        deriv[2 * i] = static_cast<T>(da);
        deriv[2 * i + 1] = static_cast<T>(db);
    }
    return make_op<T>("rodrigues_coefficients", {n, 2}, std::move(out), {theta_sq},
                      [deriv = std::move(deriv), n](TensorNode<T>& self) {
                          T* g = self.inputs[0]->grad_buffer();
                          for (std::int64_t i = 0; i < n; ++i)
                              g[i] += self.grad[2 * i] * deriv[2 * i] + self.grad[2 * i + 1] * deriv[2 * i + 1];
                      });
}

template <typename T>
BasicTensor<T> skew_basis() {
    // aa [N,3] x G [3,9] = row-major [k]x.
    std::vector<T> g(27, T(0));
    auto set = [&](int comp, int entry, T v) { g[comp * 9 + entry] = v; };
    set(2, 1, T(-1));  // -z at (0,1)
    set(1, 2, T(1));   // y at (0,2)
    set(2, 3, T(1));   // z at (1,0)
    set(0, 5, T(-1));  // -x at (1,2)
    set(1, 6, T(-1));  // -y at (2,0)
    set(0, 7, T(1));   // x at (2,1)
    return BasicTensor<T>::from({3, 9}, std::move(g));
}

}  // namespace

template <typename T>
BasicTensor<T> rotation_from_axis_angle(const BasicTensor<T>& aa) {
    if (aa.ndim() != 2 || aa.dim(1) != 3) throw DimensionError("rotation_from_axis_angle: expected [N, 3], got " + shape_str(aa.shape()));
    const std::int64_t n = aa.dim(0);
    auto S = reshape(matmul(aa, skew_basis<T>()), {n, 3, 3});
    auto S2 = matmul(S, S);
    auto coef = rodrigues_coefficients(sum(square(aa), 1));
    auto A = reshape(slice(coef, 1, 0, 1), {n, 1, 1});
    auto B = reshape(slice(coef, 1, 1, 2), {n, 1, 1});
    auto eye = BasicTensor<T>::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    return add(add(mul(A, S), mul(B, S2)), eye);
}

template <typename T>
PoseTensors<T> pose_from_vector(const BasicTensor<T>& vec) {
    if (vec.ndim() != 2 || vec.dim(1) != 6) throw DimensionError("pose vector must be [N, 6], got " + shape_str(vec.shape()));
    return {rotation_from_axis_angle(slice(vec, 1, 0, 3)), slice(vec, 1, 3, 6)};
}

template <typename T>
PoseTensors<T> pose_tensors(const std::vector<PoseSE3>& poses) {
    const auto n = static_cast<std::int64_t>(poses.size());
    std::vector<T> r, t;
    for (const auto& p : poses) {
        for (double v : p.R) r.push_back(static_cast<T>(v));
        for (double v : p.t) t.push_back(static_cast<T>(v));
    }
    return {BasicTensor<T>::from({n, 3, 3}, std::move(r)), BasicTensor<T>::from({n, 3}, std::move(t))};
}

template <typename T>
Reprojection<T> reproject(const BasicTensor<T>& depth, const Intrinsics& K, const BasicTensor<T>& R,
                          const BasicTensor<T>& t) {
    K.validate();
    if (depth.ndim() != 4 || depth.dim(1) != 1) throw DimensionError("reproject: depth must be [N, 1, H, W], got " + shape_str(depth.shape()));
    const std::int64_t N = depth.dim(0), H = depth.dim(2), W = depth.dim(3), P = H * W;
    if (R.shape() != Shape{N, 3, 3} || t.shape() != Shape{N, 3}) {
        throw DimensionError("reproject: pose " + shape_str(R.shape()) + " / " + shape_str(t.shape()) +
                             " does not match depth batch " + std::to_string(N));
    }
    for (T d : depth.data()) {
        if (!(d > T(0))) throw ContractError("reproject: depth must be strictly positive");
    }
    const Mat3 Kinv = K.inverse();
    std::vector<T> rays(static_cast<std::size_t>(3 * P));
    for (std::int64_t v = 0; v < H; ++v) {
        for (std::int64_t u = 0; u < W; ++u) {
            const Vec3 r = matvec3(Kinv, {static_cast<double>(u), static_cast<double>(v), 1.0});
            for (int c = 0; c < 3; ++c) rays[c * P + v * W + u] = static_cast<T>(r[c]);
        }
    }
    auto ray_t = BasicTensor<T>::from({1, 3, P}, std::move(rays));
    auto points = mul(ray_t, reshape(depth, {N, 1, P}));
    auto cam = add(matmul(R, points), reshape(t, {N, 3, 1}));
    auto X = slice(cam, 1, 0, 1);
    auto Y = slice(cam, 1, 1, 2);
    auto Z = slice(cam, 1, 2, 3);
    constexpr double kMinZ = 1e-3;
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(N * P));
    for (std::int64_t i = 0; i < N * P; ++i) valid[i] = Z.data()[i] > T(kMinZ) ? 1 : 0;
    auto Zs = clamp_min(Z, T(kMinZ));
    auto u = add_scalar(mul_scalar(div(X, Zs), T(K.fx)), T(K.cx));
    auto v = add_scalar(mul_scalar(div(Y, Zs), T(K.fy)), T(K.cy));
    auto uv = permute(concat<T>({u, v}, 1), {0, 2, 1});
    return {reshape(uv, {N, H, W, 2}), std::move(valid)};
}

template <typename T>
Reprojection<T> reproject(const BasicTensor<T>& depth, const Intrinsics& K, const PoseSE3& pose) {
    if (depth.ndim() != 2) throw DimensionError("reproject: depth must be [H, W], got " + shape_str(depth.shape()));
    auto pt = pose_tensors<T>({pose});
    return reproject(reshape(depth, {1, 1, depth.dim(0), depth.dim(1)}), K, pt.R, pt.t);
}

template <typename T>
BasicTensor<T> bilinear_sample(const BasicTensor<T>& src, const BasicTensor<T>& coords) {
    if (src.ndim() != 4) throw DimensionError("bilinear_sample: source must be [N, C, H, W], got " + shape_str(src.shape()));
    const std::int64_t N = src.dim(0), C = src.dim(1), H = src.dim(2), W = src.dim(3);
    if (coords.ndim() != 4 || coords.dim(0) != N || coords.dim(3) != 2) {
        throw DimensionError("bilinear_sample: coords " + shape_str(coords.shape()) + " do not match source " +
                             shape_str(src.shape()));
    }
    const std::int64_t Ho = coords.dim(1), Wo = coords.dim(2), P = Ho * Wo;
    std::vector<T> out(static_cast<std::size_t>(N * C * P), T(0));
    const T* ps = src.data().data();
    const T* pc = coords.data().data();

    // Visits the four taps of output pixel p: f(src_index_in_plane, weight, dweight/du, dweight/dv).
    auto taps = [H, W](T u, T v, auto&& f) {
        if (!std::isfinite(u) || !std::isfinite(v)) return;
        const T fu = std::floor(u), fv = std::floor(v);
        const T au = u - fu, av = v - fv;
        const auto x0 = static_cast<std::int64_t>(fu), y0 = static_cast<std::int64_t>(fv);
        for (int dy = 0; dy < 2; ++dy) {
            const std::int64_t y = y0 + dy;
            if (y < 0 || y >= H) continue;
            const T wy = dy ? av : T(1) - av;
            const T dwy = dy ? T(1) : T(-1);
            for (int dx = 0; dx < 2; ++dx) {
                const std::int64_t x = x0 + dx;
                if (x < 0 || x >= W) continue;
                const T wx = dx ? au : T(1) - au;
                const T dwx = dx ? T(1) : T(-1);
                f(y * W + x, wx * wy, dwx * wy, wx * dwy);
            }
        }
    };
    for (std::int64_t b = 0; b < N; ++b) {
        for (std::int64_t p = 0; p < P; ++p) {
            const T u = pc[(b * P + p) * 2], v = pc[(b * P + p) * 2 + 1];
            taps(u, v, [&](std::int64_t idx, T w, T, T) {
                for (std::int64_t c = 0; c < C; ++c) out[(b * C + c) * P + p] += w * ps[(b * C + c) * H * W + idx];
            });
        }
    }
    return make_op<T>("bilinear_sample", {N, C, Ho, Wo}, std::move(out), {src, coords},
                      [=](TensorNode<T>& self) {
                          TensorNode<T>& ns = *self.inputs[0];
                          TensorNode<T>& nc = *self.inputs[1];
                          T* gs = ns.requires_grad ? ns.grad_buffer() : nullptr;
                          T* gc = nc.requires_grad ? nc.grad_buffer() : nullptr;
                          const T* g = self.grad.data();
                          for (std::int64_t b = 0; b < N; ++b) {
                              for (std::int64_t p = 0; p < P; ++p) {
                                  const T u = nc.data[(b * P + p) * 2], v = nc.data[(b * P + p) * 2 + 1];
                                  taps(u, v, [&](std::int64_t idx, T w, T dwu, T dwv) {
                                      T su = T(0), sv = T(0);
                                      for (std::int64_t c = 0; c < C; ++c) {
                                          const T go = g[(b * C + c) * P + p];
                                          if (gs) gs[(b * C + c) * H * W + idx] += go * w;
                                          const T val = ns.data[(b * C + c) * H * W + idx];
                                          su += go * val * dwu;
                                          sv += go * val * dwv;
                                      }
                                      if (gc) {
                                          gc[(b * P + p) * 2] += su;
                                          gc[(b * P + p) * 2 + 1] += sv;
                                      }
                                  });
                              }
                          }
                      });
}

template <typename T>
Warped<T> warp(const BasicTensor<T>& src, const BasicTensor<T>& coords, const std::vector<std::uint8_t>& validity) {
    auto image = bilinear_sample(src, coords);
    const std::int64_t N = src.dim(0), H = src.dim(2), W = src.dim(3);
    const std::int64_t P = coords.dim(1) * coords.dim(2);
    if (!validity.empty() && static_cast<std::int64_t>(validity.size()) != N * P) {
        throw DimensionError("warp: validity mask has " + std::to_string(validity.size()) + " entries, expected " +
                             std::to_string(N * P));
    }
    std::vector<T> mask(static_cast<std::size_t>(N * P));
    const T* pc = coords.data().data();
    for (std::int64_t i = 0; i < N * P; ++i) {
        const T u = pc[2 * i], v = pc[2 * i + 1];
        const bool inside = u >= T(0) && u <= T(W - 1) && v >= T(0) && v <= T(H - 1);
        mask[i] = (inside && (validity.empty() || validity[i])) ? T(1) : T(0);
    }
    // Masked pixels read as zero so they can only ever be convex combinations
    // of in-bounds samples or exactly 0.
    auto mask_t = BasicTensor<T>::from({N, 1, coords.dim(1), coords.dim(2)}, std::move(mask));
    return {mul(image, mask_t), mask_t};
}

#define EDLB_INSTANTIATE_GEOMETRY(T)                                                                         \
    template BasicTensor<T> rotation_from_axis_angle(const BasicTensor<T>&);                                 \
    template PoseTensors<T> pose_from_vector(const BasicTensor<T>&);                                         \
    template PoseTensors<T> pose_tensors(const std::vector<PoseSE3>&);                                       \
    template Reprojection<T> reproject(const BasicTensor<T>&, const Intrinsics&, const BasicTensor<T>&,     \
                                       const BasicTensor<T>&);                                               \
    template Reprojection<T> reproject(const BasicTensor<T>&, const Intrinsics&, const PoseSE3&);           \
    template BasicTensor<T> bilinear_sample(const BasicTensor<T>&, const BasicTensor<T>&);                   \
    template Warped<T> warp(const BasicTensor<T>&, const BasicTensor<T>&, const std::vector<std::uint8_t>&);

EDLB_INSTANTIATE_GEOMETRY(float)
EDLB_INSTANTIATE_GEOMETRY(double)

}  // namespace edlb
