#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "edlb/ops.hpp"

namespace edlb {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

/// Pinhole intrinsics in pixels. Pixel (u, v) addresses the centre of
/// column u, row v; u = 0 is the centre of the first column.
struct Intrinsics {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;

    void validate() const;
    Mat3 matrix() const;
    Mat3 inverse() const;
    // Intrinsics for the same camera resampled to a different resolution.
    Intrinsics rescaled(double sx, double sy) const;
};

/// Rodrigues: R = I + sin(t) [k]x + (1 - cos(t)) [k]x^2 with t = |aa|.
Mat3 axis_angle_to_rotation(const Vec3& aa);
Vec3 rotation_to_axis_angle(const Mat3& R);

/// Rigid transform x' = R x + t.
struct PoseSE3 {
    Mat3 R{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 t{0, 0, 0};

    static PoseSE3 identity() { return {}; }
    static PoseSE3 from_axis_angle(const Vec3& aa, const Vec3& t);
    Vec3 apply(const Vec3& p) const;
    PoseSE3 inverse() const;
    // (this * other)(x) = this(other(x)).
    PoseSE3 compose(const PoseSE3& other) const;
    // Unit quaternion (qx, qy, qz, qw) with qw >= 0.
    std::array<double, 4> quaternion() const;
    static PoseSE3 from_quaternion(const std::array<double, 4>& q, const Vec3& t);
};

Mat3 matmul3(const Mat3& a, const Mat3& b);
Vec3 matvec3(const Mat3& a, const Vec3& v);
Mat3 transpose3(const Mat3& a);
double det3(const Mat3& a);

/// Differentiable Rodrigues over a batch: aa [N, 3] -> R [N, 3, 3]. Uses a
/// Taylor branch for small angles so the map and its derivative stay finite at 0.
template <typename T>
BasicTensor<T> rotation_from_axis_angle(const BasicTensor<T>& aa);

/// Splits a pose vector [N, 6] = (axis-angle, translation) into R [N,3,3] and t [N,3].
template <typename T>
struct PoseTensors {
    BasicTensor<T> R;
    BasicTensor<T> t;
};

template <typename T>
PoseTensors<T> pose_from_vector(const BasicTensor<T>& vec);

template <typename T>
PoseTensors<T> pose_tensors(const std::vector<PoseSE3>& poses);

template <typename T>
struct Reprojection {
    BasicTensor<T> coords;        // [N, H, W, 2] source pixel (u, v)
    std::vector<std::uint8_t> valid;  // [N * H * W], 0 where the point lands behind the source camera
};

/// For every target pixel: back-project with depth through K^-1, move by
/// [R | t], project with K and dehomogenise. depth is [N, 1, H, W] and must be
/// strictly positive; R is [N, 3, 3], t is [N, 3].
template <typename T>
Reprojection<T> reproject(const BasicTensor<T>& depth, const Intrinsics& K, const BasicTensor<T>& R,
                          const BasicTensor<T>& t);

/// Single-image convenience: depth [H, W].
template <typename T>
Reprojection<T> reproject(const BasicTensor<T>& depth, const Intrinsics& K, const PoseSE3& pose);

/// Bilinear sampling of src [N, C, H, W] at coords [N, Ho, Wo, 2]; samples
/// outside the image read as zero. Differentiable in both arguments.
template <typename T>
BasicTensor<T> bilinear_sample(const BasicTensor<T>& src, const BasicTensor<T>& coords);

template <typename T>
struct Warped {
    BasicTensor<T> image;  // [N, C, Ho, Wo]
    BasicTensor<T> mask;   // [N, 1, Ho, Wo], 1 where all bilinear taps are inside the source and valid
};

/// Synthesises I_{s->t}. A pixel is masked out when its sample position is
/// outside [0, W-1] x [0, H-1] or its validity flag is cleared.
template <typename T>
Warped<T> warp(const BasicTensor<T>& src, const BasicTensor<T>& coords, const std::vector<std::uint8_t>& validity);

}  // namespace edlb
