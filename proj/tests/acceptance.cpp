// Acceptance run: one PASS/FAIL line per criterion.
//
//   edlb_acceptance [--work DIR] [--only N[,N...]]
//
// Criteria 5-7 train real models and take most of the runtime.

#include <Eigen/Geometry>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "edlb/adapters.hpp"
#include "edlb/checkpoint.hpp"
#include "edlb/errors.hpp"
#include "edlb/eval.hpp"
#include "edlb/formats.hpp"
#include "edlb/geometry.hpp"
#include "edlb/grad_check.hpp"
#include "edlb/losses.hpp"
#include "edlb/optim.hpp"
#include "edlb/synthdata.hpp"
#include "edlb/train.hpp"

using namespace edlb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. gradient suite

Tensor64 random64(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0, double gap = 0.0) {
    std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
    for (auto& x : v) {
        do {
            x = rng.uniform(lo, hi);
        } while (std::abs(x) < gap);
    }
    return Tensor64::from(shape, std::move(v));
}

// Scalarises a tensor function with fixed random weights.
std::function<Tensor64(const Tensor64&)> projected(std::function<Tensor64(const Tensor64&)> f) {
    return [f = std::move(f)](const Tensor64& x) {
        Tensor64 y = f(x);
        Rng rng(99);
        return sum(mul(y, Tensor64::uniform(y.shape(), rng, 0.5, 1.5)));
    };
}

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    Rng rng(5);
    const auto x = random64({2, 3, 4}, rng, -1.5, 1.5, 0.05);
    const auto y = random64({2, 3, 4}, rng, 0.5, 2.0);
    const auto row = random64({4}, rng, 0.5, 1.5);
    const auto pos = random64({2, 3, 4}, rng, 0.2, 2.0);
    const auto w5 = random64({5, 4}, rng);
    const auto b5 = random64({5}, rng);
    const auto m34 = random64({3, 4}, rng), m42 = random64({4, 2}, rng);
    const auto img = random64({1, 3, 5, 5}, rng);
    const auto dw = random64({3, 1, 3, 3}, rng), dense = random64({4, 3, 3, 3}, rng), cb = random64({3}, rng);
    const Conv2dOptions depthwise{.stride = 1, .padding = 1, .groups = 3};
    const Conv2dOptions strided{.stride = 2, .padding = 1, .groups = 1};

    using F = std::function<Tensor64(const Tensor64&)>;
    struct Case {
        std::string name;
        F f;
        Tensor64 at;
        double tol;
    };
    std::vector<Case> cases = {
        {"add", [&](const Tensor64& v) { return add(v, y); }, x, 1e-5},
        {"add_broadcast", [&](const Tensor64& v) { return add(x, v); }, row, 1e-5},
        {"sub", [&](const Tensor64& v) { return sub(y, v); }, x, 1e-5},
        {"mul", [&](const Tensor64& v) { return mul(v, y); }, x, 1e-5},
        {"mul_broadcast", [&](const Tensor64& v) { return mul(x, v); }, row, 1e-5},
        {"div_num", [&](const Tensor64& v) { return div(v, y); }, x, 1e-5},
        {"div_den", [&](const Tensor64& v) { return div(x, v); }, y, 1e-5},
        {"maximum", [&](const Tensor64& v) { return maximum(v, mul_scalar(y, 0.1)); }, x, 1e-5},
        {"neg", [&](const Tensor64& v) { return neg(v); }, x, 1e-5},
        {"exp", [&](const Tensor64& v) { return exp(v); }, x, 1e-5},
        {"log", [&](const Tensor64& v) { return log(v); }, pos, 1e-5},
        {"abs", [&](const Tensor64& v) { return abs(v); }, x, 1e-5},
        {"sqrt", [&](const Tensor64& v) { return sqrt(v); }, pos, 1e-5},
        {"square", [&](const Tensor64& v) { return square(v); }, x, 1e-5},
        {"relu", [&](const Tensor64& v) { return relu(v); }, x, 1e-5},
        {"gelu", [&](const Tensor64& v) { return gelu(v); }, x, 1e-5},
        {"sigmoid", [&](const Tensor64& v) { return sigmoid(v); }, x, 1e-5},
        {"tanh", [&](const Tensor64& v) { return tanh(v); }, x, 1e-5},
        {"clamp_min", [&](const Tensor64& v) { return clamp_min(v, 0.0); }, x, 1e-5},
        {"add_scalar", [&](const Tensor64& v) { return add_scalar(v, 0.3); }, x, 1e-5},
        {"mul_scalar", [&](const Tensor64& v) { return mul_scalar(v, -1.7); }, x, 1e-5},
        {"softmax", [&](const Tensor64& v) { return softmax(v); }, x, 1e-5},
        {"layernorm", [&](const Tensor64& v) { return layernorm(v, row, row); }, x, 1e-5},
        {"layernorm_gamma", [&](const Tensor64& v) { return layernorm(x, v, row); }, row, 1e-5},
        {"layernorm_beta", [&](const Tensor64& v) { return layernorm(x, row, v); }, row, 1e-5},
        {"sum", [&](const Tensor64& v) { return mul(sum(v), sum(v)); }, x, 1e-5},
        {"sum_axis", [&](const Tensor64& v) { return sum(v, 1); }, x, 1e-5},
        {"mean", [&](const Tensor64& v) { return mul(mean(v), mean(v)); }, x, 1e-5},
        {"mean_axis", [&](const Tensor64& v) { return mean(v, -1, true); }, x, 1e-5},
        {"max", [&](const Tensor64& v) { return max(v); }, x, 1e-5},
        {"max_axis", [&](const Tensor64& v) { return max(v, 1); }, x, 1e-5},
        {"min_axis", [&](const Tensor64& v) { return min(v, 0); }, x, 1e-5},
        {"transpose", [&](const Tensor64& v) { return transpose(v, 0, 2); }, x, 1e-5},
        {"permute", [&](const Tensor64& v) { return permute(v, {2, 0, 1}); }, x, 1e-5},
        {"reshape", [&](const Tensor64& v) { return reshape(v, {6, -1}); }, x, 1e-5},
        {"concat", [&](const Tensor64& v) { return concat<double>({v, y, v}, 1); }, x, 1e-5},
        {"slice", [&](const Tensor64& v) { return slice(v, 2, 1, 3); }, x, 1e-5},
        {"matmul_a", [&](const Tensor64& v) { return matmul(v, m42); }, m34, 1e-5},
        {"matmul_b", [&](const Tensor64& v) { return matmul(m34, v); }, m42, 1e-5},
        {"linear_x", [&](const Tensor64& v) { return linear(v, w5, b5); }, x, 1e-5},
        {"linear_w", [&](const Tensor64& v) { return linear(x, v, b5); }, w5, 1e-5},
        {"linear_b", [&](const Tensor64& v) { return linear(x, w5, v); }, b5, 1e-5},
        {"conv2d_depthwise_x", [&](const Tensor64& v) { return conv2d(v, dw, cb, depthwise); }, img, 1e-5},
        {"conv2d_depthwise_w", [&](const Tensor64& v) { return conv2d(img, v, cb, depthwise); }, dw, 1e-5},
        {"conv2d_bias", [&](const Tensor64& v) { return conv2d(img, dw, v, depthwise); }, cb, 1e-5},
        {"conv2d_strided_x", [&](const Tensor64& v) { return conv2d(v, dense, Tensor64(), strided); }, img, 1e-5},
        {"conv2d_strided_w", [&](const Tensor64& v) { return conv2d(img, v, Tensor64(), strided); }, dense, 1e-5},
        {"avg_pool2d", [&](const Tensor64& v) { return avg_pool2d(reshape(v, {1, 2, 3, 4}), 3, 1, 1); }, x, 1e-5},
        {"reflection_pad2d", [&](const Tensor64& v) { return reflection_pad2d(reshape(v, {1, 2, 3, 4}), 1); }, x, 1e-5},
        {"bilinear_upsample", [&](const Tensor64& v) { return bilinear_upsample(reshape(v, {1, 2, 3, 4}), 7, 9); }, x, 1e-5},
    };

    // Warp with respect to depth and pose; sample positions sit a quarter pixel off the integer grid.
    const Intrinsics K{20, 20, 4, 3};
    const int H = 6, W = 8;
    const auto src = random64({1, 3, H, W}, rng, 0, 1);
    std::vector<double> d(H * W);
    for (auto& v : d) v = K.fx * 0.5 / (1.25 + 0.4 * rng.uniform());
    const auto depth = Tensor64::from({1, 1, H, W}, d);
    const auto lateral = pose_tensors<double>({PoseSE3{{1, 0, 0, 0, 1, 0, 0, 0, 1}, {-0.5, 0, 0}}});
    cases.push_back({"warp_depth",
                     [&](const Tensor64& dep) {
                         auto r = reproject(dep, K, lateral.R, lateral.t);
                         return warp(src, r.coords, r.valid).image;
                     },
                     depth, 1e-3});
    cases.push_back({"warp_pose",
                     [&](const Tensor64& p) {
                         auto pt = pose_from_vector(p);
                         auto r = reproject(depth, K, pt.R, pt.t);
                         return bilinear_sample(src, r.coords);
                     },
                     Tensor64::from({1, 6}, {0.01, -0.02, 0.015, -0.3, 0.05, 0.02}), 1e-3});
    std::vector<double> c;
    for (int i = 0; i < 4 * 5; ++i) c.insert(c.end(), {rng.below(5) + 0.25 + 0.5 * rng.uniform(), rng.below(4) + 0.25 + 0.5 * rng.uniform()});
    const auto coords = Tensor64::from({1, 4, 5, 2}, c);
    const auto small = random64({1, 2, 5, 6}, rng);
    cases.push_back({"bilinear_sample_src", [&](const Tensor64& s) { return bilinear_sample(s, coords); }, small, 1e-5});
    cases.push_back({"bilinear_sample_coords", [&](const Tensor64& q) { return bilinear_sample(small, q); }, coords, 1e-3});

    // Edge-aware smoothness.
    const auto sm_img = random64({2, 3, 5, 6}, rng, 0, 1);
    const auto sm_disp = random64({2, 1, 5, 6}, rng, 0.2, 1.0);
    cases.push_back({"smoothness_disp", [&](const Tensor64& v) { return smoothness(v, sm_img); }, sm_disp, 1e-5});

    // RVLoRA forward in x, A and B.
    Rng lrng(8);
    AdaptedLinear<double> layer(6, 5, true, lrng);
    auto ad = init_rvlora<double>(6, 5, 2, 9);
    for (auto& v : ad.B.mutable_data()) v = lrng.uniform(-1, 1);
    layer.attach(ad);
    const auto lx = random64({3, 5}, lrng);
    cases.push_back({"rvlora_x", [&](const Tensor64& v) { return layer(v); }, lx, 1e-5});
    cases.push_back({"rvlora_A",
                     [&](const Tensor64& v) {
                         auto copy = layer;
                         copy.adapter()->A = v;
                         return copy(lx);
                     },
                     ad.A, 1e-5});
    cases.push_back({"rvlora_B",
                     [&](const Tensor64& v) {
                         auto copy = layer;
                         copy.adapter()->B = v;
                         return copy(lx);
                     },
                     ad.B, 1e-5});

    int failed = 0;
    double worst = 0.0;
    std::string worst_name, failures;
    for (const auto& cs : cases) {
        GradCheckOptions opt;
        opt.eps = 1e-4;
        opt.tol = cs.tol;
        const auto r = grad_check(projected(cs.f), cs.at, opt);
        if (!r.passed) {
            ++failed;
            failures += " " + cs.name + "(" + fmt("%.2e", r.max_rel_error) + ")";
        }
        if (cs.tol < 1e-4 && r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_name = cs.name;
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = failed == 0 && secs < 120.0;
    o.detail = std::to_string(cases.size()) + " checks, " + std::to_string(failed) + " failed" + failures +
               ", worst rel err " + fmt("%.2e", worst) + " (" + worst_name + "), " + fmt("%.1f", secs) + "s";
    return o;
}

// ---------------------------------------------------------------------------
// 2. RVLoRA algebra

Outcome rvlora_algebra() {
    std::vector<std::string> notes;
    bool ok = true;

    // (a) zero-init identity
    {
        Rng rng(1);
        AdaptedLinear<float> layer(7, 5, true, rng);
        auto x = Tensor::uniform({3, 5}, rng, -1, 1);
        auto base = layer(x);
        layer.attach(init_rvlora<float>(7, 5, 2, 1));
        auto adapted = layer(x);
        const bool same = std::equal(base.data().begin(), base.data().end(), adapted.data().begin());
        ok &= same;
        notes.push_back(std::string("(a) ") + (same ? "exact" : "differs"));
    }
    // (b) unit vectors reduce to LoRA
    {
        Rng rng(4);
        AdaptedLinear<float> rv(9, 6, true, rng);
        AdaptedLinear<float> lo(rv.weight().detach(), rv.bias().detach());
        auto rva = init_rvlora<float>(9, 6, 3, 5);
        for (auto& v : rva.a.mutable_data()) v = 1.0f;
        for (auto& v : rva.b.mutable_data()) v = 1.0f;
        for (auto& v : rva.B.mutable_data()) v = static_cast<float>(rng.uniform(-1, 1));
        auto loa = init_lora<float>(9, 6, 3, 5);
        loa.A = rva.A.detach();
        loa.B = rva.B.detach();
        rv.attach(rva);
        lo.attach(loa);
        auto x = Tensor::uniform({4, 6}, rng, -2, 2);
        auto y1 = rv(x), y2 = lo(x);
        const bool same = std::equal(y1.data().begin(), y1.data().end(), y2.data().begin());
        ok &= same;
        notes.push_back(std::string("(b) ") + (same ? "exact" : "differs"));
    }
    // (c) dense oracle: (W0 + diag(b) B diag(a) A) x + bias with Eigen matrices
    {
        Rng rng(6);
        AdaptedLinear<double> layer(6, 5, true, rng);
        auto ad = init_rvlora<double>(6, 5, 2, 7);
        for (auto& v : ad.B.mutable_data()) v = rng.uniform(-1, 1);
        layer.attach(ad);
        using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const Eigen::Map<const Mat> W0(layer.weight().data().data(), 6, 5), A(ad.A.data().data(), 2, 5), B(ad.B.data().data(), 6, 2);
        const Eigen::Map<const Eigen::VectorXd> a(ad.a.data().data(), 2), b(ad.b.data().data(), 6), bias(layer.bias().data().data(), 6);
        const Mat Wd = W0 + b.asDiagonal() * B * a.asDiagonal() * A;
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            auto x = Tensor64::uniform({5}, rng, -1, 1);
            auto out = layer(x);
            const Eigen::VectorXd ref = Wd * Eigen::Map<const Eigen::VectorXd>(x.data().data(), 5) + bias;
            for (int i = 0; i < 6; ++i) worst = std::max(worst, std::abs(out.data()[i] - ref[i]));
        }
        ok &= worst < 1e-6;
        notes.push_back("(c) " + fmt("%.1e", worst));
    }
    // (d) frozen vectors after 100 optimiser steps
    {
        Rng rng(13);
        AdaptedLinear<float> layer(8, 6, true, rng);
        layer.attach(init_rvlora<float>(8, 6, 2, 21));
        ParamList<float> params;
        layer.collect(params, "l");
        const auto& ad = *layer.adapter();
        const std::vector<float> a0(ad.a.data().begin(), ad.a.data().end()), b0(ad.b.data().begin(), ad.b.data().end());
        const std::vector<float> B0(ad.B.data().begin(), ad.B.data().end());
        Adam<float> opt(params, {.lr = 1e-2});
        auto x = Tensor::uniform({16, 6}, rng, -1, 1);
        auto target = Tensor::uniform({16, 8}, rng, -1, 1);
        for (int step = 0; step < 100; ++step) {
            opt.zero_grad();
            mean(square(sub(layer(x), target))).backward();
            opt.step();
        }
        const bool frozen = std::equal(a0.begin(), a0.end(), ad.a.data().begin()) && std::equal(b0.begin(), b0.end(), ad.b.data().begin());
        const bool moved = !std::equal(B0.begin(), B0.end(), ad.B.data().begin());
        ok &= frozen && moved;
        notes.push_back(std::string("(d) ") + (frozen ? "a,b unchanged" : "a,b changed") + (moved ? "" : ", B did not train"));
    }
    // (e) merge equivalence
    {
        Rng rng(10);
        AdaptedLinear<float> layer(12, 10, true, rng);
        layer.attach(init_rvlora<float>(12, 10, 4, 3));
        for (auto& v : layer.adapter()->B.mutable_data()) v = static_cast<float>(rng.uniform(-1, 1));
        auto merged = layer.merged();
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            auto x = Tensor::uniform({10}, rng, -1, 1);
            auto p = layer(x), q = merged(x);
            double num = 0, den = 0;
            for (int i = 0; i < 12; ++i) {
                num = std::max(num, std::abs(double(p.data()[i]) - q.data()[i]));
                den = std::max(den, std::abs(double(p.data()[i])));
            }
            worst = std::max(worst, num / den);
        }
        ok &= worst < 1e-5;
        notes.push_back("(e) " + fmt("%.1e", worst));
    }
    std::string d;
    for (const auto& n : notes) d += (d.empty() ? "" : ", ") + n;
    return {ok, d};
}

// ---------------------------------------------------------------------------
// 3. geometry oracle

Eigen::Vector2d project_oracle(double u, double v, double depth, const Intrinsics& K, const Eigen::Vector3d& aa,
                               const Eigen::Vector3d& t) {
    Eigen::Matrix3d Km;
    Km << K.fx, 0, K.cx, 0, K.fy, K.cy, 0, 0, 1;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    if (aa.norm() > 0) R = Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
    const Eigen::Vector3d p = Km * (R * (depth * (Km.inverse() * Eigen::Vector3d(u, v, 1.0))) + t);
    return {p.x() / p.z(), p.y() / p.z()};
}

double bilinear_oracle(const std::vector<double>& img, int H, int W, double u, double v) {
    const int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
    const double au = u - x0, av = v - y0;
    auto at = [&](int x, int y) { return (x < 0 || y < 0 || x >= W || y >= H) ? 0.0 : img[y * W + x]; };
    return (1 - au) * (1 - av) * at(x0, y0) + au * (1 - av) * at(x0 + 1, y0) + (1 - au) * av * at(x0, y0 + 1) +
           au * av * at(x0 + 1, y0 + 1);
}

Outcome geometry_oracle() {
    const auto t0 = Clock::now();
    Rng rng(8);
    double worst_proj = 0.0, worst_warp = 0.0;
    const int samples = 1000, H = 3, W = 4;
    for (int i = 0; i < samples; ++i) {
        const Intrinsics K{rng.uniform(30, 90), rng.uniform(30, 90), rng.uniform(0, 4), rng.uniform(0, 3)};
        std::vector<double> d(H * W), pv(6);
        for (auto& x : d) x = rng.uniform(1, 20);
        for (int j = 0; j < 3; ++j) pv[j] = rng.uniform(-0.3, 0.3);
        for (int j = 3; j < 6; ++j) pv[j] = rng.uniform(-0.5, 0.5);
        const auto pose = pose_from_vector(Tensor64::from({1, 6}, pv));
        const auto r = reproject(Tensor64::from({1, 1, H, W}, d), K, pose.R, pose.t);
        const Eigen::Vector3d aa(pv[0], pv[1], pv[2]), t(pv[3], pv[4], pv[5]);
        // The source image is larger than the target grid so most samples land inside.
        const int Hs = 24, Ws = 32;
        auto src = Tensor64::uniform({1, 1, Hs, Ws}, rng, 0, 1);
        const std::vector<double> img(src.data().begin(), src.data().end());
        const auto w = warp(src, r.coords, r.valid);
        for (int v = 0; v < H; ++v)
            for (int u = 0; u < W; ++u) {
                const auto ref = project_oracle(u, v, d[v * W + u], K, aa, t);
                const std::size_t k = (v * W + u) * 2;
                worst_proj = std::max({worst_proj, std::abs(r.coords.data()[k] - ref.x()), std::abs(r.coords.data()[k + 1] - ref.y())});
                const bool inside = ref.x() >= 0 && ref.x() <= Ws - 1 && ref.y() >= 0 && ref.y() <= Hs - 1;
                const double expect = inside ? bilinear_oracle(img, Hs, Ws, ref.x(), ref.y()) : 0.0;
                if (inside == (w.mask.data()[v * W + u] == 1.0)) worst_warp = std::max(worst_warp, std::abs(w.image.data()[v * W + u] - expect));
                else if (std::min({std::abs(ref.x()), std::abs(ref.x() - (Ws - 1)), std::abs(ref.y()), std::abs(ref.y() - (Hs - 1))}) > 1e-9)
                    worst_warp = std::max(worst_warp, 1.0);  // mask disagrees away from the border
            }
    }

    // Identity pose and constant lateral translation.
    double worst_identity = 0.0, worst_shift = 0.0;
    {
        const Intrinsics K{50, 55, 9.5, 7.5};
        auto depth = Tensor64::uniform({6, 9}, rng, 0.5, 40);
        auto r = reproject(depth, K, PoseSE3::identity());
        for (std::int64_t v = 0; v < 6; ++v)
            for (std::int64_t u = 0; u < 9; ++u)
                worst_identity = std::max({worst_identity, std::abs(r.coords.data()[(v * 9 + u) * 2] - u),
                                           std::abs(r.coords.data()[(v * 9 + u) * 2 + 1] - v)});
        const Intrinsics K2{64, 60, 40, 32};
        const double D = 8.0, tx = 0.5;
        auto s = reproject(Tensor64::full({5, 7}, D), K2, PoseSE3{{1, 0, 0, 0, 1, 0, 0, 0, 1}, {tx, 0, 0}});
        for (std::int64_t v = 0; v < 5; ++v)
            for (std::int64_t u = 0; u < 7; ++u)
                worst_shift = std::max({worst_shift, std::abs(s.coords.data()[(v * 7 + u) * 2] - (u + K2.fx * tx / D)),
                                        std::abs(s.coords.data()[(v * 7 + u) * 2 + 1] - v)});
    }
    // Identity grid warp and the integer shift.
    bool warp_exact = true;
    {
        auto src = Tensor64::uniform({1, 2, 4, 5}, rng, 0, 1);
        std::vector<double> ident, shift;
        for (int v = 0; v < 4; ++v)
            for (int u = 0; u < 5; ++u) {
                ident.insert(ident.end(), {double(u), double(v)});
                shift.insert(shift.end(), {double(u + 1), double(v)});
            }
        auto w0 = warp(src, Tensor64::from({1, 4, 5, 2}, ident), {});
        warp_exact &= std::equal(src.data().begin(), src.data().end(), w0.image.data().begin());
        for (double m : w0.mask.data()) warp_exact &= m == 1.0;
        auto w1 = warp(src, Tensor64::from({1, 4, 5, 2}, shift), {});
        for (int c = 0; c < 2; ++c)
            for (int v = 0; v < 4; ++v)
                for (int u = 0; u < 5; ++u) {
                    const double got = w1.image.data()[(c * 4 + v) * 5 + u];
                    if (u == 4) warp_exact &= w1.mask.data()[v * 5 + u] == 0.0 && got == 0.0;
                    else warp_exact &= got == src.data()[(c * 4 + v) * 5 + u + 1];
                }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    // The closed forms pass through K^-1 and K in floating point, so they are held to 1e-9 pixels.
    o.pass = worst_proj < 1e-5 && worst_warp < 1e-5 && worst_identity < 1e-9 && worst_shift < 1e-9 && warp_exact && secs < 60.0;
    o.detail = std::to_string(samples) + " samples: reproject " + fmt("%.1e", worst_proj) + ", warp " + fmt("%.1e", worst_warp) +
               "; identity " + fmt("%.1e", worst_identity) + ", lateral shift " + fmt("%.1e", worst_shift) +
               ", grid warps " + (warp_exact ? "exact" : "inexact") + ", " + fmt("%.1f", secs) + "s";
    return o;
}

// ---------------------------------------------------------------------------
// 4. metric suite

Outcome metric_suite() {
    const auto t0 = Clock::now();
    std::vector<std::string> failures;
    auto expect = [&](bool cond, const std::string& what) {
        if (!cond) failures.push_back(what);
    };
    const std::vector<std::uint8_t> two_valid{1, 1};

    // Two pixels, pred (1, 2) against gt (2, 2), by hand:
    // abs_rel = (1/2 + 0)/2, sq_rel = (1/2 + 0)/2, rmse = sqrt(1/2), rmse_log = sqrt(ln(2)^2 / 2), delta = 1/2.
    const auto m = depth_metrics(std::vector<double>{1, 2}, std::vector<double>{2, 2}, two_valid);
    expect(std::abs(m.abs_rel - 0.25) < 1e-15, "abs_rel");
    expect(std::abs(m.sq_rel - 0.25) < 1e-15, "sq_rel");
    expect(std::abs(m.rmse - std::sqrt(0.5)) < 1e-15, "rmse");
    expect(std::abs(m.rmse_log - std::sqrt(std::log(2.0) * std::log(2.0) / 2)) < 1e-15, "rmse_log");
    expect(m.delta == 0.5, "delta");
    // pred (3, 4) against gt (2, 5): abs_rel = (1/2 + 1/5)/2, sq_rel = (1/2 + 1/5)/2, rmse = 1.
    const auto m2 = depth_metrics(std::vector<double>{3, 4}, std::vector<double>{2, 5}, two_valid);
    expect(std::abs(m2.abs_rel - 0.35) < 1e-15, "abs_rel 2");
    expect(std::abs(m2.sq_rel - 0.35) < 1e-15, "sq_rel 2");
    expect(std::abs(m2.rmse - 1.0) < 1e-15, "rmse 2");
    expect(m2.delta == 0.0, "delta 2");  // 3/2 = 1.5 fails, 5/4 = 1.25 is not strictly below

    // Strict delta boundary on exactly representable ratios.
    const auto edge = depth_metrics(std::vector<double>{5, 10, 0.625, 2.5}, std::vector<double>{4, 8, 0.5, 2}, std::vector<std::uint8_t>(4, 1));
    expect(edge.delta == 0.0, "delta boundary");

    // Median scaling on proportional predictions is exact.
    const DepthEvalConfig cfg;
    const std::vector<double> gt{3, 9, 12, 20, 40};
    for (double k : {2.0, 0.5, 0.125}) {
        std::vector<double> pred;
        for (double v : gt) pred.push_back(k * v);
        const auto e = evaluate_depth(pred, gt, cfg);
        expect(e.abs_rel == 0.0 && e.rmse == 0.0 && e.delta == 1.0, "median scaling x" + fmt("%g", k));
    }

    // Cap: ground truth beyond 150 is excluded and scaled predictions are clamped to 150.
    {
        const std::vector<double> g{10, 20, 200}, p{10, 20, 30};
        const auto s = median_scale(p, g, cfg);
        expect(s.valid[2] == 0 && s.valid[0] == 1, "cap validity");
        const std::vector<double> g2{100, 120, 140}, p2{100, 120, 400};
        const auto s2 = median_scale(p2, g2, cfg);
        expect(s2.depth[2] == 150.0, "cap clamp");
    }

    // ATE is invariant to a similarity transform of the prediction.
    {
        Rng rng(3);
        std::vector<Vec3> g, p;
        const Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
        for (int i = 0; i < 20; ++i) {
            const Eigen::Vector3d x(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
            const Eigen::Vector3d y = 3.5 * (R * x) + Eigen::Vector3d(1, -4, 2);
            g.push_back({x.x(), x.y(), x.z()});
            p.push_back({y.x(), y.y(), y.z()});
        }
        expect(ate(p, g) < 1e-9, "ate invariance");
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = failures.empty() && secs < 30.0;
    std::string f;
    for (const auto& s : failures) f += " " + s;
    o.detail = failures.empty() ? "all oracles hold, " + fmt("%.2f", secs) + "s" : "failed:" + f;
    return o;
}

// ---------------------------------------------------------------------------
// 5-7. desk-scale training

struct Toy {
    std::uint64_t seed = 7;
    int train_sequences = 8;
    int test_sequences = 2;
    int frames = 10;
    int pretrain_epochs = 15;
    int finetune_epochs = 15;
    int decay_epoch = 10;
    double lr = 1e-3;
    int batch = 8;
};

struct Phase5 {
    TrainSummary pre, fine;
    double zero_shot = 0, finetuned = 0;
    double seconds = 0;
};

SceneSpec scene(const Toy& toy, const std::string& preset) {
    auto s = SceneSpec::preset(preset);
    s.train_sequences = toy.train_sequences;
    s.val_sequences = 0;
    s.test_sequences = toy.test_sequences;
    s.frames_per_sequence = toy.frames;
    return s;
}

RunConfig run_config(const Toy& toy, const fs::path& data, const fs::path& out, int epochs) {
    RunConfig c;
    c.seed = toy.seed;
    c.adam.lr = toy.lr;
    c.decay_epoch = toy.decay_epoch;
    c.epochs = epochs;
    c.batch_size = toy.batch;
    c.train_data = data.string();
    c.eval_data = data.string();
    c.output_dir = out.string();
    return c;
}

double abs_rel(const Models& models, const Dataset& data) { return evaluate_depth_model(models, data, {}).mean().abs_rel; }

void ensure_data(const Toy& toy, const fs::path& work) {
    for (const char* p : {"A", "B"}) {
        const auto dir = work / "data" / p;
        if (!fs::exists(dir / "manifest.jsonl")) write_dataset(scene(toy, p), dir);
    }
}

Phase5 run_phase5(const Toy& toy, const fs::path& work, const fs::path& run_dir, const Progress& progress) {
    const auto t0 = Clock::now();
    Phase5 r;
    const auto data_a = work / "data" / "A", data_b = work / "data" / "B";
    r.pre = pretrain(run_config(toy, data_a, run_dir / "pretrain", toy.pretrain_epochs), progress);

    const Dataset held_out = load_dataset(data_b, "test");
    r.zero_shot = abs_rel(load_models(r.pre.final_checkpoint, toy.seed), held_out);

    auto fc = run_config(toy, data_b, run_dir / "finetune", toy.finetune_epochs);
    fc.base_checkpoint = r.pre.final_checkpoint.string();
    r.fine = finetune(fc, progress);
    r.finetuned = abs_rel(load_models(r.fine.final_checkpoint, toy.seed), held_out);
    r.seconds = seconds_since(t0);
    return r;
}

double drop(const TrainSummary& s) { return (s.epoch_mean.front() - s.epoch_mean.back()) / s.epoch_mean.front(); }

Outcome desk_training(const Phase5& r) {
    const double fraction = double(r.fine.depth_count.trainable) / double(r.fine.depth_count.total);
    const double improvement = (r.zero_shot - r.finetuned) / r.zero_shot;
    Outcome o;
    o.pass = drop(r.pre) >= 0.30 && drop(r.fine) >= 0.30 && improvement >= 0.25 && fraction < 0.15 && r.seconds < 1800.0;
    o.detail = "loss drop pretrain " + fmt("%.1f%%", 100 * drop(r.pre)) + ", finetune " + fmt("%.1f%%", 100 * drop(r.fine)) +
               "; Abs Rel on held-out B zero-shot " + fmt("%.4f", r.zero_shot) + " -> finetuned " + fmt("%.4f", r.finetuned) +
               " (" + fmt("%.1f%%", 100 * improvement) + " better); trainable " + std::to_string(r.fine.depth_count.trainable) +
               "/" + std::to_string(r.fine.depth_count.total) + " = " + fmt("%.2f%%", 100 * fraction) + "; " + fmt("%.0f", r.seconds) + "s";
    return o;
}

Outcome ablation(const Toy& toy, const fs::path& work, const Phase5& both, const Progress& progress) {
    const auto data_b = work / "data" / "B";
    const Dataset held_out = load_dataset(data_b, "test");
    struct Row {
        std::string name;
        std::int64_t trainable;
        DepthMetrics m;
    };
    std::vector<Row> rows;
    auto metrics = [&](const fs::path& ckpt) { return evaluate_depth_model(load_models(ckpt, toy.seed), held_out, {}).mean(); };
    rows.push_back({"no-adapter", 0, metrics(both.pre.final_checkpoint)});
    const struct {
        const char* name;
        AdapterKind adapter;
        int res_dsc;
    } variants[] = {{"RVLoRA-only", AdapterKind::RVLoRA, 0}, {"Res-DSC-only", AdapterKind::None, 4}};
    for (const auto& v : variants) {
        auto c = run_config(toy, data_b, work / "ablation" / v.name, toy.finetune_epochs);
        c.base_checkpoint = both.pre.final_checkpoint.string();
        c.model.adapter = v.adapter;
        c.model.res_dsc_count = v.res_dsc;
        const auto s = finetune(c, progress);
        rows.push_back({v.name, s.depth_count.trainable, metrics(s.final_checkpoint)});
    }
    rows.push_back({"both", both.fine.depth_count.trainable, metrics(both.fine.final_checkpoint)});

    std::ostringstream table;
    table << "variant\ttrainable\tabs_rel\tsq_rel\trmse\trmse_log\tdelta\n";
    for (const auto& r : rows) {
        table << r.name << '\t' << r.trainable << '\t' << fmt("%.4f", r.m.abs_rel) << '\t' << fmt("%.4f", r.m.sq_rel) << '\t'
              << fmt("%.4f", r.m.rmse) << '\t' << fmt("%.4f", r.m.rmse_log) << '\t' << fmt("%.4f", r.m.delta) << '\n';
    }
    write_file(work / "ablation.tsv", table.str());
    std::fputs(table.str().c_str(), stdout);
    Outcome o;
    o.pass = rows.size() == 4 && rows[3].m.abs_rel <= rows[0].m.abs_rel;
    o.detail = "4 rows written to ablation.tsv; both " + fmt("%.4f", rows[3].m.abs_rel) + " vs no-adapter " + fmt("%.4f", rows[0].m.abs_rel);
    return o;
}

Outcome reproducibility(const Phase5& a, const Phase5& b) {
    std::vector<std::string> differing;
    auto same = [&](const fs::path& x, const fs::path& y, const std::string& what) {
        if (read_file(x) != read_file(y)) differing.push_back(what);
    };
    same(a.pre.final_checkpoint, b.pre.final_checkpoint, "pretrain checkpoint");
    same(a.pre.log_path, b.pre.log_path, "pretrain log");
    same(a.fine.final_checkpoint, b.fine.final_checkpoint, "finetune checkpoint");
    same(a.fine.log_path, b.fine.log_path, "finetune log");
    Outcome o;
    o.pass = differing.empty();
    if (o.pass) {
        o.detail = "final checkpoints and logs identical (finetune checkpoint " + content_hash(read_file(a.fine.final_checkpoint)) + ")";
    } else {
        for (const auto& d : differing) o.detail += (o.detail.empty() ? "differs: " : ", ") + d;
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path work = fs::current_path() / "acceptance_work";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--work" && i + 1 < argc) {
            work = argv[++i];
        } else if (a == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string tok;
            while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
        } else {
            std::fprintf(stderr, "usage: %s [--work DIR] [--only N[,N...]]\n", argv[0]);
            return 2;
        }
    }
    auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

    int failed = 0;
    auto report = [&](int n, const char* name, const Outcome& o) {
        std::printf("criterion %d %s: %s | %s\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    };
    auto guarded = [&](int n, const char* name, const std::function<Outcome()>& f) {
        if (!wanted(n)) return;
        try {
            report(n, name, f());
        } catch (const std::exception& e) {
            report(n, name, {false, std::string("error: ") + e.what()});
        }
    };

    guarded(1, "gradient suite", gradient_suite);
    guarded(2, "RVLoRA algebra", rvlora_algebra);
    guarded(3, "geometry oracle", geometry_oracle);
    guarded(4, "metric suite", metric_suite);

    if (wanted(5) || wanted(6) || wanted(7)) {
        const Toy toy;
        const Progress progress = [](const std::string& line) { std::fprintf(stderr, "  %s\n", line.c_str()); };
        std::optional<Phase5> first;
        try {
            fs::remove_all(work / "run1");
            fs::remove_all(work / "run2");
            fs::remove_all(work / "ablation");
            ensure_data(toy, work);
            first = run_phase5(toy, work, work / "run1", progress);
        } catch (const std::exception& e) {
            for (int n : {5, 6, 7})
                if (wanted(n)) report(n, n == 5 ? "desk-scale training" : n == 6 ? "ablation" : "reproducibility", {false, std::string("error: ") + e.what()});
        }
        if (first) {
            guarded(5, "desk-scale training", [&] { return desk_training(*first); });
            guarded(6, "ablation", [&] { return ablation(toy, work, *first, progress); });
            guarded(7, "reproducibility", [&] { return reproducibility(*first, run_phase5(toy, work, work / "run2", progress)); });
        }
    }
    return failed == 0 ? 0 : 1;
}
