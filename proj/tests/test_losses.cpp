#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "edlb/errors.hpp"
#include "edlb/geometry.hpp"
#include "edlb/losses.hpp"
#include "edlb/optim.hpp"
#include "test_util.hpp"

using namespace edlb;
using edlb::testing::check;
using edlb::testing::random64;

namespace {

// Brute-force photometric error: explicit 3x3 windows with mirrored borders.
double photometric_oracle(const Tensor64& pred, const Tensor64& target, const std::vector<double>& mask) {
    const auto N = pred.dim(0), C = pred.dim(1), H = pred.dim(2), W = pred.dim(3);
    auto at = [&](const Tensor64& t, std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
        if (y < 0) y = -y;
        if (y >= H) y = 2 * H - 2 - y;
        if (x < 0) x = -x;
        if (x >= W) x = 2 * W - 2 - x;
        return t.data()[((n * C + c) * H + y) * W + x];
    };
    const double C1 = 1e-4, C2 = 9e-4;
    double total = 0, count = 0;
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) {
                const double m = mask[(n * H + y) * W + x];
                if (m == 0) continue;
                double pe = 0;
                for (std::int64_t c = 0; c < C; ++c) {
                    double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const double a = at(pred, n, c, y + dy, x + dx), b = at(target, n, c, y + dy, x + dx);
                            mx += a / 9;
                            my += b / 9;
                            xx += a * a / 9;
                            yy += b * b / 9;
                            xy += a * b / 9;
                        }
                    const double s = ((2 * mx * my + C1) * (2 * (xy - mx * my) + C2)) /
                                     ((mx * mx + my * my + C1) * (xx - mx * mx + yy - my * my + C2));
                    const double l1 = std::abs(at(pred, n, c, y, x) - at(target, n, c, y, x));
                    pe += (0.85 * (1 - s) / 2 + 0.15 * l1) / C;
                }
                total += pe;
                count += 1;
            }
    return total / count;
}

Tensor64 ones_mask(std::int64_t N, std::int64_t H, std::int64_t W) { return Tensor64::full({N, 1, H, W}, 1.0); }

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("photometric basics") {
    Rng rng(1);
    auto img = Tensor64::uniform({2, 3, 6, 7}, rng, 0, 1);
    CHECK(std::abs(photometric(img, img, ones_mask(2, 6, 7)).item()) < 1e-12);

    // Constant images: the windows see zero variance, so SSIM reduces to the luminance term.
    const double mu1 = 0.5, mu2 = 0.4;
    auto pred = Tensor64::full({1, 3, 5, 5}, mu1);
    auto target = Tensor64::full({1, 3, 5, 5}, mu2);
    const double C1 = 1e-4, C2 = 9e-4;
    const double s = (2 * mu1 * mu2 + C1) * C2 / ((mu1 * mu1 + mu2 * mu2 + C1) * C2);
    const double expected = 0.85 * (1 - s) / 2 + 0.15 * 0.1;
    CHECK(std::abs(photometric(pred, target, ones_mask(1, 5, 5)).item() - expected) < 1e-9);
    CHECK(std::abs((1 - 0.85) * 0.1 - 0.015) < 1e-15);

    auto noisy = Tensor64::uniform({2, 3, 6, 7}, rng, 0, 1);
    std::vector<double> m(2 * 6 * 7, 1.0);
    for (int i = 0; i < 20; ++i) m[rng.below(m.size())] = 0.0;
    CHECK(std::abs(photometric(noisy, img, Tensor64::from({2, 1, 6, 7}, m)).item() - photometric_oracle(noisy, img, m)) <
          1e-12);
}

TEST_CASE("masked regions do not contribute") {
    Rng rng(2);
    const int H = 10, W = 12;
    auto target = Tensor64::uniform({1, 3, H, W}, rng, 0, 1);
    auto pred = Tensor64::uniform({1, 3, H, W}, rng, 0, 1);
    std::vector<double> m(H * W, 1.0);
    for (int y = 3; y < 9; ++y)
        for (int x = 4; x < 11; ++x) m[y * W + x] = 0.0;
    auto mask = Tensor64::from({1, 1, H, W}, m);
    const double before = photometric(pred, target, mask).item();
    // Pixels more than one window radius inside the hole.
    auto changed = Tensor64::from(pred.shape(), std::vector<double>(pred.data().begin(), pred.data().end()));
    for (int c = 0; c < 3; ++c)
        for (int y = 5; y < 7; ++y)
            for (int x = 6; x < 9; ++x) changed.mutable_data()[(c * H + y) * W + x] = 5.0;
    CHECK(photometric(changed, target, mask).item() == before);

    CHECK_THROWS_AS(photometric(pred, target, Tensor64::zeros({1, 1, H, W})), ContractError);
}

TEST_CASE("minimum reprojection") {
    Rng rng(3);
    auto target = Tensor64::uniform({1, 3, 6, 6}, rng, 0, 1);
    auto other = Tensor64::uniform({1, 3, 6, 6}, rng, 0, 1);
    auto m = ones_mask(1, 6, 6);
    CHECK(std::abs(photometric_multi<double>({other, target}, target, {m, m}, true).item()) < 1e-12);
    CHECK(std::abs(photometric_multi<double>({target, other}, target, {m, m}, true).item()) < 1e-12);
    const double avg = photometric_multi<double>({other, target}, target, {m, m}, false).item();
    CHECK(avg == doctest::Approx(0.5 * photometric(other, target, m).item()).epsilon(1e-12));

    // A source that is invalid everywhere defers to the other one.
    auto none = Tensor64::zeros({1, 1, 6, 6});
    CHECK(photometric_multi<double>({target, other}, target, {none, m}, true).item() ==
          doctest::Approx(photometric(other, target, m).item()).epsilon(1e-12));
    CHECK_THROWS_AS(photometric_multi<double>({target, other}, target, {none, none}, true), ContractError);
}

TEST_CASE("smoothness closed forms") {
    const int H = 5, W = 8;
    auto flat_img = Tensor64::full({1, 3, H, W}, 0.3);
    CHECK(smoothness(Tensor64::full({1, 1, H, W}, 0.7), flat_img).item() == 0.0);

    // disp = a + b u; after dividing by its mean the slope is b / mean.
    const double a = 0.2, b = 0.05;
    std::vector<double> d(H * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) d[y * W + x] = a + b * x;
    const double slope = b / (a + b * (W - 1) / 2.0);
    auto disp = Tensor64::from({1, 1, H, W}, d);
    CHECK(std::abs(smoothness(disp, flat_img).item() - slope) < 1e-12);

    const double g = 0.1;
    std::vector<double> im(3 * H * W);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) im[(c * H + y) * W + x] = g * x;
    CHECK(std::abs(smoothness(disp, Tensor64::from({1, 3, H, W}, im)).item() - slope * std::exp(-g)) < 1e-12);
}

TEST_CASE("smoothness gradient") {
    Rng rng(4);
    auto disp = random64({2, 1, 5, 6}, rng, 0.1, 1.0);
    auto img = random64({2, 3, 5, 6}, rng, 0.0, 1.0);
    auto rep = check([&](const Tensor64& d) { return smoothness(d, img); }, disp);
    CHECK(rep.passed);
    CHECK(rep.max_rel_error < 1e-5);
    CHECK(check([&](const Tensor64& i) { return smoothness(disp, i); }, img).passed);
}

TEST_CASE("photometric gradient") {
    Rng rng(5);
    auto pred = random64({1, 3, 5, 6}, rng, 0.0, 1.0);
    auto target = random64({1, 3, 5, 6}, rng, 0.0, 1.0);
    CHECK(check([&](const Tensor64& p) { return photometric(p, target, ones_mask(1, 5, 6)); }, pred).passed);
}

TEST_CASE("decomposition losses") {
    Rng rng(6);
    auto R = Tensor64::uniform({2, 3, 6, 8}, rng, 0.05, 0.95);
    auto S = Tensor64::uniform({2, 1, 6, 8}, rng, 0.2, 1.8);
    auto image = mul(R, S);
    CHECK(std::abs(loss_ds(image, R, S).item()) < 1e-12);
    CHECK(std::abs(loss_ds(image, image, Tensor64::full({2, 1, 6, 8}, 1.0)).item()) < 1e-12);
    auto other = Tensor64::uniform({2, 3, 6, 8}, rng, 0, 1);
    const double oracle = photometric_oracle(mul(R, S), other, std::vector<double>(2 * 6 * 8, 1.0));
    CHECK(std::abs(loss_ds(other, R, S).item() - oracle) < 1e-12);

    auto m = ones_mask(2, 6, 8);
    CHECK(loss_albedo(R, R, m).item() == 0.0);
    CHECK(loss_albedo(R, add_scalar(R, 0.125), m).item() == doctest::Approx(0.125).epsilon(1e-12));
    auto Rw = Tensor64::uniform({2, 3, 6, 8}, rng, 0, 1);
    std::vector<double> mv(2 * 6 * 8);
    for (auto& v : mv) v = rng.uniform() < 0.7 ? 1.0 : 0.0;
    double sum = 0, cnt = 0;
    for (int n = 0; n < 2; ++n)
        for (int p = 0; p < 48; ++p) {
            if (mv[n * 48 + p] == 0) continue;
            for (int c = 0; c < 3; ++c) sum += std::abs(R.data()[(n * 3 + c) * 48 + p] - Rw.data()[(n * 3 + c) * 48 + p]) / 3;
            cnt += 1;
        }
    CHECK(std::abs(loss_albedo(R, Rw, Tensor64::from({2, 1, 6, 8}, mv)).item() - sum / cnt) < 1e-12);
    CHECK_THROWS_AS(loss_albedo(R, Rw, Tensor64::zeros({2, 1, 6, 8})), ContractError);

    CHECK(std::abs(loss_ms(image, R, S, m).item()) < 1e-12);
}

TEST_CASE("decomposition network") {
    DecompositionNet net(7);
    Rng rng(8);
    auto img = Tensor::uniform({2, 3, 16, 20}, rng, 0, 1);
    auto out = net(img);
    CHECK(out.reflectance.shape() == Shape{2, 3, 16, 20});
    CHECK(out.shading.shape() == Shape{2, 1, 16, 20});
    for (float v : out.reflectance.data()) CHECK((v > 0.0f && v < 1.0f));
    for (float v : out.shading.data()) CHECK((v > 0.0f && v < 2.0f));
    auto again = net(img);
    CHECK(std::equal(out.shading.data().begin(), out.shading.data().end(), again.shading.data().begin()));

    // Starts at R = image, S = 1.
    for (std::size_t i = 0; i < out.reflectance.numel(); ++i) {
        CHECK(out.reflectance.data()[i] == doctest::Approx(std::clamp(img.data()[i], 1e-3f, 1.0f - 1e-3f)).epsilon(1e-4));
    }
    for (float v : out.shading.data()) CHECK(v == 1.0f);

    // The zeroed output convs pass no gradient inward until they have taken a step.
    ParamList<float> params;
    net.collect(params);
    Adam<float> opt(params, {.lr = 1e-2});
    auto shifted = Tensor::uniform({2, 3, 16, 20}, rng, 0, 1);
    loss_ds(shifted, out.reflectance, out.shading).backward();
    opt.step();
    opt.zero_grad();
    out = net(img);
    loss_ds(shifted, out.reflectance, out.shading).backward();
    for (const auto& p : params) {
        double g = 0;
        for (float v : p.tensor.grad()) g += std::abs(v);
        CHECK_MESSAGE(g > 0, p.name);
    }
}

TEST_CASE("shading adjustment") {
    Rng rng(9);
    ShadingAdjust head(10);
    auto S = Tensor::uniform({1, 1, 12, 16}, rng, 0.3, 1.5);
    auto adj = head(S);
    CHECK(std::equal(S.data().begin(), S.data().end(), adj.data().begin()));

    auto Rw = Tensor::uniform({1, 3, 12, 16}, rng, 0.1, 0.9);
    auto It = mul(Rw, S);
    auto m = Tensor::full({1, 1, 12, 16}, 1.0f);
    CHECK(loss_ms(It, Rw, head(S), m).item() == photometric(mul(Rw, S), It, m).item());

    // Target lit 30% brighter: training the head must reduce the loss.
    auto brighter = mul_scalar(It, 1.3f);
    ParamList<float> params;
    head.collect(params);
    Adam<float> opt(params, {.lr = 1e-2});
    const float first = loss_ms(brighter, Rw, head(S), m).item();
    for (int step = 0; step < 30; ++step) {
        opt.zero_grad();
        loss_ms(brighter, Rw, head(S), m).backward();
        opt.step();
    }
    CHECK(loss_ms(brighter, Rw, head(S), m).item() < 0.5f * first);
}

TEST_CASE("total loss weights") {
    const LossWeights w;
    auto z = Tensor64::scalar(0.0), one = Tensor64::scalar(1.0);
    CHECK(total_loss(z, z, z, z, w).item() == 0.0);
    CHECK(total_loss(one, one, one, one, w).item() == doctest::Approx(1.41).epsilon(1e-12));
    auto three = Tensor64::scalar(3.0);
    CHECK(total_loss(three, z, z, z, w).item() == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(total_loss(z, z, three, z, w).item() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(total_loss(z, z, z, three, w).item() == doctest::Approx(0.03).epsilon(1e-12));
}

TEST_CASE("total loss gradient with respect to depth") {
    Rng rng(11);
    const int H = 6, W = 8;
    const Intrinsics K{20, 20, 4, 3};
    auto It = random64({1, 3, H, W}, rng, 0.1, 0.9);
    auto Rt = random64({1, 3, H, W}, rng, 0.1, 0.9);
    auto Rs = random64({1, 3, H, W}, rng, 0.1, 0.9);
    auto Ss = random64({1, 1, H, W}, rng, 0.5, 1.5);
    std::vector<double> d(H * W);
    for (auto& x : d) x = K.fx * 0.5 / (1.25 + 0.4 * rng.uniform());
    auto pose = pose_tensors<double>({PoseSE3{{1, 0, 0, 0, 1, 0, 0, 0, 1}, {-0.5, 0, 0}}});
    const LossWeights w;
    auto f = [&](const Tensor64& depth) {
        auto r = reproject(depth, K, pose.R, pose.t);
        auto wr = warp(Rs, r.coords, r.valid);
        auto ws = warp(Ss, r.coords, r.valid);
        auto l_ds = Tensor64::scalar(0.1);
        auto l_a = loss_albedo(Rt, wr.image, wr.mask);
        auto l_ms = loss_ms(It, wr.image, ws.image, wr.mask);
        auto l_es = smoothness(div(Tensor64::scalar(1.0), depth), It);
        return total_loss(l_ds, l_a, l_ms, l_es, w);
    };
    GradCheckOptions opt;
    opt.tol = 1e-3;
    auto rep = grad_check(f, Tensor64::from({1, 1, H, W}, d), opt);
    CHECK(rep.passed);
}

}  // TEST_SUITE
