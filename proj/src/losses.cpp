#include "edlb/losses.hpp"

#include <algorithm>

#include "edlb/errors.hpp"

namespace edlb {

namespace {

template <typename T>
BasicTensor<T> pool3(const BasicTensor<T>& x) {
    return avg_pool2d(reflection_pad2d(x, 1), 3, 1, 0);
}

template <typename T>
void require_same(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                             " differ");
    }
}

// Mean over all axes but the batch -> [N, 1, 1, 1].
template <typename T>
BasicTensor<T> spatial_mean(const BasicTensor<T>& x) {
    const std::int64_t N = x.dim(0);
    return reshape(mean(reshape(x, {N, -1}), 1), {N, 1, 1, 1});
}

}  // namespace

template <typename T>
BasicTensor<T> ssim(const BasicTensor<T>& x, const BasicTensor<T>& y) {
    require_same(x, y, "ssim");
    const T C1 = T(0.01 * 0.01), C2 = T(0.03 * 0.03);
    auto mx = pool3(x), my = pool3(y);
    auto sx = sub(pool3(square(x)), square(mx));
    auto sy = sub(pool3(square(y)), square(my));
    auto sxy = sub(pool3(mul(x, y)), mul(mx, my));
    auto num = mul(add_scalar(mul_scalar(mul(mx, my), T(2)), C1), add_scalar(mul_scalar(sxy, T(2)), C2));
    auto den = mul(add_scalar(add(square(mx), square(my)), C1), add_scalar(add(sx, sy), C2));
    return div(num, den);
}

template <typename T>
BasicTensor<T> photometric_error(const BasicTensor<T>& pred, const BasicTensor<T>& target, double alpha) {
    require_same(pred, target, "photometric");
    auto l1 = mean(abs(sub(pred, target)), 1, true);
    auto dssim = mean(mul_scalar(sub(BasicTensor<T>::scalar(T(1)), ssim(pred, target)), T(0.5)), 1, true);
    return add(mul_scalar(dssim, T(alpha)), mul_scalar(l1, T(1.0 - alpha)));
}

template <typename T>
BasicTensor<T> masked_mean(const BasicTensor<T>& err, const BasicTensor<T>& mask) {
    require_same(err, mask, "masked_mean");
    double count = 0.0;
    for (T m : mask.data()) count += static_cast<double>(m);
    if (!(count > 0.0)) throw ContractError("loss mask selects no pixels");
    return mul_scalar(sum(mul(err, mask.detach())), static_cast<T>(1.0 / count));
}

template <typename T>
BasicTensor<T> photometric(const BasicTensor<T>& pred, const BasicTensor<T>& target, const BasicTensor<T>& mask,
                           double alpha) {
    return masked_mean(photometric_error(pred, target, alpha), mask);
}

template <typename T>
BasicTensor<T> photometric_multi(const std::vector<BasicTensor<T>>& preds, const BasicTensor<T>& target,
                                 const std::vector<BasicTensor<T>>& masks, bool take_min, double alpha) {
    if (preds.empty() || preds.size() != masks.size()) throw DimensionError("photometric: need one mask per source");
    if (!take_min) {
        BasicTensor<T> total;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            auto l = photometric(preds[i], target, masks[i], alpha);
            total = total.defined() ? add(total, l) : l;
        }
        return mul_scalar(total, T(1.0 / static_cast<double>(preds.size())));
    }
    // Invalid pixels are pushed far above any real error before the minimum.
    constexpr double kInvalid = 1e4;
    std::vector<BasicTensor<T>> errs;
    std::vector<T> any(static_cast<std::size_t>(masks[0].numel()), T(0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto m = masks[i].detach();
        auto penalty = mul_scalar(add_scalar(neg(m), T(1)), T(kInvalid));
        errs.push_back(add(photometric_error(preds[i], target, alpha), penalty));
        for (std::size_t k = 0; k < any.size(); ++k) any[k] = std::max(any[k], m.data()[k]);
    }
    auto best = errs.size() == 1 ? errs[0] : min(concat(errs, 1), 1, true);
    return masked_mean(best, BasicTensor<T>::from(masks[0].shape(), std::move(any)));
}

template <typename T>
BasicTensor<T> smoothness(const BasicTensor<T>& disp, const BasicTensor<T>& image) {
    if (disp.ndim() != 4 || disp.dim(1) != 1 || image.ndim() != 4 || image.dim(0) != disp.dim(0) ||
        image.dim(2) != disp.dim(2) || image.dim(3) != disp.dim(3)) {
        throw DimensionError("smoothness: disparity " + shape_str(disp.shape()) + " does not match image " +
                             shape_str(image.shape()));
    }
    const std::int64_t H = disp.dim(2), W = disp.dim(3);
    auto d = div(disp, spatial_mean(disp));
    auto dx = abs(sub(slice(d, 3, 1, W), slice(d, 3, 0, W - 1)));
    auto dy = abs(sub(slice(d, 2, 1, H), slice(d, 2, 0, H - 1)));
    auto ix = mean(abs(sub(slice(image, 3, 1, W), slice(image, 3, 0, W - 1))), 1, true);
    auto iy = mean(abs(sub(slice(image, 2, 1, H), slice(image, 2, 0, H - 1))), 1, true);
    return add(mean(mul(dx, exp(neg(ix)))), mean(mul(dy, exp(neg(iy)))));
}

template <typename T>
BasicTensor<T> loss_ds(const BasicTensor<T>& image, const BasicTensor<T>& reflectance, const BasicTensor<T>& shading) {
    auto recon = mul(reflectance, shading);
    auto full = BasicTensor<T>::full({image.dim(0), 1, image.dim(2), image.dim(3)}, T(1));
    return photometric(recon, image, full);
}

template <typename T>
BasicTensor<T> loss_albedo(const BasicTensor<T>& r_target, const BasicTensor<T>& r_warped, const BasicTensor<T>& mask) {
    require_same(r_target, r_warped, "albedo loss");
    return masked_mean(mean(abs(sub(r_target, r_warped)), 1, true), mask);
}

template <typename T>
BasicTensor<T> loss_ms(const BasicTensor<T>& target, const BasicTensor<T>& r_warped, const BasicTensor<T>& s_adjusted,
                       const BasicTensor<T>& mask) {
    return photometric(mul(r_warped, s_adjusted), target, mask);
}

template <typename T>
BasicTensor<T> total_loss(const BasicTensor<T>& l_ds, const BasicTensor<T>& l_a, const BasicTensor<T>& l_ms,
                          const BasicTensor<T>& l_es, const LossWeights& w) {
    return add(add(mul_scalar(l_ds, T(w.ds)), mul_scalar(l_a, T(w.a))),
               add(mul_scalar(l_ms, T(w.ms)), mul_scalar(l_es, T(w.es))));
}

#define EDLB_INSTANTIATE_LOSSES(T)                                                                                   \
    template BasicTensor<T> ssim(const BasicTensor<T>&, const BasicTensor<T>&);                                     \
    template BasicTensor<T> photometric_error(const BasicTensor<T>&, const BasicTensor<T>&, double);                \
    template BasicTensor<T> masked_mean(const BasicTensor<T>&, const BasicTensor<T>&);                              \
    template BasicTensor<T> photometric(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,        \
                                        double);                                                                     \
    template BasicTensor<T> photometric_multi(const std::vector<BasicTensor<T>>&, const BasicTensor<T>&,            \
                                              const std::vector<BasicTensor<T>>&, bool, double);                     \
    template BasicTensor<T> smoothness(const BasicTensor<T>&, const BasicTensor<T>&);                               \
    template BasicTensor<T> loss_ds(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);          \
    template BasicTensor<T> loss_albedo(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);      \
    template BasicTensor<T> loss_ms(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,           \
                                    const BasicTensor<T>&);                                                          \
    template BasicTensor<T> total_loss(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,        \
                                       const BasicTensor<T>&, const LossWeights&);

EDLB_INSTANTIATE_LOSSES(float)
EDLB_INSTANTIATE_LOSSES(double)

// ---------------------------------------------------------------------------

namespace {

Rng named_rng(std::uint64_t seed, const char* name) { return Rng::derive(seed, Rng::hash(name)); }

}  // namespace

DecompositionNet::DecompositionNet(std::uint64_t seed) {
    auto rng = named_rng(seed, "decomp");
    const Conv2dOptions same{1, 1, 1}, down{2, 1, 1};
    enc1 = Conv2d<float>(3, 8, 3, same, true, rng);
    enc2 = Conv2d<float>(8, 16, 3, down, true, rng);
    enc3 = Conv2d<float>(16, 32, 3, down, true, rng);
    dec2 = Conv2d<float>(48, 16, 3, same, true, rng);
    dec1 = Conv2d<float>(24, 8, 3, same, true, rng);
    out_r = Conv2d<float>(8, 3, 3, same, true, rng);
    out_s = Conv2d<float>(8, 1, 3, same, true, rng);
    out_r.zero();
    out_s.zero();
}

Decomposition DecompositionNet::operator()(const Tensor& image) const {
    if (image.ndim() != 4 || image.dim(1) != 3) throw DimensionError("decomposition expects [N, 3, H, W], got " + shape_str(image.shape()));
    auto e1 = gelu(enc1(image));
    auto e2 = gelu(enc2(e1));
    auto e3 = gelu(enc3(e2));
    auto d2 = gelu(dec2(concat<float>({bilinear_upsample(e3, e2.dim(2), e2.dim(3)), e2}, 1)));
    auto d1 = gelu(dec1(concat<float>({bilinear_upsample(d2, e1.dim(2), e1.dim(3)), e1}, 1)));
    // Reflectance is predicted as a correction to the image logit; with the zeroed
    // output convs the net starts at R = image, S = 1.
    std::vector<float> logit(image.data().begin(), image.data().end());
    for (auto& v : logit) {
        v = std::clamp(v, 1e-3f, 1.0f - 1e-3f);
        v = std::log(v / (1.0f - v));
    }
    const Tensor prior = Tensor::from(image.shape(), std::move(logit));
    return {sigmoid(add(prior, out_r(d1))), mul_scalar(sigmoid(out_s(d1)), 2.0f)};
}

void DecompositionNet::collect(ParamList<float>& out) const {
    enc1.collect(out, "decomp.enc1");
    enc2.collect(out, "decomp.enc2");
    enc3.collect(out, "decomp.enc3");
    dec2.collect(out, "decomp.dec2");
    dec1.collect(out, "decomp.dec1");
    out_r.collect(out, "decomp.out_r");
    out_s.collect(out, "decomp.out_s");
}

ShadingAdjust::ShadingAdjust(std::uint64_t seed) {
    auto rng = named_rng(seed, "adjust");
    conv1 = Conv2d<float>(1, 8, 3, {1, 1, 1}, true, rng);
    conv2 = Conv2d<float>(8, 1, 3, {1, 1, 1}, true, rng);
    conv2.zero();
}

Tensor ShadingAdjust::operator()(const Tensor& shading) const {
    return mul(shading, exp(conv2(gelu(conv1(shading)))));
}

void ShadingAdjust::collect(ParamList<float>& out) const {
    conv1.collect(out, "adjust.conv1");
    conv2.collect(out, "adjust.conv2");
}

}  // namespace edlb
