#pragma once

#include <string>
#include <vector>

#include "edlb/nn.hpp"

namespace edlb {

struct LossWeights {
    double ds = 0.2;
    double a = 0.2;
    double ms = 1.0;
    double es = 0.01;
};

constexpr double kSsimAlpha = 0.85;

/// Per-pixel SSIM over 3x3 mean windows with reflection padding; [N, C, H, W].
template <typename T>
BasicTensor<T> ssim(const BasicTensor<T>& x, const BasicTensor<T>& y);

/// alpha * (1 - SSIM) / 2 + (1 - alpha) * |x - y|, averaged over channels -> [N, 1, H, W].
template <typename T>
BasicTensor<T> photometric_error(const BasicTensor<T>& pred, const BasicTensor<T>& target, double alpha = kSsimAlpha);

/// Mean of err [N, 1, H, W] over pixels where mask [N, 1, H, W] is 1.
/// An all-zero mask is a contract violation.
template <typename T>
BasicTensor<T> masked_mean(const BasicTensor<T>& err, const BasicTensor<T>& mask);

template <typename T>
BasicTensor<T> photometric(const BasicTensor<T>& pred, const BasicTensor<T>& target, const BasicTensor<T>& mask,
                           double alpha = kSsimAlpha);

/// Several reconstructions of the same target. With `take_min` the per-pixel
/// error is the minimum over the sources that are valid there, averaged over
/// pixels valid in at least one source; otherwise the per-source losses are averaged.
template <typename T>
BasicTensor<T> photometric_multi(const std::vector<BasicTensor<T>>& preds, const BasicTensor<T>& target,
                                 const std::vector<BasicTensor<T>>& masks, bool take_min, double alpha = kSsimAlpha);

/// Edge-aware smoothness on disparity normalised by its per-image mean.
/// disp [N, 1, H, W], image [N, C, H, W].
template <typename T>
BasicTensor<T> smoothness(const BasicTensor<T>& disp, const BasicTensor<T>& image);

/// R (x) S must re-synthesise the image.
template <typename T>
BasicTensor<T> loss_ds(const BasicTensor<T>& image, const BasicTensor<T>& reflectance, const BasicTensor<T>& shading);

/// Mean over unmasked pixels of the channel-averaged |R_t - R_s->t|.
template <typename T>
BasicTensor<T> loss_albedo(const BasicTensor<T>& r_target, const BasicTensor<T>& r_warped, const BasicTensor<T>& mask);

/// photometric(R_s->t (x) S_adj, I_t, mask).
template <typename T>
BasicTensor<T> loss_ms(const BasicTensor<T>& target, const BasicTensor<T>& r_warped, const BasicTensor<T>& s_adjusted,
                       const BasicTensor<T>& mask);

struct LossComponents {
    double ds = 0, a = 0, ms = 0, es = 0;
};

template <typename T>
BasicTensor<T> total_loss(const BasicTensor<T>& l_ds, const BasicTensor<T>& l_a, const BasicTensor<T>& l_ms,
                          const BasicTensor<T>& l_es, const LossWeights& w);

// ---------------------------------------------------------------------------

struct Decomposition {
    Tensor reflectance;  // [N, 3, H, W] in (0, 1)
    Tensor shading;      // [N, 1, H, W] in (0, 2)
};

/// Small U-net splitting an image into reflectance and shading.
class DecompositionNet {
public:
    explicit DecompositionNet(std::uint64_t seed);

    Decomposition operator()(const Tensor& image) const;
    void collect(ParamList<float>& out) const;

    Conv2d<float> enc1, enc2, enc3, dec2, dec1, out_r, out_s;
};

/// S_adj = S (x) exp(conv(gelu(conv(S)))). The second conv starts at zero, so
/// the head begins as the identity.
class ShadingAdjust {
public:
    explicit ShadingAdjust(std::uint64_t seed);

    Tensor operator()(const Tensor& shading) const;
    void collect(ParamList<float>& out) const;

    Conv2d<float> conv1, conv2;
};

}  // namespace edlb
