#pragma once

#include <string>
#include <vector>

#include "edlb/adapters.hpp"
#include "edlb/nn.hpp"

namespace edlb {

struct DepthNetConfig {
    int height = 64;
    int width = 80;
    int patch_size = 8;
    int embed_dim = 96;
    int num_blocks = 8;
    int num_heads = 4;
    int mlp_ratio = 4;
    int res_dsc_count = 4;
    int res_dsc_reduction = 4;
    AdapterKind adapter = AdapterKind::RVLoRA;
    int rank = 4;
    InitPolicy init = InitPolicy::KaimingUniform;
    bool adapt_attention = false;
    bool train_bias = false;
    double min_depth = 0.1;
    double max_depth = 150.0;

    void validate() const;
    int grid_h() const { return height / patch_size; }
    int grid_w() const { return width / patch_size; }
    int num_tokens() const { return grid_h() * grid_w(); }
    // 1-based block indices followed by a Res-DSC block: L/k, 2L/k, ..., L.
    std::vector<int> res_dsc_blocks() const;
    // 1-based block indices feeding the decoder: L/4, L/2, 3L/4, L.
    std::vector<int> tap_blocks() const;
};

/// 1x1 reduce -> GELU -> 3x3 depthwise -> GELU -> 1x1 restore, plus skip.
/// The restore conv starts at zero so a freshly inserted block is an identity.
class ResDSC {
public:
    ResDSC() = default;
    ResDSC(int channels, int reduction, Rng& rng);

    Tensor operator()(const Tensor& x) const;  // [N, C, H, W]
    void collect(ParamList<float>& out, const std::string& prefix) const;
    void zero();

    Conv2d<float> reduce, depthwise, restore;
};

struct TransformerBlock {
    LayerNorm<float> norm1, norm2;
    AdaptedLinear<float> qkv, proj, fc1, fc2;
    int num_heads = 1;

    Tensor operator()(const Tensor& x) const;  // [N, T, d]
    void collect(ParamList<float>& out, const std::string& prefix) const;
};

/// Toy ViT encoder with adapters and Res-DSC blocks, plus a four-scale
/// DPT-style decoder. disp[0] is full resolution, disp[s] is 1/2^s.
class DepthNet {
public:
    DepthNet(const DepthNetConfig& config, std::uint64_t seed);

    std::vector<Tensor> encode(const Tensor& image) const;
    // Transformer stack on already embedded tokens [N, T, d]; returns the taps.
    std::vector<Tensor> run_blocks(const Tensor& tokens) const;
    Tensor embed(const Tensor& image) const;
    std::vector<Tensor> decode(const std::vector<Tensor>& taps) const;
    std::vector<Tensor> forward(const Tensor& image) const { return decode(encode(image)); }

    void collect(ParamList<float>& out) const;
    ParamList<float> params() const {
        ParamList<float> p;
        collect(p);
        return p;
    }
    void set_trainable_all(bool trainable);
    // Freezes everything except adapter A/B, Res-DSC convolutions and the depth heads.
    void set_finetune_mode();

    const DepthNetConfig& config() const { return config_; }
    std::vector<ResDSC>& res_dsc() { return res_dsc_; }
    std::vector<TransformerBlock>& blocks() { return blocks_; }

private:
    Tensor tokens_to_grid(const Tensor& tokens) const;
    Tensor grid_to_tokens(const Tensor& grid) const;

    DepthNetConfig config_;
    Conv2d<float> patch_embed_;
    Tensor pos_embed_;
    std::vector<TransformerBlock> blocks_;
    std::vector<ResDSC> res_dsc_;  // one per placement slot
    // Decoder, index 0 = full resolution.
    std::vector<Conv2d<float>> reassemble_, fuse_skip_, fuse_conv_, head_conv1_, head_conv2_;
};

/// Leaves that exist only once adapters or Res-DSC blocks are attached; a
/// base checkpoint does not carry them.
bool is_attached_leaf(const std::string& name);

/// depth = 1 / (s * disp + t) with s = 1/d_min - 1/d_max and t = 1/d_max.
template <typename T>
BasicTensor<T> disp_to_depth(const BasicTensor<T>& disp, double min_depth, double max_depth);

/// Stride-2 conv stack over (target, source, source - target), global mean,
/// linear to 6 values scaled by 0.1: axis-angle then translation of T_{t->s}.
class PoseNet {
public:
    explicit PoseNet(std::uint64_t seed);

    Tensor operator()(const Tensor& target, const Tensor& source) const;  // [N, 6]
    void collect(ParamList<float>& out) const;

    std::vector<Conv2d<float>> convs;
    Tensor fc_weight, fc_bias;
};

}  // namespace edlb
