#include "edlb/nets.hpp"

#include <algorithm>
#include <cmath>

#include "edlb/errors.hpp"

namespace edlb {

namespace {

constexpr int kDecoderChannels[4] = {8, 16, 32, 48};  // full, 1/2, 1/4, 1/8
constexpr int kHeadHidden = 16;

Rng module_rng(std::uint64_t seed, const std::string& name) { return Rng::derive(seed, Rng::hash(name.c_str())); }

bool is_adapter_leaf(const std::string& name) {
    return name.find(".rvlora.") != std::string::npos || name.find(".lora.") != std::string::npos;
}

}  // namespace

bool is_attached_leaf(const std::string& name) {
    return is_adapter_leaf(name) || name.rfind("encoder.resdsc", 0) == 0;
}

void DepthNetConfig::validate() const {
    if (height <= 0 || width <= 0 || patch_size <= 0) throw ConfigError("image size and patch size must be positive");
    if (height % patch_size != 0 || width % patch_size != 0) {
        throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                          " is not divisible by patch size " + std::to_string(patch_size));
    }
    // Four decoder stages halve the patch grid three times from full resolution.
    if (patch_size != 8) throw ConfigError("the four-scale decoder expects patch size 8");
    if (num_blocks < 4 || num_blocks % 4 != 0) throw ConfigError("num_blocks must be a positive multiple of 4");
    if (num_heads <= 0 || embed_dim % num_heads != 0) throw ConfigError("embed_dim must be divisible by num_heads");
    if (mlp_ratio <= 0) throw ConfigError("mlp_ratio must be positive");
    if (res_dsc_count < 0 || (res_dsc_count > 0 && num_blocks % res_dsc_count != 0)) {
        throw ConfigError("num_blocks " + std::to_string(num_blocks) + " is not divisible by res_dsc_count " +
                          std::to_string(res_dsc_count));
    }
    if (res_dsc_reduction <= 0 || embed_dim % res_dsc_reduction != 0) {
        throw ConfigError("embed_dim must be divisible by res_dsc_reduction");
    }
    if (adapter != AdapterKind::None && (rank < 1 || rank > embed_dim)) throw ConfigError("adapter rank out of range");
    if (!(min_depth > 0.0) || !(max_depth > min_depth)) throw ConfigError("need 0 < min_depth < max_depth");
}

std::vector<int> DepthNetConfig::res_dsc_blocks() const {
    std::vector<int> out;
    if (res_dsc_count == 0) return out;
    const int step = num_blocks / res_dsc_count;
    for (int i = 1; i <= res_dsc_count; ++i) out.push_back(i * step);
    return out;
}

std::vector<int> DepthNetConfig::tap_blocks() const {
    const int q = num_blocks / 4;
    return {q, 2 * q, 3 * q, num_blocks};
}

// ---------------------------------------------------------------------------

ResDSC::ResDSC(int channels, int reduction, Rng& rng) {
    const int mid = channels / reduction;
    reduce = Conv2d<float>(channels, mid, 1, {}, true, rng);
    depthwise = Conv2d<float>(mid, mid, 3, {1, 1, mid}, true, rng);
    restore = Conv2d<float>(mid, channels, 1, {}, true, rng);
    restore.zero();
}

Tensor ResDSC::operator()(const Tensor& x) const { return add(x, restore(gelu(depthwise(gelu(reduce(x)))))); }

void ResDSC::collect(ParamList<float>& out, const std::string& prefix) const {
    reduce.collect(out, join_name(prefix, "reduce"));
    depthwise.collect(out, join_name(prefix, "depthwise"));
    restore.collect(out, join_name(prefix, "restore"));
}

void ResDSC::zero() {
    reduce.zero();
    depthwise.zero();
    restore.zero();
}

Tensor TransformerBlock::operator()(const Tensor& x) const {
    const std::int64_t N = x.dim(0), T = x.dim(1), d = x.dim(2);
    const std::int64_t dh = d / num_heads;
    auto qkv_t = permute(reshape(qkv(norm1(x)), {N, T, 3, num_heads, dh}), {2, 0, 3, 1, 4});
    auto q = reshape(slice(qkv_t, 0, 0, 1), {N, num_heads, T, dh});
    auto k = reshape(slice(qkv_t, 0, 1, 2), {N, num_heads, T, dh});
    auto v = reshape(slice(qkv_t, 0, 2, 3), {N, num_heads, T, dh});
    auto scores = mul_scalar(matmul(q, transpose(k, 2, 3)), 1.0f / std::sqrt(static_cast<float>(dh)));
    auto ctx = reshape(permute(matmul(softmax(scores), v), {0, 2, 1, 3}), {N, T, d});
    auto h = add(x, proj(ctx));
    return add(h, fc2(gelu(fc1(norm2(h)))));
}

void TransformerBlock::collect(ParamList<float>& out, const std::string& prefix) const {
    norm1.collect(out, join_name(prefix, "norm1"));
    qkv.collect(out, join_name(prefix, "attn.qkv"));
    proj.collect(out, join_name(prefix, "attn.proj"));
    norm2.collect(out, join_name(prefix, "norm2"));
    fc1.collect(out, join_name(prefix, "mlp.fc1"));
    fc2.collect(out, join_name(prefix, "mlp.fc2"));
}

// ---------------------------------------------------------------------------

DepthNet::DepthNet(const DepthNetConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    const int d = config_.embed_dim;
    {
        auto rng = module_rng(seed, "encoder.patch_embed");
        patch_embed_ = Conv2d<float>(3, d, config_.patch_size, {config_.patch_size, 0, 1}, true, rng);
        auto prng = module_rng(seed, "encoder.pos_embed");
        pos_embed_ = Tensor::normal({config_.num_tokens(), d}, prng, 0.0, 0.02, true);
    }
    auto attach = [&](AdaptedLinear<float>& layer, const std::string& name) {
        if (config_.adapter == AdapterKind::None) return;
        const auto s = Rng::hash((name + ".adapter").c_str()) ^ seed;
        const auto m = layer.out_features(), n = layer.in_features();
        layer.attach(config_.adapter == AdapterKind::RVLoRA ? init_rvlora<float>(m, n, config_.rank, s, config_.init)
                                                            : init_lora<float>(m, n, config_.rank, s, config_.init),
                     config_.train_bias);
    };
    for (int i = 1; i <= config_.num_blocks; ++i) {
        const std::string name = "encoder.block" + std::to_string(i);
        auto rng = module_rng(seed, name);
        TransformerBlock b;
        b.num_heads = config_.num_heads;
        b.norm1 = LayerNorm<float>(d);
        b.norm2 = LayerNorm<float>(d);
        b.qkv = AdaptedLinear<float>(3 * d, d, true, rng);
        b.proj = AdaptedLinear<float>(d, d, true, rng);
        b.fc1 = AdaptedLinear<float>(config_.mlp_ratio * d, d, true, rng);
        b.fc2 = AdaptedLinear<float>(d, config_.mlp_ratio * d, true, rng);
        attach(b.fc1, name + ".mlp.fc1");
        attach(b.fc2, name + ".mlp.fc2");
        if (config_.adapt_attention) {
            attach(b.qkv, name + ".attn.qkv");
            attach(b.proj, name + ".attn.proj");
        }
        blocks_.push_back(std::move(b));
    }
    for (int i = 1; i <= config_.res_dsc_count; ++i) {
        auto rng = module_rng(seed, "encoder.resdsc" + std::to_string(i));
        res_dsc_.emplace_back(d, config_.res_dsc_reduction, rng);
    }
    for (int s = 0; s < 4; ++s) {
        const int c = kDecoderChannels[s];
        const std::string n = std::to_string(s);
        auto rng = module_rng(seed, "decoder.stage" + n);
        reassemble_.emplace_back(d, c, 1, Conv2dOptions{}, true, rng);
        fuse_skip_.emplace_back(s < 3 ? kDecoderChannels[s + 1] : c, c, 1, Conv2dOptions{}, true, rng);
        fuse_conv_.emplace_back(c, c, 3, Conv2dOptions{1, 1, 1}, true, rng);
        auto hrng = module_rng(seed, "decoder.head" + n);
        head_conv1_.emplace_back(c, kHeadHidden, 3, Conv2dOptions{1, 1, 1}, true, hrng);
        head_conv2_.emplace_back(kHeadHidden, 1, 1, Conv2dOptions{}, true, hrng);
    }
}

Tensor DepthNet::tokens_to_grid(const Tensor& tokens) const {
    const std::int64_t N = tokens.dim(0);
    return reshape(transpose(tokens, 1, 2), {N, config_.embed_dim, config_.grid_h(), config_.grid_w()});
}

Tensor DepthNet::grid_to_tokens(const Tensor& grid) const {
    const std::int64_t N = grid.dim(0);
    return transpose(reshape(grid, {N, config_.embed_dim, config_.num_tokens()}), 1, 2);
}

Tensor DepthNet::embed(const Tensor& image) const {
    if (image.ndim() != 4 || image.dim(1) != 3 || image.dim(2) != config_.height || image.dim(3) != config_.width) {
        throw DimensionError("depth net expects [N, 3, " + std::to_string(config_.height) + ", " +
                             std::to_string(config_.width) + "], got " + shape_str(image.shape()));
    }
    // Fixed input normalisation.
    auto x = mul_scalar(add_scalar(image, -0.45f), 1.0f / 0.225f);
    auto grid = patch_embed_(x);
    return add(grid_to_tokens(grid), pos_embed_);
}

std::vector<Tensor> DepthNet::run_blocks(const Tensor& tokens) const {
    const auto slots = config_.res_dsc_blocks();
    const auto taps = config_.tap_blocks();
    std::vector<Tensor> out;
    Tensor x = tokens;
    std::size_t slot = 0;
    for (int i = 1; i <= config_.num_blocks; ++i) {
        x = blocks_[i - 1](x);
        if (slot < slots.size() && slots[slot] == i) {
            x = grid_to_tokens(res_dsc_[slot](tokens_to_grid(x)));
            ++slot;
        }
        if (std::find(taps.begin(), taps.end(), i) != taps.end()) out.push_back(x);
    }
    return out;
}

std::vector<Tensor> DepthNet::encode(const Tensor& image) const { return run_blocks(embed(image)); }

std::vector<Tensor> DepthNet::decode(const std::vector<Tensor>& taps) const {
    if (taps.size() != 4) throw DimensionError("decoder expects four tapped feature maps");
    std::vector<Tensor> disp(4);
    Tensor prev;
    // Deepest tap drives the coarsest stage.
    for (int s = 3; s >= 0; --s) {
        const std::int64_t h = config_.height >> s, w = config_.width >> s;
        auto r = reassemble_[s](tokens_to_grid(taps[s]));
        if (r.dim(2) != h || r.dim(3) != w) r = bilinear_upsample(r, h, w);
        Tensor f = s == 3 ? fuse_skip_[s](r) : add(r, fuse_skip_[s](bilinear_upsample(prev, h, w)));
        prev = gelu(fuse_conv_[s](f));
        disp[s] = sigmoid(head_conv2_[s](gelu(head_conv1_[s](prev))));
    }
    return disp;
}

void DepthNet::collect(ParamList<float>& out) const {
    patch_embed_.collect(out, "encoder.patch_embed");
    out.push_back({"encoder.pos_embed", pos_embed_});
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect(out, "encoder.block" + std::to_string(i + 1));
    for (std::size_t i = 0; i < res_dsc_.size(); ++i) res_dsc_[i].collect(out, "encoder.resdsc" + std::to_string(i + 1));
    for (int s = 0; s < 4; ++s) {
        const std::string n = std::to_string(s);
        reassemble_[s].collect(out, "decoder.reassemble" + n);
        fuse_skip_[s].collect(out, "decoder.fuse" + n + ".skip");
        fuse_conv_[s].collect(out, "decoder.fuse" + n + ".conv");
        head_conv1_[s].collect(out, "decoder.head" + n + ".conv1");
        head_conv2_[s].collect(out, "decoder.head" + n + ".conv2");
    }
}

void DepthNet::set_trainable_all(bool trainable) {
    for (auto& p : params()) {
        // Random scaling vectors never train.
        const bool frozen_vector = p.name.size() > 2 && p.name.find(".rvlora.") != std::string::npos &&
                                   (p.name.back() == 'a' || p.name.back() == 'b') && p.name[p.name.size() - 2] == '.';
        p.tensor.set_requires_grad(trainable && !frozen_vector);
    }
}

void DepthNet::set_finetune_mode() {
    for (auto& p : params()) {
        const auto& n = p.name;
        bool train = false;
        if (is_adapter_leaf(n)) train = n.back() == 'A' || n.back() == 'B';
        else if (n.rfind("encoder.resdsc", 0) == 0) train = true;
        else if (n.rfind("decoder.head", 0) == 0) train = true;
        else if (config_.train_bias && n.size() > 5 && n.compare(n.size() - 5, 5, ".bias") == 0 &&
                 n.rfind("encoder.block", 0) == 0) {
            // Optional: biases of adapted linears.
            const auto stem = n.substr(0, n.size() - 5);
            train = stem.find(".mlp.fc") != std::string::npos ||
                    (config_.adapt_attention && stem.find(".attn.") != std::string::npos);
        }
        p.tensor.set_requires_grad(train);
    }
}

template <typename T>
BasicTensor<T> disp_to_depth(const BasicTensor<T>& disp, double min_depth, double max_depth) {
    const double s = 1.0 / min_depth - 1.0 / max_depth, t = 1.0 / max_depth;
    return div(BasicTensor<T>::scalar(T(1)), add_scalar(mul_scalar(disp, static_cast<T>(s)), static_cast<T>(t)));
}

template BasicTensor<float> disp_to_depth(const BasicTensor<float>&, double, double);
template BasicTensor<double> disp_to_depth(const BasicTensor<double>&, double, double);

// ---------------------------------------------------------------------------

PoseNet::PoseNet(std::uint64_t seed) {
    const int chans[5] = {9, 32, 64, 128, 128};
    for (int i = 0; i < 4; ++i) {
        auto rng = module_rng(seed, "pose.conv" + std::to_string(i + 1));
        convs.emplace_back(chans[i], chans[i + 1], 3, Conv2dOptions{2, 1, 1}, true, rng);
    }
    auto rng = module_rng(seed, "pose.fc");
    const double bound = 1.0 / std::sqrt(128.0);
    fc_weight = Tensor::uniform({6, 128}, rng, -bound, bound, true);
    fc_bias = Tensor::zeros({6}, true);
}

Tensor PoseNet::operator()(const Tensor& target, const Tensor& source) const {
    if (target.shape() != source.shape() || target.ndim() != 4 || target.dim(1) != 3) {
        throw DimensionError("pose net expects two [N, 3, H, W] images of equal shape, got " +
                             shape_str(target.shape()) + " and " + shape_str(source.shape()));
    }
    const Tensor diff = mul_scalar(sub(source, target), 4.0f);
    auto x = mul_scalar(add_scalar(concat<float>({target, source, diff}, 1), -0.45f), 1.0f / 0.225f);
    for (const auto& c : convs) x = relu(c(x));
    const std::int64_t N = x.dim(0), C = x.dim(1);
    auto pooled = mean(reshape(x, {N, C, x.dim(2) * x.dim(3)}), 2);
    return mul_scalar(linear(pooled, fc_weight, fc_bias), 0.1f);
}

void PoseNet::collect(ParamList<float>& out) const {
    for (std::size_t i = 0; i < convs.size(); ++i) convs[i].collect(out, "pose.conv" + std::to_string(i + 1));
    out.push_back({"pose.fc.weight", fc_weight});
    out.push_back({"pose.fc.bias", fc_bias});
}

}  // namespace edlb
