#include "edlb/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "edlb/errors.hpp"
#include "edlb/rng.hpp"
#include "json.hpp"

namespace edlb {

namespace {

using json = nlohmann::json;

constexpr double kTwoPi = 6.283185307179586;
constexpr double kMarginFraction = 0.15;
constexpr double kMarchStep = 0.05;
constexpr int kBisections = 48;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b * 0x9E3779B97F4A7C15ULL);
    return Rng::splitmix64(x);
}

// Lattice value in [0, 1) for integer cell (ix, iy).
double lattice(std::uint64_t stream, int octave, std::int64_t ix, std::int64_t iy) {
    std::uint64_t h = mix(stream, static_cast<std::uint64_t>(octave) + 1);
    h = mix(h, static_cast<std::uint64_t>(ix));
    h = mix(h, static_cast<std::uint64_t>(iy));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace

// ---------------------------------------------------------------------------

void SceneSpec::validate() const {
    if (!(d_lo > 0.0)) throw ConfigError("scene: d_lo must be positive, got " + std::to_string(d_lo));
    if (!(d_hi > d_lo)) throw ConfigError("scene: d_hi must exceed d_lo");
    if (width < 8 || height < 8) throw ConfigError("scene: resolution must be at least 8x8");
    K.validate();
    if (train_sequences < 0 || val_sequences < 0 || test_sequences < 0 || total_sequences() == 0) {
        throw ConfigError("scene: sequence counts must be non-negative with at least one sequence");
    }
    if (frames_per_sequence < 3) throw ConfigError("scene: need at least 3 frames per sequence");
    if (bumps < 0 || bump_sigma_lo <= 0.0 || bump_sigma_hi < bump_sigma_lo) throw ConfigError("scene: bad bump parameters");
    if (lumen_sigma <= 0.0) throw ConfigError("scene: lumen_sigma must be positive");
    if (texture_octaves < 1 || texture_octaves > 8 || !(texture_wavelength > 0.0)) {
        throw ConfigError("scene: texture needs 1..8 octaves and a positive wavelength");
    }
    if (max_rotation < 0.0 || max_translation < 0.0) throw ConfigError("scene: motion bounds must be non-negative");
    if (gamma < 0.0 || gamma >= 1.0) throw ConfigError("scene: gamma must lie in [0, 1)");
    if (vignette < 0.0 || vignette >= 1.0) throw ConfigError("scene: vignette must lie in [0, 1)");
    if (ambient < 0.0 || ambient > 1.0) throw ConfigError("scene: ambient must lie in [0, 1]");
}

std::string SceneSpec::split_of(int sequence) const {
    if (sequence < train_sequences) return "train";
    if (sequence < train_sequences + val_sequences) return "val";
    return "test";
}

SceneSpec SceneSpec::preset(const std::string& domain) {
    SceneSpec s;
    if (domain == "A" || domain == "a") return s;
    if (domain != "B" && domain != "b") throw ConfigError("scene: unknown preset '" + domain + "' (expected A or B)");
    s.seed = 2;
    s.bumps = 6;
    s.bump_amplitude = 2.0;
    s.bump_sigma_lo = 0.5;
    s.bump_sigma_hi = 1.5;
    s.bump_spread = 4.0;
    s.base_logit = -1.5;
    s.tilt = 0.05;
    s.lumen_amplitude = 3.0;
    s.lumen_sigma = 2.5;
    s.texture_wavelength = 0.6;
    s.color_a = {0.55, 0.20, 0.18};
    s.color_b = {0.95, 0.62, 0.52};
    s.gamma = 0.25;
    s.vignette = 0.35;
    s.headlight = true;
    s.ambient = 0.1;
    return s;
}

std::string SceneSpec::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["width"] = width;
    j["height"] = height;
    j["K"] = {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}};
    j["train_sequences"] = train_sequences;
    j["val_sequences"] = val_sequences;
    j["test_sequences"] = test_sequences;
    j["frames_per_sequence"] = frames_per_sequence;
    j["d_lo"] = d_lo;
    j["d_hi"] = d_hi;
    j["bumps"] = bumps;
    j["bump_amplitude"] = bump_amplitude;
    j["bump_sigma_lo"] = bump_sigma_lo;
    j["bump_sigma_hi"] = bump_sigma_hi;
    j["bump_spread"] = bump_spread;
    j["base_logit"] = base_logit;
    j["tilt"] = tilt;
    j["lumen_amplitude"] = lumen_amplitude;
    j["lumen_sigma"] = lumen_sigma;
    j["texture_octaves"] = texture_octaves;
    j["texture_wavelength"] = texture_wavelength;
    j["color_a"] = color_a;
    j["color_b"] = color_b;
    j["max_rotation"] = max_rotation;
    j["max_translation"] = max_translation;
    j["gamma"] = gamma;
    j["vignette"] = vignette;
    j["headlight"] = headlight;
    j["ambient"] = ambient;
    return j.dump(2) + "\n";
}

SceneSpec SceneSpec::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("scene spec: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }
    if (!j.is_object()) throw ParseError("scene spec: top level must be an object", 0);
    SceneSpec s;
    if (j.contains("preset")) s = preset(j["preset"].get<std::string>());
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            const json& v = it.value();
            if (k == "preset") continue;
            else if (k == "seed") s.seed = v.get<std::uint64_t>();
            else if (k == "width") s.width = v.get<int>();
            else if (k == "height") s.height = v.get<int>();
            else if (k == "K") {
                for (auto kt = v.begin(); kt != v.end(); ++kt) {
                    if (kt.key() == "fx") s.K.fx = kt.value().get<double>();
                    else if (kt.key() == "fy") s.K.fy = kt.value().get<double>();
                    else if (kt.key() == "cx") s.K.cx = kt.value().get<double>();
                    else if (kt.key() == "cy") s.K.cy = kt.value().get<double>();
                    else throw ConfigError("scene spec: unknown key 'K." + kt.key() + "'");
                }
            }
            else if (k == "train_sequences") s.train_sequences = v.get<int>();
            else if (k == "val_sequences") s.val_sequences = v.get<int>();
            else if (k == "test_sequences") s.test_sequences = v.get<int>();
            else if (k == "frames_per_sequence") s.frames_per_sequence = v.get<int>();
            else if (k == "d_lo") s.d_lo = v.get<double>();
            else if (k == "d_hi") s.d_hi = v.get<double>();
            else if (k == "bumps") s.bumps = v.get<int>();
            else if (k == "bump_amplitude") s.bump_amplitude = v.get<double>();
            else if (k == "bump_sigma_lo") s.bump_sigma_lo = v.get<double>();
            else if (k == "bump_sigma_hi") s.bump_sigma_hi = v.get<double>();
            else if (k == "bump_spread") s.bump_spread = v.get<double>();
            else if (k == "base_logit") s.base_logit = v.get<double>();
            else if (k == "tilt") s.tilt = v.get<double>();
            else if (k == "lumen_amplitude") s.lumen_amplitude = v.get<double>();
            else if (k == "lumen_sigma") s.lumen_sigma = v.get<double>();
            else if (k == "texture_octaves") s.texture_octaves = v.get<int>();
            else if (k == "texture_wavelength") s.texture_wavelength = v.get<double>();
            else if (k == "color_a") s.color_a = v.get<std::array<double, 3>>();
            else if (k == "color_b") s.color_b = v.get<std::array<double, 3>>();
            else if (k == "max_rotation") s.max_rotation = v.get<double>();
            else if (k == "max_translation") s.max_translation = v.get<double>();
            else if (k == "gamma") s.gamma = v.get<double>();
            else if (k == "vignette") s.vignette = v.get<double>();
            else if (k == "headlight") s.headlight = v.get<bool>();
            else if (k == "ambient") s.ambient = v.get<double>();
            else throw ConfigError("scene spec: unknown key '" + k + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scene spec: ") + e.what());
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------

SceneSurface::SceneSurface(const SceneSpec& spec, int sequence) : spec_(&spec) {
    spec.validate();
    stream_ = mix(spec.seed, Rng::hash("surface") + static_cast<std::uint64_t>(sequence));
    Rng rng(stream_);
    const double margin = kMarginFraction * (spec.d_hi - spec.d_lo);
    offset_ = spec.d_lo + margin;
    range_ = spec.d_hi - spec.d_lo - 2.0 * margin;
    tilt_x_ = rng.uniform(-spec.tilt, spec.tilt);
    tilt_y_ = rng.uniform(-spec.tilt, spec.tilt);
    const double base = spec.base_logit + rng.uniform(-0.4, 0.4);
    bumps_.push_back({0.0, 0.0, base, 0.0});  // constant term
    if (spec.lumen_amplitude != 0.0) {
        const double s = spec.lumen_sigma * rng.uniform(0.85, 1.15);
        bumps_.push_back({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), spec.lumen_amplitude, 1.0 / (2.0 * s * s)});
    }
    for (int i = 0; i < spec.bumps; ++i) {
        Bump b;
        b.x = rng.uniform(-spec.bump_spread, spec.bump_spread);
        b.y = rng.uniform(-spec.bump_spread, spec.bump_spread);
        b.amplitude = rng.uniform(-spec.bump_amplitude, spec.bump_amplitude);
        const double s = rng.uniform(spec.bump_sigma_lo, spec.bump_sigma_hi);
        b.inv_two_sigma2 = 1.0 / (2.0 * s * s);
        bumps_.push_back(b);
    }
    const double sx = -0.4, sy = -0.3, sz = -1.0, n = std::sqrt(sx * sx + sy * sy + sz * sz);
    sun_ = {sx / n, sy / n, sz / n};
    for (int j = 0; j < 3; ++j) {
        drift_phase_[j] = rng.uniform(0.0, kTwoPi);
        drift_freq_u_[j] = rng.uniform(-1.0, 1.0);
        drift_freq_v_[j] = rng.uniform(-1.0, 1.0);
    }
}

double SceneSurface::logit(double x, double y) const {
    double f = tilt_x_ * x + tilt_y_ * y;
    for (const auto& b : bumps_) {
        const double dx = x - b.x, dy = y - b.y;
        f += b.amplitude * std::exp(-(dx * dx + dy * dy) * b.inv_two_sigma2);
    }
    return f;
}

double SceneSurface::height_at(double x, double y) const { return offset_ + range_ * sigmoid(logit(x, y)); }

Vec3 SceneSurface::normal_at(double x, double y) const {
    constexpr double e = 1e-4;
    const double hx = (height_at(x + e, y) - height_at(x - e, y)) / (2 * e);
    const double hy = (height_at(x, y + e) - height_at(x, y - e)) / (2 * e);
    const double n = std::sqrt(hx * hx + hy * hy + 1.0);
    return {hx / n, hy / n, -1.0 / n};
}

double SceneSurface::value_noise(double x, double y, int octave) const {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    const double tx = smoothstep(x - fx), ty = smoothstep(y - fy);
    const double v00 = lattice(stream_, octave, ix, iy), v10 = lattice(stream_, octave, ix + 1, iy);
    const double v01 = lattice(stream_, octave, ix, iy + 1), v11 = lattice(stream_, octave, ix + 1, iy + 1);
    return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
}

std::array<double, 3> SceneSurface::albedo_at(double x, double y) const {
    double n = 0.0, total = 0.0, amp = 1.0, wavelength = spec_->texture_wavelength;
    for (int o = 0; o < spec_->texture_octaves; ++o) {
        n += amp * value_noise(x / wavelength, y / wavelength, o);
        total += amp;
        amp *= 0.5;
        wavelength *= 0.5;
    }
    n = smoothstep(std::clamp(1.5 * (n / total - 0.5) + 0.5, 0.0, 1.0));
    std::array<double, 3> out;
    for (int c = 0; c < 3; ++c) out[c] = spec_->color_a[c] + (spec_->color_b[c] - spec_->color_a[c]) * n;
    return out;
}

double SceneSurface::cast(const PoseSE3& cam_to_world, double u, double v) const {
    const Vec3 ray_cam{(u - spec_->K.cx) / spec_->K.fx, (v - spec_->K.cy) / spec_->K.fy, 1.0};
    const Vec3 d = matvec3(cam_to_world.R, ray_cam);
    const Vec3& c = cam_to_world.t;
    if (!(d[2] > 1e-3)) throw ContractError("scene: camera ray does not point towards the surface");
    // s is the camera-frame depth since the camera-frame ray has unit z.
    auto f = [&](double s) { return c[2] + s * d[2] - height_at(c[0] + s * d[0], c[1] + s * d[1]); };
    double lo = std::max(1e-3, (offset_ - c[2]) / d[2] - kMarchStep);
    double flo = f(lo);
    while (flo >= 0.0 && lo > 1e-3) {
        lo = std::max(1e-3, lo * 0.5);
        flo = f(lo);
    }
    const double s_max = 4.0 * (spec_->d_hi + std::abs(c[2])) / d[2];
    double hi = lo;
    for (;;) {
        hi = lo + kMarchStep;
        if (f(hi) >= 0.0) break;
        lo = hi;
        if (lo > s_max) throw ContractError("scene: camera ray misses the surface");
    }
    for (int i = 0; i < kBisections; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double SceneSurface::gain_at(int frame, double u, double v) const {
    double g = 1.0;
    if (spec_->gamma > 0.0) {
        double field = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double arg = kTwoPi * (drift_freq_u_[j] * u / spec_->width + drift_freq_v_[j] * v / spec_->height) +
                               drift_phase_[j] + 0.7 * (j + 1) * frame;
            field += std::sin(arg);
        }
        g += spec_->gamma * field / 3.0;
    }
    if (spec_->vignette > 0.0) {
        const double ru = (u - 0.5 * (spec_->width - 1)) / (0.5 * spec_->width);
        const double rv = (v - 0.5 * (spec_->height - 1)) / (0.5 * spec_->height);
        g *= 1.0 - spec_->vignette * 0.5 * (ru * ru + rv * rv);
    }
    return g;
}

RenderedFrame SceneSurface::render(const PoseSE3& cam_to_world, int frame) const {
    const int W = spec_->width, H = spec_->height;
    const std::size_t hw = std::size_t(W) * H;
    RenderedFrame out;
    out.image.resize(3 * hw);
    out.depth.resize(hw);
    out.gain.resize(hw);
    const double light_ref = 0.4 * (spec_->d_lo + spec_->d_hi);
    for (int v = 0; v < H; ++v) {
        for (int u = 0; u < W; ++u) {
            const std::size_t i = std::size_t(v) * W + u;
            const double s = cast(cam_to_world, u, v);
            const Vec3 p = cam_to_world.apply({(u - spec_->K.cx) / spec_->K.fx * s, (v - spec_->K.cy) / spec_->K.fy * s, s});
            const Vec3 n = normal_at(p[0], p[1]);
            double shading;
            if (spec_->headlight) {
                const Vec3& c = cam_to_world.t;
                Vec3 w{c[0] - p[0], c[1] - p[1], c[2] - p[2]};
                const double r = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
                const double lambert = std::max(0.0, (n[0] * w[0] + n[1] * w[1] + n[2] * w[2]) / r);
                shading = spec_->ambient + (1.0 - spec_->ambient) * lambert * (light_ref / r) * (light_ref / r);
            } else {
                const double lambert = std::max(0.0, n[0] * sun_[0] + n[1] * sun_[1] + n[2] * sun_[2]);
                shading = spec_->ambient + (1.0 - spec_->ambient) * lambert;
            }
            const double g = gain_at(frame, u, v);
            const auto a = albedo_at(p[0], p[1]);
            for (int c = 0; c < 3; ++c) out.image[c * hw + i] = static_cast<float>(std::clamp(a[c] * shading * g, 0.0, 1.0));
            out.depth[i] = static_cast<float>(s);
            out.gain[i] = static_cast<float>(g);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<PoseSE3> sequence_trajectory(const SceneSpec& spec, int sequence) {
    spec.validate();
    Rng rng(mix(spec.seed, Rng::hash("trajectory") + static_cast<std::uint64_t>(sequence)));
    const int F = spec.frames_per_sequence;
    // Orientation oscillates per axis; the per-step change of each component
    // stays below max_rotation / sqrt(3).
    constexpr double nu = 0.35;
    std::array<double, 3> amp, phase;
    for (int a = 0; a < 3; ++a) {
        amp[a] = 0.9 * spec.max_rotation / (nu * std::sqrt(3.0)) * rng.uniform(0.5, 1.0);
        phase[a] = rng.uniform(0.0, kTwoPi);
    }
    const double heading = rng.uniform(0.0, kTwoPi), z_phase = rng.uniform(0.0, kTwoPi);
    const double speed = spec.max_translation * rng.uniform(0.5, 0.95);
    std::vector<Vec3> centres(F, Vec3{0, 0, 0});
    for (int k = 1; k < F; ++k) {
        const double psi = heading + 0.4 * std::sin(0.3 * k);
        Vec3 vel{std::cos(psi), std::sin(psi), 0.3 * std::sin(z_phase + 0.8 * k)};
        const double n = std::sqrt(vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2]);
        for (int a = 0; a < 3; ++a) centres[k][a] = centres[k - 1][a] + speed * vel[a] / n;
    }
    Vec3 mean{0, 0, 0};
    for (const auto& c : centres)
        for (int a = 0; a < 3; ++a) mean[a] += c[a] / F;
    std::vector<PoseSE3> out;
    out.reserve(F);
    for (int k = 0; k < F; ++k) {
        Vec3 aa;
        for (int a = 0; a < 3; ++a) aa[a] = amp[a] * std::sin(phase[a] + nu * k);
        out.push_back(PoseSE3::from_axis_angle(aa, {centres[k][0] - mean[0], centres[k][1] - mean[1], centres[k][2] - mean[2]}));
    }
    return out;
}

FrameTriplet render_triplet(const SceneSpec& spec, int sequence, int frame) {
    if (frame < 1 || frame > spec.frames_per_sequence - 2) {
        throw ConfigError("triplet centre " + std::to_string(frame) + " needs neighbours on both sides");
    }
    const SceneSurface surface(spec, sequence);
    const auto traj = sequence_trajectory(spec, sequence);
    const auto t = surface.render(traj[frame], frame);
    const auto prev = surface.render(traj[frame - 1], frame - 1);
    const auto next = surface.render(traj[frame + 1], frame + 1);
    FrameTriplet out;
    out.target = t.image;
    out.sources = {prev.image, next.image};
    out.depth = t.depth;
    out.target_to_source = {traj[frame - 1].inverse().compose(traj[frame]), traj[frame + 1].inverse().compose(traj[frame])};
    out.gains = {t.gain, prev.gain, next.gain};
    out.K = spec.K;
    return out;
}

// ---------------------------------------------------------------------------

Image8 to_image8(const std::vector<float>& chw, int width, int height) {
    const std::size_t hw = std::size_t(width) * height;
    if (chw.size() != 3 * hw) throw DimensionError("to_image8: expected 3 x " + std::to_string(hw) + " values");
    Image8 img{width, height, std::vector<std::uint8_t>(3 * hw)};
    for (std::size_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(static_cast<double>(chw[c * hw + i]), 0.0, 1.0);
            img.rgb[3 * i + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    return img;
}

std::vector<float> from_image8(const Image8& img) {
    const std::size_t hw = std::size_t(img.width) * img.height;
    std::vector<float> out(3 * hw);
    for (std::size_t i = 0; i < hw; ++i)
        for (int c = 0; c < 3; ++c) out[c * hw + i] = static_cast<float>(img.rgb[3 * i + c] / 255.0);
    return out;
}

namespace {

std::string frame_name(const char* kind, int frame, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d.%s", kind, frame, ext);
    return buf;
}

std::string seq_dir(int sequence) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "seq%03d", sequence);
    return buf;
}

json pose_json(const PoseSE3& p) {
    const auto q = p.quaternion();
    return json::array({p.t[0], p.t[1], p.t[2], q[0], q[1], q[2], q[3]});
}

PoseSE3 pose_from_json(const json& j) {
    const auto v = j.get<std::array<double, 7>>();
    return PoseSE3::from_quaternion({v[3], v[4], v[5], v[6]}, {v[0], v[1], v[2]});
}

}  // namespace

DatasetSummary write_dataset(const SceneSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / "scene.json", spec.to_json());
    DatasetSummary summary;
    std::string manifest;
    for (int s = 0; s < spec.total_sequences(); ++s) {
        const SceneSurface surface(spec, s);
        const auto traj = sequence_trajectory(spec, s);
        const std::string dir = seq_dir(s);
        std::vector<StampedPose> stamped;
        for (int f = 0; f < spec.frames_per_sequence; ++f) {
            const auto frame = surface.render(traj[f], f);
            write_ppm(out_dir / dir / frame_name("image", f, "ppm"), to_image8(frame.image, spec.width, spec.height));
            write_pfm(out_dir / dir / frame_name("depth", f, "pfm"), FloatMap{spec.width, spec.height, frame.depth});
            stamped.push_back({0.1 * f, traj[f]});
            ++summary.frames;
        }
        write_tum(out_dir / dir / "trajectory.tum", stamped);
        const std::string split = spec.split_of(s);
        for (int f = 1; f + 1 < spec.frames_per_sequence; ++f) {
            nlohmann::ordered_json line;
            line["split"] = split;
            line["sequence"] = s;
            line["frame"] = f;
            line["target"] = dir + "/" + frame_name("image", f, "ppm");
            line["sources"] = {dir + "/" + frame_name("image", f - 1, "ppm"), dir + "/" + frame_name("image", f + 1, "ppm")};
            line["depth"] = dir + "/" + frame_name("depth", f, "pfm");
            line["K"] = {spec.K.fx, spec.K.fy, spec.K.cx, spec.K.cy};
            line["width"] = spec.width;
            line["height"] = spec.height;
            line["target_to_source"] = {pose_json(traj[f - 1].inverse().compose(traj[f])),
                                        pose_json(traj[f + 1].inverse().compose(traj[f]))};
            manifest += line.dump() + "\n";
            (split == "train" ? summary.train : split == "val" ? summary.val : summary.test) += 1;
        }
        ++summary.sequences;
    }
    write_file(out_dir / "manifest.jsonl", manifest);
    return summary;
}

Dataset load_dataset(const std::filesystem::path& manifest, const std::string& split) {
    std::filesystem::path file = manifest;
    if (std::filesystem::is_directory(file)) file /= "manifest.jsonl";
    if (!std::filesystem::exists(file)) throw LoadError("manifest not found: " + file.string());
    Dataset ds;
    ds.root = file.parent_path();
    const std::string text = read_file(file);
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        const std::size_t start = pos;
        pos = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("manifest: ") + e.what(), start + (e.byte > 0 ? e.byte - 1 : 0));
        }
        Sample s;
        try {
            s.split = j.at("split").get<std::string>();
            if (!split.empty() && s.split != split) continue;
            s.sequence = j.at("sequence").get<int>();
            s.frame = j.at("frame").get<int>();
            s.width = j.at("width").get<int>();
            s.height = j.at("height").get<int>();
            const auto k = j.at("K").get<std::array<double, 4>>();
            s.K = {k[0], k[1], k[2], k[3]};
            s.target_path = j.at("target").get<std::string>();
            const auto sources = j.at("sources").get<std::vector<std::string>>();
            const auto poses = j.at("target_to_source");
            if (sources.size() != 2 || poses.size() != 2) throw ParseError("manifest: expected two sources", start);
            for (int i = 0; i < 2; ++i) s.target_to_source[i] = pose_from_json(poses[i]);
            const auto load_image = [&](const std::string& rel) {
                const auto img = read_ppm(ds.root / rel);
                if (img.width != s.width || img.height != s.height) throw LoadError(rel + ": size differs from manifest");
                return from_image8(img);
            };
            s.target = load_image(s.target_path);
            for (int i = 0; i < 2; ++i) s.sources[i] = load_image(sources[i]);
            const auto depth = read_pfm(ds.root / j.at("depth").get<std::string>());
            if (depth.width != s.width || depth.height != s.height) throw LoadError("depth size differs from manifest");
            s.depth = depth.data;
        } catch (const json::exception& e) {
            throw ParseError(std::string("manifest: ") + e.what(), start);
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::vector<PoseSE3> load_trajectory(const std::filesystem::path& root, int sequence) {
    std::vector<PoseSE3> out;
    for (const auto& s : read_tum(root / seq_dir(sequence) / "trajectory.tum")) out.push_back(s.pose);
    return out;
}

}  // namespace edlb
