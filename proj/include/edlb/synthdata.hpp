#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "edlb/formats.hpp"
#include "edlb/geometry.hpp"

namespace edlb {

/// Parameters of a synthetic height-field world and the cameras moving over it.
///
/// The surface is z = d_lo + m + (d_hi - d_lo - 2m) * sigmoid(f(x, y)) with
/// f = tilt . (x, y) + lumen + sum of Gaussian bumps, and m = 15% of the range.
/// Cameras look down +z; every sequence gets its own surface, texture and path.
struct SceneSpec {
    std::uint64_t seed = 1;
    int width = 80;
    int height = 64;
    Intrinsics K{64.0, 64.0, 39.5, 31.5};

    int train_sequences = 8;
    int val_sequences = 0;
    int test_sequences = 2;
    int frames_per_sequence = 10;

    double d_lo = 3.0;
    double d_hi = 12.0;
    int bumps = 8;
    double bump_amplitude = 3.0;    // |a_i| <= this, in sigmoid logits
    double bump_sigma_lo = 0.8;
    double bump_sigma_hi = 2.5;
    double bump_spread = 5.0;       // centres uniform in [-spread, spread]^2
    double base_logit = 0.0;
    double tilt = 0.15;             // |slope| of the logit plane per axis
    double lumen_amplitude = 0.0;   // centred bump pushing the surface away
    double lumen_sigma = 3.0;

    int texture_octaves = 2;
    double texture_wavelength = 0.8;  // largest octave, scene units
    std::array<double, 3> color_a{0.35, 0.45, 0.30};
    std::array<double, 3> color_b{0.75, 0.80, 0.65};

    double max_rotation = 0.03;     // per-frame relative rotation, rad
    double max_translation = 0.5;   // per-frame relative translation, scene units

    double gamma = 0.0;             // illumination drift amplitude
    double vignette = 0.0;          // 1 - vignette * r^2, r = 1 at the corners
    bool headlight = false;         // light at the camera with 1/r^2 falloff instead of a fixed sun
    double ambient = 0.25;

    void validate() const;
    int total_sequences() const { return train_sequences + val_sequences + test_sequences; }
    std::string split_of(int sequence) const;

    // Presets: "A" static lighting, "B" endoscope-like headlight, drift and vignette.
    static SceneSpec preset(const std::string& domain);
    static SceneSpec from_json(const std::string& text);
    std::string to_json() const;
};

/// One rendered view.
struct RenderedFrame {
    std::vector<float> image;  // [3, H, W] in [0, 1]
    std::vector<float> depth;  // [H, W], camera-frame z
    std::vector<float> gain;   // [H, W] multiplicative illumination field
};

class SceneSurface {
public:
    SceneSurface(const SceneSpec& spec, int sequence);

    double height_at(double x, double y) const;
    std::array<double, 3> albedo_at(double x, double y) const;
    // Unit normal facing the cameras (negative z).
    Vec3 normal_at(double x, double y) const;
    // Camera-frame depth of the first surface hit along pixel (u, v).
    double cast(const PoseSE3& cam_to_world, double u, double v) const;

    RenderedFrame render(const PoseSE3& cam_to_world, int frame) const;

private:
    struct Bump {
        double x, y, amplitude, inv_two_sigma2;
    };
    double logit(double x, double y) const;
    double value_noise(double x, double y, int octave) const;
    double gain_at(int frame, double u, double v) const;

    const SceneSpec* spec_;
    std::uint64_t stream_;
    double offset_, range_;
    double tilt_x_, tilt_y_;
    std::vector<Bump> bumps_;
    Vec3 sun_;
    std::array<double, 3> drift_phase_{}, drift_freq_u_{}, drift_freq_v_{};
};

/// Camera-to-world poses for every frame of a sequence.
std::vector<PoseSE3> sequence_trajectory(const SceneSpec& spec, int sequence);

struct FrameTriplet {
    std::vector<float> target;                 // I_t, [3, H, W]
    std::array<std::vector<float>, 2> sources; // I_{t-1}, I_{t+1}
    std::vector<float> depth;                  // D_t, [H, W]
    std::array<PoseSE3, 2> target_to_source;   // T_{t->s}
    std::array<std::vector<float>, 3> gains;   // target, previous, next
    Intrinsics K;
};

/// Renders the triplet centred on `frame` (1 <= frame <= frames - 2).
FrameTriplet render_triplet(const SceneSpec& spec, int sequence, int frame);

struct DatasetSummary {
    int sequences = 0;
    int frames = 0;
    int train = 0, val = 0, test = 0;  // triplets per split
};

/// Writes seqNNN/{image_FFFF.ppm, depth_FFFF.pfm, trajectory.tum}, scene.json
/// and manifest.jsonl (one line per triplet) under `out_dir`.
DatasetSummary write_dataset(const SceneSpec& spec, const std::filesystem::path& out_dir);

/// A manifest entry loaded into memory.
struct Sample {
    std::string split;
    int sequence = 0;
    int frame = 0;
    std::string target_path;
    std::vector<float> target;
    std::array<std::vector<float>, 2> sources;
    std::vector<float> depth;
    std::array<PoseSE3, 2> target_to_source;
    Intrinsics K;
    int width = 0, height = 0;
};

struct Dataset {
    std::vector<Sample> samples;
    std::filesystem::path root;
};

/// Reads manifest.jsonl (a file, or a directory holding one) keeping the given
/// split; an empty split keeps everything. Malformed lines throw ParseError.
Dataset load_dataset(const std::filesystem::path& manifest, const std::string& split);

/// Ground-truth camera-to-world trajectory of a sequence from its TUM file.
std::vector<PoseSE3> load_trajectory(const std::filesystem::path& root, int sequence);

Image8 to_image8(const std::vector<float>& chw, int width, int height);
std::vector<float> from_image8(const Image8& img);

}  // namespace edlb
