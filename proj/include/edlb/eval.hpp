#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edlb/geometry.hpp"

namespace edlb {

struct DepthEvalConfig {
    double cap = 150.0;
    double min_depth = 1e-3;

    void validate() const;
};

struct DepthMetrics {
    double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0, delta = 0;
};

inline constexpr const char* kMetricNames[5] = {"abs_rel", "sq_rel", "rmse", "rmse_log", "delta"};

struct ScaledDepth {
    std::vector<double> depth;         // scaled and clamped prediction, every pixel
    std::vector<std::uint8_t> valid;   // gt within [min_depth, cap]
    double scale = 1.0;
};

/// pred * median(gt_valid) / median(pred_valid), then clamp to [min_depth, cap].
/// Only pixels whose ground truth lies in [min_depth, cap] are valid.
ScaledDepth median_scale(std::span<const double> pred, std::span<const double> gt, const DepthEvalConfig& config);

/// Table-style metrics over the valid pixels; delta counts max(d/d*, d*/d) < 1.25 strictly.
DepthMetrics depth_metrics(std::span<const double> pred, std::span<const double> gt, std::span<const std::uint8_t> valid);

/// median_scale followed by depth_metrics.
DepthMetrics evaluate_depth(std::span<const double> pred, std::span<const double> gt, const DepthEvalConfig& config);

double median(std::vector<double> values);

/// Per-image rows plus mean and population std across images.
class EvalReport {
public:
    void add(const std::string& name, const DepthMetrics& m);
    std::size_t size() const { return rows_.size(); }
    const std::vector<DepthMetrics>& rows() const { return rows_; }
    DepthMetrics mean() const;
    DepthMetrics stddev() const;

    std::string tsv() const;
    std::string json() const;

private:
    std::vector<std::string> names_;
    std::vector<DepthMetrics> rows_;
};

struct Similarity {
    double scale = 1.0;
    Mat3 R{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Vec3 t{0, 0, 0};

    Vec3 apply(const Vec3& p) const;
};

/// Least-squares similarity mapping src onto dst (Umeyama).
Similarity umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst);

/// RMSE of positions after similarity alignment of pred onto gt. Needs >= 3 frames.
double ate(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt);

/// Camera-to-world poses from relative motions: rel[k] is T_{k->k+1}, which
/// maps points from frame k into frame k+1. The first camera is the origin.
std::vector<PoseSE3> chain_relative(const std::vector<PoseSE3>& rel);
std::vector<Vec3> positions(const std::vector<PoseSE3>& cam_to_world);

}  // namespace edlb
