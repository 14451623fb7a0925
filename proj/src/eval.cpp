#include "edlb/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "edlb/errors.hpp"
#include "json.hpp"

namespace edlb {

void DepthEvalConfig::validate() const {
    if (!(min_depth > 0.0) || !(cap > min_depth)) throw ConfigError("depth evaluation needs 0 < min_depth < cap");
}

double median(std::vector<double> values) {
    if (values.empty()) throw EvalError("median of an empty set");
    const std::size_t n = values.size(), mid = n / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    const double upper = values[mid];
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lower + upper);
}

ScaledDepth median_scale(std::span<const double> pred, std::span<const double> gt, const DepthEvalConfig& config) {
    config.validate();
    if (pred.size() != gt.size()) {
        throw DimensionError("prediction has " + std::to_string(pred.size()) + " pixels, ground truth " +
                             std::to_string(gt.size()));
    }
    ScaledDepth out;
    out.valid.resize(gt.size());
    std::vector<double> pv, gv;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool ok = gt[i] >= config.min_depth && gt[i] <= config.cap;
        out.valid[i] = ok;
        if (ok) {
            pv.push_back(pred[i]);
            gv.push_back(gt[i]);
        }
    }
    if (gv.empty()) throw EvalError("no ground-truth pixels inside [min_depth, cap]");
    const double mp = median(pv);
    if (!(mp > 0.0)) throw EvalError("prediction median is not positive");
    out.scale = median(gv) / mp;
    out.depth.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out.depth[i] = std::clamp(pred[i] * out.scale, config.min_depth, config.cap);
    return out;
}

DepthMetrics depth_metrics(std::span<const double> pred, std::span<const double> gt, std::span<const std::uint8_t> valid) {
    if (pred.size() != gt.size() || valid.size() != gt.size()) throw DimensionError("depth_metrics: size mismatch");
    double abs_rel = 0, sq_rel = 0, sq = 0, sq_log = 0, good = 0, n = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!valid[i]) continue;
        const double d = pred[i], g = gt[i];
        if (!(d > 0.0) || !(g > 0.0)) throw ContractError("depth_metrics: non-positive depth");
        const double diff = d - g;
        abs_rel += std::abs(diff) / g;
        sq_rel += diff * diff / g;
        sq += diff * diff;
        const double ld = std::log(d) - std::log(g);
        sq_log += ld * ld;
        if (std::max(d / g, g / d) < 1.25) good += 1;
        n += 1;
    }
    if (n == 0) throw EvalError("depth_metrics: no valid pixels");
    return {abs_rel / n, sq_rel / n, std::sqrt(sq / n), std::sqrt(sq_log / n), good / n};
}

DepthMetrics evaluate_depth(std::span<const double> pred, std::span<const double> gt, const DepthEvalConfig& config) {
    const auto s = median_scale(pred, gt, config);
    return depth_metrics(s.depth, gt, s.valid);
}

// ---------------------------------------------------------------------------

namespace {

std::array<double, 5> as_array(const DepthMetrics& m) { return {m.abs_rel, m.sq_rel, m.rmse, m.rmse_log, m.delta}; }

DepthMetrics from_array(const std::array<double, 5>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }

std::string fixed3(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << v;
    return os.str();
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

}  // namespace

void EvalReport::add(const std::string& name, const DepthMetrics& m) {
    names_.push_back(name);
    rows_.push_back(m);
}

DepthMetrics EvalReport::mean() const {
    std::array<double, 5> acc{};
    for (const auto& r : rows_) {
        const auto a = as_array(r);
        for (int k = 0; k < 5; ++k) acc[k] += a[k];
    }
    for (auto& v : acc) v /= rows_.empty() ? 1.0 : static_cast<double>(rows_.size());
    return from_array(acc);
}

DepthMetrics EvalReport::stddev() const {
    const auto mu = as_array(mean());
    std::array<double, 5> acc{};
    for (const auto& r : rows_) {
        const auto a = as_array(r);
        for (int k = 0; k < 5; ++k) acc[k] += (a[k] - mu[k]) * (a[k] - mu[k]);
    }
    for (auto& v : acc) v = std::sqrt(v / (rows_.empty() ? 1.0 : static_cast<double>(rows_.size())));
    return from_array(acc);
}

std::string EvalReport::tsv() const {
    std::ostringstream os;
    os << "image";
    for (const char* n : kMetricNames) os << '\t' << n;
    os << '\n';
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        os << names_[i];
        for (double v : as_array(rows_[i])) os << '\t' << fixed3(v);
        os << '\n';
    }
    const auto mu = as_array(mean()), sd = as_array(stddev());
    os << "mean";
    for (double v : mu) os << '\t' << fixed3(v);
    os << "\nstd";
    for (double v : sd) os << '\t' << fixed3(v);
    os << '\n';
    return os.str();
}

std::string EvalReport::json() const {
    nlohmann::ordered_json j;
    const auto mu = as_array(mean()), sd = as_array(stddev());
    j["count"] = rows_.size();
    for (int k = 0; k < 5; ++k) {
        j["metrics"][kMetricNames[k]] = {{"mean", round3(mu[k])},
                                         {"std", round3(sd[k])},
                                         {"text", fixed3(mu[k]) + "±" + fixed3(sd[k])}};
    }
    auto& per = j["per_image"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        nlohmann::ordered_json row;
        row["image"] = names_[i];
        const auto a = as_array(rows_[i]);
        for (int k = 0; k < 5; ++k) row[kMetricNames[k]] = round3(a[k]);
        per.push_back(row);
    }
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

Vec3 Similarity::apply(const Vec3& p) const {
    const Vec3 r = matvec3(R, p);
    return {scale * r[0] + t[0], scale * r[1] + t[1], scale * r[2] + t[2]};
}

Similarity umeyama(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    if (src.size() != dst.size() || src.empty()) throw EvalError("alignment needs two non-empty trajectories of equal length");
    const double n = static_cast<double>(src.size());
    Eigen::Vector3d ms = Eigen::Vector3d::Zero(), md = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        ms += Eigen::Vector3d(src[i][0], src[i][1], src[i][2]);
        md += Eigen::Vector3d(dst[i][0], dst[i][1], dst[i][2]);
    }
    ms /= n;
    md /= n;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    double var_src = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Eigen::Vector3d x = Eigen::Vector3d(src[i][0], src[i][1], src[i][2]) - ms;
        const Eigen::Vector3d y = Eigen::Vector3d(dst[i][0], dst[i][1], dst[i][2]) - md;
        cov += y * x.transpose();
        var_src += x.squaredNorm();
    }
    cov /= n;
    var_src /= n;
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Vector3d S = Eigen::Vector3d::Ones();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) S(2) = -1;
    const Eigen::Matrix3d R = svd.matrixU() * S.asDiagonal() * svd.matrixV().transpose();
    // A collapsed source trajectory has no scale; map everything onto the mean.
    const double scale = var_src > 0.0 ? svd.singularValues().dot(S) / var_src : 0.0;
    const Eigen::Vector3d t = md - scale * R * ms;

    Similarity out;
    out.scale = scale;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.R[r * 3 + c] = R(r, c);
    out.t = {t.x(), t.y(), t.z()};
    return out;
}

double ate(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
    if (pred.size() != gt.size()) throw EvalError("trajectories differ in length");
    if (pred.size() < 3) throw EvalError("ATE needs at least 3 frames, got " + std::to_string(pred.size()));
    const auto sim = umeyama(pred, gt);
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Vec3 p = sim.apply(pred[i]);
        for (int k = 0; k < 3; ++k) sq += (p[k] - gt[i][k]) * (p[k] - gt[i][k]);
    }
    return std::sqrt(sq / static_cast<double>(pred.size()));
}

std::vector<PoseSE3> chain_relative(const std::vector<PoseSE3>& rel) {
    std::vector<PoseSE3> out{PoseSE3::identity()};
    for (const auto& r : rel) out.push_back(out.back().compose(r.inverse()));
    return out;
}

std::vector<Vec3> positions(const std::vector<PoseSE3>& cam_to_world) {
    std::vector<Vec3> out;
    out.reserve(cam_to_world.size());
    for (const auto& p : cam_to_world) out.push_back(p.t);
    return out;
}

}  // namespace edlb
