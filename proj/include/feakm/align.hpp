#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "feakm/geometry.hpp"
#include "feakm/keypoint.hpp"
#include "feakm/matcher.hpp"
#include "feakm/rng.hpp"

namespace feakm {

// Matched point pairs in meters: source in agent j's frame, target in agent
// i's frame.
struct CorrespondenceSet {
    std::vector<Eigen::Vector2d> source;
    std::vector<Eigen::Vector2d> target;
    std::vector<double> weights;

    void validate() const {
        if (source.size() != target.size() || source.size() != weights.size()) {
            throw std::invalid_argument("CorrespondenceSet: size mismatch");
        }
        if (source.size() < 2) {
            throw std::invalid_argument("CorrespondenceSet: need at least 2 correspondences");
        }
        double sum = 0.0;
        for (double w : weights) {
            if (w <= 0.0) throw std::invalid_argument("CorrespondenceSet: weights must be positive");
            sum += w;
        }
        if (!(sum > 0.0)) throw std::invalid_argument("CorrespondenceSet: weight sum must be positive");
    }
};

// Weighted least-squares rigid transform (Kabsch): demean, weighted
// cross-covariance, SVD, determinant correction so reflections are never
// returned, translation from the weighted means.
inline RigidTransform2D estimate_rigid_svd(const CorrespondenceSet& c) {
    c.validate();
    const std::size_t n = c.source.size();
    double w_sum = 0.0;
    Eigen::Vector2d mu_s = Eigen::Vector2d::Zero();
    Eigen::Vector2d mu_t = Eigen::Vector2d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        w_sum += c.weights[i];
        mu_s += c.weights[i] * c.source[i];
        mu_t += c.weights[i] * c.target[i];
    }
    mu_s /= w_sum;
    mu_t /= w_sum;

    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d ds = c.source[i] - mu_s;
        const Eigen::Vector2d dt = c.target[i] - mu_t;
        h += c.weights[i] * ds * dt.transpose();
        spread = std::max(spread, ds.squaredNorm());
    }
    if (spread < 1e-18) {
        throw std::invalid_argument("estimate_rigid_svd: source points are coincident");
    }

    Eigen::JacobiSVD<Eigen::Matrix2d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix2d u = svd.matrixU();
    const Eigen::Matrix2d v = svd.matrixV();
    Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
    if ((v * u.transpose()).determinant() < 0.0) d(1, 1) = -1.0;
    const Eigen::Matrix2d r = v * d * u.transpose();
    return RigidTransform2D::from_matrix(r, mu_t - r * mu_s);
}

enum class AlignmentStatus { Consistent, Deviant, Unverifiable };

inline const char* to_string(AlignmentStatus s) {
    switch (s) {
        case AlignmentStatus::Consistent: return "Consistent";
        case AlignmentStatus::Deviant: return "Deviant";
        default: return "Unverifiable";
    }
}

struct AlignmentResult {
    RigidTransform2D transform;
    std::vector<int> inliers;
    double rms_residual = 0.0;
    std::optional<AlignmentStatus> status;  // set by correct_pose
};

struct RansacParams {
    int iterations = 256;
    // Half a cell of quantization per axis per side puts honest pairs below
    // ~0.4 m; sidelobe artifacts land around 0.5-3 m and must stay out of the
    // consensus or they bias the refit.
    double inlier_threshold = 0.5;  // meters
    int min_inliers = 4;
    std::uint64_t seed = 17;
};

// Minimal 2-point hypotheses scored by inlier count, refit on the best
// consensus set with the weighted SVD solve. Deterministic given the seed.
// Empty result means the consensus was too small: fall back to the reported
// pose.
inline std::optional<AlignmentResult> estimate_rigid_ransac(const CorrespondenceSet& c,
                                                            const RansacParams& params) {
    c.validate();
    const int n = static_cast<int>(c.source.size());
    Rng rng(params.seed);

    std::vector<int> best_inliers;
    const double thr2 = params.inlier_threshold * params.inlier_threshold;
    for (int it = 0; it < params.iterations; ++it) {
        const int i = static_cast<int>(rng.uniform_int(0, n - 1));
        int j = static_cast<int>(rng.uniform_int(0, n - 2));
        if (j >= i) ++j;
        if ((c.source[i] - c.source[j]).squaredNorm() < 1e-12 ||
            (c.target[i] - c.target[j]).squaredNorm() < 1e-12) {
            continue;
        }
        CorrespondenceSet minimal;
        minimal.source = {c.source[i], c.source[j]};
        minimal.target = {c.target[i], c.target[j]};
        minimal.weights = {1.0, 1.0};
        const RigidTransform2D t = estimate_rigid_svd(minimal);

        std::vector<int> inliers;
        for (int k = 0; k < n; ++k) {
            if ((t.apply(c.source[k]) - c.target[k]).squaredNorm() <= thr2) inliers.push_back(k);
        }
        if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
        if (static_cast<int>(best_inliers.size()) == n) break;  // cannot improve
    }
    if (static_cast<int>(best_inliers.size()) < std::max(params.min_inliers, 2)) {
        return std::nullopt;
    }

    CorrespondenceSet consensus;
    for (int k : best_inliers) {
        consensus.source.push_back(c.source[k]);
        consensus.target.push_back(c.target[k]);
        consensus.weights.push_back(c.weights[k]);
    }
    AlignmentResult result;
    result.transform = estimate_rigid_svd(consensus);
    result.inliers = std::move(best_inliers);
    double acc = 0.0;
    for (int k : result.inliers) {
        acc += (result.transform.apply(c.source[k]) - c.target[k]).squaredNorm();
    }
    result.rms_residual = std::sqrt(acc / static_cast<double>(result.inliers.size()));
    return result;
}

struct AlignParams {
    double tau_t = 0.5;      // meters
    double tau_r_deg = 1.0;  // degrees
    RansacParams ransac;
};

// Pose rectification for one agent pair: estimate the transform from matched
// keypoints, then verify the reported relative pose against it. Consistent
// keeps the reported transform, Deviant returns the computed one,
// Unverifiable (estimation failed) falls back to the reported transform.
inline AlignmentResult correct_pose(const Pose& p_i, const Pose& p_j, const KeypointSet& kp_i,
                                    const KeypointSet& kp_j, const MatchSet& m,
                                    const GridSpec& grid, const AlignParams& params) {
    const RigidTransform2D t_rep = relative_transform(p_i, p_j);

    CorrespondenceSet c;
    for (const MatchPair& pair : m.pairs) {
        c.source.push_back(grid_to_world(kp_j.coords[static_cast<std::size_t>(pair.index_b)], grid));
        c.target.push_back(grid_to_world(kp_i.coords[static_cast<std::size_t>(pair.index_a)], grid));
        c.weights.push_back(std::max(pair.confidence, 1e-6));
    }

    AlignmentResult result;
    std::optional<AlignmentResult> estimated;
    try {
        estimated = estimate_rigid_ransac(c, params.ransac);
    } catch (const std::invalid_argument&) {
        estimated = std::nullopt;  // degenerate geometry: treat as estimation failure
    }
    if (!estimated) {
        result.transform = t_rep;
        result.status = AlignmentStatus::Unverifiable;
        return result;
    }

    result = *estimated;
    const double dt = (result.transform.translation - t_rep.translation).norm();
    const double dr = std::abs(wrap_angle(result.transform.angle() - t_rep.angle()));
    if (dt <= params.tau_t && dr <= deg2rad(params.tau_r_deg)) {
        result.status = AlignmentStatus::Consistent;
        result.transform = t_rep;  // reported pose verified; keep it
    } else {
        result.status = AlignmentStatus::Deviant;  // keep the computed transform
    }
    return result;
}

}  // namespace feakm
