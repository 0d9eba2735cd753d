#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "feakm/rng.hpp"

namespace feakm {

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

inline double deg2rad(double d) { return d * M_PI / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / M_PI; }

// 6DoF pose. All planar operations in this library require z = pitch = roll = 0;
// the extra fields ride along so wire messages stay 6DoF.
struct Pose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double yaw = 0.0;
    double pitch = 0.0;
    double roll = 0.0;

    Pose() = default;
    Pose(double x_, double y_, double z_, double yaw_, double pitch_, double roll_)
        : x(x_), y(y_), z(z_),
          yaw(wrap_angle(yaw_)), pitch(wrap_angle(pitch_)), roll(wrap_angle(roll_)) {}

    static Pose planar(double x, double y, double yaw) {
        return Pose(x, y, 0.0, yaw, 0.0, 0.0);
    }

    bool is_planar(double eps = 1e-12) const {
        return std::abs(z) <= eps && std::abs(pitch) <= eps && std::abs(roll) <= eps;
    }
};

inline void require_planar(const Pose& p, const char* what) {
    if (!p.is_planar()) {
        throw std::invalid_argument(std::string(what) + ": pose is not planar");
    }
}

// Planar rigid motion. Construction always re-orthonormalizes via the polar
// factor and rejects reflections, so the invariants R^T R = I, det R = +1
// hold for every live instance.
struct RigidTransform2D {
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();

    static RigidTransform2D identity() { return RigidTransform2D{}; }

    static RigidTransform2D from_angle(double theta, const Eigen::Vector2d& t = Eigen::Vector2d::Zero()) {
        RigidTransform2D out;
        const double c = std::cos(theta), s = std::sin(theta);
        out.rotation << c, -s, s, c;
        out.translation = t;
        return out;
    }

    static RigidTransform2D from_matrix(const Eigen::Matrix2d& r, const Eigen::Vector2d& t) {
        // Polar factor of a 2x2 near-rotation: angle from the skew/trace parts.
        const double det = r.determinant();
        if (det <= 0.0) {
            throw std::invalid_argument("RigidTransform2D: matrix is a reflection or singular");
        }
        const double theta = std::atan2(r(1, 0) - r(0, 1), r(0, 0) + r(1, 1));
        RigidTransform2D out = from_angle(theta, t);
        if ((out.rotation.transpose() * out.rotation - Eigen::Matrix2d::Identity()).norm() > 1e-9 ||
            std::abs(out.rotation.determinant() - 1.0) > 1e-9) {
            throw std::invalid_argument("RigidTransform2D: orthonormalization failed");
        }
        return out;
    }

    double angle() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

    Eigen::Vector2d apply(const Eigen::Vector2d& p) const { return rotation * p + translation; }
};

// compose(a, b) applies b first, then a.
inline RigidTransform2D compose(const RigidTransform2D& a, const RigidTransform2D& b) {
    RigidTransform2D out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    // Products of rotations drift; snap back through the polar factor.
    return RigidTransform2D::from_matrix(out.rotation, out.translation);
}

inline RigidTransform2D invert(const RigidTransform2D& t) {
    RigidTransform2D out;
    out.rotation = t.rotation.transpose();
    out.translation = -(out.rotation * t.translation);
    return out;
}

// Transform mapping agent-frame coordinates into the world frame.
inline RigidTransform2D pose_to_world(const Pose& p) {
    require_planar(p, "pose_to_world");
    return RigidTransform2D::from_angle(p.yaw, Eigen::Vector2d(p.x, p.y));
}

// Maps points expressed in agent j's frame into agent i's frame.
inline RigidTransform2D relative_transform(const Pose& p_i, const Pose& p_j) {
    require_planar(p_i, "relative_transform");
    require_planar(p_j, "relative_transform");
    return compose(invert(pose_to_world(p_i)), pose_to_world(p_j));
}

// Gaussian pose noise. sigma_t is meters on x/y, sigma_r is DEGREES on yaw
// (the 0.4/0.4 convention of the noise tables).
struct PoseNoiseSpec {
    double sigma_t = 0.0;
    double sigma_r = 0.0;
    std::uint64_t seed = 0;

    PoseNoiseSpec() = default;
    PoseNoiseSpec(double t, double r, std::uint64_t s = 0) : sigma_t(t), sigma_r(r), seed(s) {
        if (sigma_t < 0.0 || sigma_r < 0.0) {
            throw std::invalid_argument("PoseNoiseSpec: sigmas must be non-negative");
        }
    }
};

// Draw order is fixed (x, y, yaw) so streams are stable.
inline Pose perturb_pose(const Pose& p, const PoseNoiseSpec& spec, Rng& rng) {
    require_planar(p, "perturb_pose");
    const double dx = rng.normal(0.0, spec.sigma_t);
    const double dy = rng.normal(0.0, spec.sigma_t);
    const double dyaw = rng.normal(0.0, deg2rad(spec.sigma_r));
    return Pose::planar(p.x + dx, p.y + dy, wrap_angle(p.yaw + dyaw));
}

// BEV grid extent and resolution. H and W are derived and must come out as
// exact integers.
struct GridSpec {
    double x_min = -100.0;
    double x_max = 100.0;
    double y_min = -40.0;
    double y_max = 40.0;
    double cell_size = 0.5;
    int H = 160;
    int W = 400;

    static GridSpec make(double x_min, double x_max, double y_min, double y_max, double cell_size) {
        if (!(x_min < x_max) || !(y_min < y_max)) {
            throw std::invalid_argument("GridSpec: extent must satisfy min < max");
        }
        if (!(cell_size > 0.0)) {
            throw std::invalid_argument("GridSpec: cell_size must be positive");
        }
        const double w = (x_max - x_min) / cell_size;
        const double h = (y_max - y_min) / cell_size;
        if (std::abs(w - std::round(w)) > 1e-6 || std::abs(h - std::round(h)) > 1e-6) {
            throw std::invalid_argument("GridSpec: extent is not an integer number of cells");
        }
        GridSpec g;
        g.x_min = x_min;
        g.x_max = x_max;
        g.y_min = y_min;
        g.y_max = y_max;
        g.cell_size = cell_size;
        g.W = static_cast<int>(std::round(w));
        g.H = static_cast<int>(std::round(h));
        return g;
    }

    bool operator==(const GridSpec&) const = default;
};

// Continuous cell coordinates, (col_x, row_y) order. Cell (0,0) center sits at
// (x_min + cell/2, y_min + cell/2); out-of-range inputs pass through for the
// caller to flag.
inline Eigen::Vector2d world_to_grid(const Eigen::Vector2d& p, const GridSpec& g) {
    return {(p.x() - g.x_min) / g.cell_size - 0.5,
            (p.y() - g.y_min) / g.cell_size - 0.5};
}

inline Eigen::Vector2d grid_to_world(const Eigen::Vector2d& c, const GridSpec& g) {
    return {g.x_min + (c.x() + 0.5) * g.cell_size,
            g.y_min + (c.y() + 0.5) * g.cell_size};
}

}  // namespace feakm
