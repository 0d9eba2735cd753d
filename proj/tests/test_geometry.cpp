#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "feakm/geometry.hpp"
#include "feakm/rng.hpp"

using namespace feakm;

namespace {

RigidTransform2D random_transform(Rng& rng, double t_max = 5.0, double theta_max = M_PI) {
    return RigidTransform2D::from_angle(
        rng.uniform(-theta_max, theta_max),
        {rng.uniform(-t_max, t_max), rng.uniform(-t_max, t_max)});
}

double transform_distance(const RigidTransform2D& a, const RigidTransform2D& b) {
    return (a.rotation - b.rotation).norm() + (a.translation - b.translation).norm();
}

}  // namespace

TEST_CASE("compose identity and inverse") {
    Rng rng(1);
    const RigidTransform2D t = random_transform(rng);
    CHECK(transform_distance(compose(t, RigidTransform2D::identity()), t) < 1e-12);
    CHECK(transform_distance(compose(RigidTransform2D::identity(), t), t) < 1e-12);
    CHECK(transform_distance(compose(t, invert(t)), RigidTransform2D::identity()) < 1e-12);
}

TEST_CASE("compose adds rotation angles") {
    const RigidTransform2D r30 = RigidTransform2D::from_angle(deg2rad(30.0));
    const RigidTransform2D r60 = RigidTransform2D::from_angle(deg2rad(60.0));
    const RigidTransform2D r90 = compose(r30, r60);
    CHECK(transform_distance(r90, RigidTransform2D::from_angle(deg2rad(90.0))) < 1e-12);
}

TEST_CASE("invert translation and the rot90 example") {
    const RigidTransform2D t = RigidTransform2D::from_angle(0.0, {3.0, 4.0});
    const RigidTransform2D ti = invert(t);
    CHECK(ti.translation.x() == Catch::Approx(-3.0));
    CHECK(ti.translation.y() == Catch::Approx(-4.0));

    const RigidTransform2D r = RigidTransform2D::from_angle(deg2rad(90.0), {1.0, 0.0});
    const RigidTransform2D ri = invert(r);
    CHECK(ri.angle() == Catch::Approx(deg2rad(-90.0)));
    CHECK(ri.translation.x() == Catch::Approx(0.0).margin(1e-12));
    CHECK(ri.translation.y() == Catch::Approx(1.0));
    CHECK(transform_distance(compose(r, ri), RigidTransform2D::identity()) < 1e-12);
}

TEST_CASE("group laws hold on random transforms") {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const RigidTransform2D a = random_transform(rng);
        const RigidTransform2D b = random_transform(rng);
        const RigidTransform2D c = random_transform(rng);
        CHECK(transform_distance(compose(compose(a, b), c), compose(a, compose(b, c))) < 1e-12);
        CHECK(transform_distance(invert(invert(a)), a) < 1e-12);
    }
}

TEST_CASE("constructors reject reflections and renormalize") {
    Eigen::Matrix2d reflection;
    reflection << 1.0, 0.0, 0.0, -1.0;
    CHECK_THROWS_AS(RigidTransform2D::from_matrix(reflection, {0.0, 0.0}), std::invalid_argument);

    Eigen::Matrix2d drifted = RigidTransform2D::from_angle(0.7).rotation;
    drifted *= 1.0 + 1e-7;  // scale drift, still det > 0
    const RigidTransform2D fixed = RigidTransform2D::from_matrix(drifted, {0.0, 0.0});
    CHECK((fixed.rotation.transpose() * fixed.rotation - Eigen::Matrix2d::Identity()).norm() < 1e-12);
    CHECK(fixed.rotation.determinant() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("relative_transform basics") {
    const Pose origin = Pose::planar(0.0, 0.0, 0.0);
    CHECK(transform_distance(relative_transform(origin, origin), RigidTransform2D::identity()) <
          1e-12);

    const Pose ahead = Pose::planar(5.0, 0.0, 0.0);
    const RigidTransform2D t = relative_transform(origin, ahead);
    CHECK(t.translation.x() == Catch::Approx(5.0));
    CHECK(t.translation.y() == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("relative_transform agrees with a world-frame probe round trip") {
    // Oracle: push a probe point from frame j to world with p_j, then into
    // frame i with p_i, and compare against the direct transform.
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const Pose p_i = Pose::planar(rng.uniform(-20, 20), rng.uniform(-20, 20),
                                      rng.uniform(-M_PI, M_PI));
        const Pose p_j = Pose::planar(rng.uniform(-20, 20), rng.uniform(-20, 20),
                                      rng.uniform(-M_PI, M_PI));
        const RigidTransform2D t = relative_transform(p_i, p_j);
        const Eigen::Vector2d probe{rng.uniform(-10, 10), rng.uniform(-10, 10)};

        const double cj = std::cos(p_j.yaw), sj = std::sin(p_j.yaw);
        const Eigen::Vector2d world{p_j.x + cj * probe.x() - sj * probe.y(),
                                    p_j.y + sj * probe.x() + cj * probe.y()};
        const double ci = std::cos(p_i.yaw), si = std::sin(p_i.yaw);
        const Eigen::Vector2d rel{world.x() - p_i.x, world.y() - p_i.y};
        const Eigen::Vector2d expected{ci * rel.x() + si * rel.y(),
                                       -si * rel.x() + ci * rel.y()};
        CHECK((t.apply(probe) - expected).norm() < 1e-9);
    }
}

TEST_CASE("relative_transform of swapped poses is the inverse") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const Pose p_i = Pose::planar(rng.uniform(-30, 30), rng.uniform(-30, 30),
                                      rng.uniform(-M_PI, M_PI));
        const Pose p_j = Pose::planar(rng.uniform(-30, 30), rng.uniform(-30, 30),
                                      rng.uniform(-M_PI, M_PI));
        CHECK(transform_distance(relative_transform(p_i, p_j),
                                 invert(relative_transform(p_j, p_i))) < 1e-12);
    }
}

TEST_CASE("the rot90 frame example transforms a probe both ways") {
    const Pose p_i = Pose::planar(0.0, 0.0, deg2rad(90.0));
    const Pose p_j = Pose::planar(5.0, 0.0, 0.0);
    const RigidTransform2D t = relative_transform(p_i, p_j);
    CHECK(t.angle() == Catch::Approx(deg2rad(-90.0)));
    const Eigen::Vector2d mapped = t.apply(Eigen::Vector2d::Zero());
    CHECK(mapped.x() == Catch::Approx(0.0).margin(1e-12));
    CHECK(mapped.y() == Catch::Approx(-5.0));
}

TEST_CASE("perturb_pose with zero sigma is the identity") {
    Rng rng(5);
    const Pose p = Pose::planar(1.0, -2.0, 0.3);
    const Pose q = perturb_pose(p, PoseNoiseSpec(0.0, 0.0), rng);
    CHECK(q.x == p.x);
    CHECK(q.y == p.y);
    CHECK(q.yaw == p.yaw);
}

TEST_CASE("perturb_pose Monte-Carlo statistics") {
    const int n = 100000;
    Rng rng(6);
    const PoseNoiseSpec spec(1.0, 2.0);
    const Pose origin = Pose::planar(0.0, 0.0, 0.0);
    double sum_x = 0.0, sum_y = 0.0, sum_yaw2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const Pose q = perturb_pose(origin, spec, rng);
        sum_x += q.x;
        sum_y += q.y;
        sum_yaw2 += q.yaw * q.yaw;
    }
    // 3 sigma / sqrt(n) band for the mean at sigma_t = 1.
    CHECK(std::abs(sum_x / n) < 0.02);
    CHECK(std::abs(sum_y / n) < 0.02);
    const double yaw_std_deg = rad2deg(std::sqrt(sum_yaw2 / n));
    CHECK(yaw_std_deg == Catch::Approx(2.0).epsilon(0.02));
}

TEST_CASE("perturb_pose is reproducible for a fixed seed") {
    const Pose p = Pose::planar(3.0, 1.0, -0.4);
    const PoseNoiseSpec spec(0.7, 1.3);
    Rng rng_a(99), rng_b(99);
    const Pose a = perturb_pose(p, spec, rng_a);
    const Pose b = perturb_pose(p, spec, rng_b);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.yaw == b.yaw);
}

TEST_CASE("planar preconditions are enforced") {
    Pose tilted = Pose::planar(0, 0, 0);
    tilted.pitch = 0.1;
    CHECK_THROWS_AS(relative_transform(tilted, Pose::planar(0, 0, 0)), std::invalid_argument);
}

TEST_CASE("grid spec validation and derived dims") {
    const GridSpec g = GridSpec::make(-100.0, 100.0, -40.0, 40.0, 0.5);
    CHECK(g.W == 400);
    CHECK(g.H == 160);
    CHECK_THROWS_AS(GridSpec::make(-100.0, 100.0, -40.0, 40.0, 0.3), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec::make(100.0, -100.0, -40.0, 40.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec::make(-100.0, 100.0, -40.0, 40.0, 0.0), std::invalid_argument);
}

TEST_CASE("world/grid conversions") {
    const GridSpec g = GridSpec::make(-100.0, 100.0, -40.0, 40.0, 0.8);
    // Corner convention
    const Eigen::Vector2d corner = world_to_grid({-100.0, -40.0}, g);
    CHECK(corner.x() == Catch::Approx(-0.5));
    CHECK(corner.y() == Catch::Approx(-0.5));
    // Arithmetic check: (0 - (-100)) / 0.8 - 0.5
    CHECK(world_to_grid({0.0, 0.0}, g).x() == Catch::Approx(124.5));
    // Cell (0,0) center
    const Eigen::Vector2d c00 = grid_to_world({0.0, 0.0}, g);
    CHECK(c00.x() == Catch::Approx(-100.0 + 0.4));
    CHECK(c00.y() == Catch::Approx(-40.0 + 0.4));

    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector2d p{rng.uniform(-150, 150), rng.uniform(-60, 60)};
        CHECK((grid_to_world(world_to_grid(p, g), g) - p).norm() < 1e-12);
    }
}

TEST_CASE("angle wrapping lands in (-pi, pi]") {
    CHECK(wrap_angle(M_PI) == Catch::Approx(M_PI));
    CHECK(wrap_angle(-M_PI) == Catch::Approx(M_PI));
    CHECK(wrap_angle(3.0 * M_PI) == Catch::Approx(M_PI));
    CHECK(wrap_angle(0.1) == Catch::Approx(0.1));
    const Pose p(0, 0, 0, 5.0 * M_PI / 2.0, 0, 0);
    CHECK(p.yaw == Catch::Approx(M_PI / 2.0));
}
