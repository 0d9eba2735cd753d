#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "feakm/eval.hpp"
#include "feakm/rng.hpp"

using namespace feakm;

namespace {

// Monte-Carlo IoU oracle: sample points in the union bounding box and count
// membership. Point-in-rotated-box by transforming into the box frame.
bool inside(const RotatedBox& b, const Eigen::Vector2d& p) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const Eigen::Vector2d d = p - b.center;
    const double lx = c * d.x() + s * d.y();
    const double ly = -s * d.x() + c * d.y();
    return std::abs(lx) <= 0.5 * b.length && std::abs(ly) <= 0.5 * b.width;
}

double mc_iou(const RotatedBox& a, const RotatedBox& b, int samples, Rng& rng) {
    double x0 = 1e30, x1 = -1e30, y0 = 1e30, y1 = -1e30;
    for (const RotatedBox* box : {&a, &b}) {
        for (const Eigen::Vector2d& c : box_corners(*box)) {
            x0 = std::min(x0, c.x());
            x1 = std::max(x1, c.x());
            y0 = std::min(y0, c.y());
            y1 = std::max(y1, c.y());
        }
    }
    long in_both = 0, in_either = 0;
    for (int i = 0; i < samples; ++i) {
        const Eigen::Vector2d p{rng.uniform(x0, x1), rng.uniform(y0, y1)};
        const bool ia = inside(a, p), ib = inside(b, p);
        if (ia && ib) ++in_both;
        if (ia || ib) ++in_either;
    }
    return in_either == 0 ? 0.0 : static_cast<double>(in_both) / static_cast<double>(in_either);
}

}  // namespace

TEST_CASE("iou trivial cases") {
    const RotatedBox a{{0.0, 0.0}, 4.0, 2.0, 0.3};
    CHECK(rotated_iou(a, a) == Catch::Approx(1.0));

    const RotatedBox far{{100.0, 100.0}, 4.0, 2.0, 1.0};
    CHECK(rotated_iou(a, far) == Catch::Approx(0.0));

    // Axis-aligned 2x2 squares offset by (1, 0): intersection 2, union 6.
    const RotatedBox s1{{0.0, 0.0}, 2.0, 2.0, 0.0};
    const RotatedBox s2{{1.0, 0.0}, 2.0, 2.0, 0.0};
    CHECK(rotated_iou(s1, s2) == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("iou is symmetric and matches the axis-aligned formula at yaw 0") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const RotatedBox a{{rng.uniform(-3, 3), rng.uniform(-3, 3)}, rng.uniform(1, 5),
                           rng.uniform(1, 3), 0.0};
        const RotatedBox b{{rng.uniform(-3, 3), rng.uniform(-3, 3)}, rng.uniform(1, 5),
                           rng.uniform(1, 3), 0.0};
        const double iou = rotated_iou(a, b);
        CHECK(iou == Catch::Approx(rotated_iou(b, a)).margin(1e-12));

        const double ix = std::max(0.0, std::min(a.center.x() + a.length / 2, b.center.x() + b.length / 2) -
                                            std::max(a.center.x() - a.length / 2, b.center.x() - b.length / 2));
        const double iy = std::max(0.0, std::min(a.center.y() + a.width / 2, b.center.y() + b.width / 2) -
                                            std::max(a.center.y() - a.width / 2, b.center.y() - b.width / 2));
        const double inter = ix * iy;
        const double expected = inter / (a.length * a.width + b.length * b.width - inter);
        CHECK(iou == Catch::Approx(expected).margin(1e-9));
    }
}

TEST_CASE("iou agrees with a Monte-Carlo sampling oracle on rotated pairs") {
    Rng rng(12);
    for (int i = 0; i < 20; ++i) {
        const RotatedBox a{{rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(2, 5),
                           rng.uniform(1.5, 3), rng.uniform(-M_PI, M_PI)};
        const RotatedBox b{{a.center.x() + rng.uniform(-2, 2), a.center.y() + rng.uniform(-2, 2)},
                           rng.uniform(2, 5), rng.uniform(1.5, 3), rng.uniform(-M_PI, M_PI)};
        const double exact = rotated_iou(a, b);
        const double sampled = mc_iou(a, b, 200000, rng);
        CHECK(exact == Catch::Approx(sampled).margin(6e-3));
    }
}

TEST_CASE("average precision trivial cases") {
    const std::vector<RotatedBox> gts{{{0.0, 0.0}, 4.0, 2.0, 0.0}, {{10.0, 0.0}, 4.0, 2.0, 0.5}};
    DetectionSet exact;
    for (const RotatedBox& g : gts) exact.boxes.push_back({g, 0.9});
    CHECK(average_precision(exact, gts, 0.5) == Catch::Approx(1.0));

    CHECK(average_precision(DetectionSet{}, gts, 0.5) == Catch::Approx(0.0));
    CHECK(average_precision(DetectionSet{}, {}, 0.5) == Catch::Approx(1.0));
    CHECK(average_precision(exact, {}, 0.5) == Catch::Approx(0.0));
}

TEST_CASE("average precision hand-evaluated PR curve") {
    // One gt; a perfect hit at score 0.9 and a far miss at score 0.8.
    // Ranked: hit (precision 1, recall 1) then miss. AP = 1.
    const std::vector<RotatedBox> gts{{{0.0, 0.0}, 4.0, 2.0, 0.0}};
    DetectionSet dets;
    dets.boxes.push_back({gts[0], 0.9});
    dets.boxes.push_back({RotatedBox{{50.0, 0.0}, 4.0, 2.0, 0.0}, 0.8});
    CHECK(average_precision(dets, gts, 0.5) == Catch::Approx(1.0));

    // Swap the scores: miss ranks first, so precision at recall 1 is 1/2.
    DetectionSet swapped;
    swapped.boxes.push_back({gts[0], 0.8});
    swapped.boxes.push_back({RotatedBox{{50.0, 0.0}, 4.0, 2.0, 0.0}, 0.9});
    CHECK(average_precision(swapped, gts, 0.5) == Catch::Approx(0.5));
}

TEST_CASE("average precision is monotone in the IoU threshold") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<RotatedBox> gts;
        DetectionSet dets;
        const int n = 8;
        for (int i = 0; i < n; ++i) {
            const RotatedBox g{{rng.uniform(-40, 40), rng.uniform(-15, 15)}, rng.uniform(3.5, 5.5),
                               rng.uniform(1.6, 2.4), rng.uniform(-M_PI, M_PI)};
            gts.push_back(g);
            RotatedBox noisy = g;
            noisy.center += Eigen::Vector2d{rng.normal(0.0, 0.7), rng.normal(0.0, 0.7)};
            dets.boxes.push_back({noisy, rng.uniform(0.3, 1.0)});
        }
        const double ap50 = average_precision(dets, gts, 0.5);
        const double ap70 = average_precision(dets, gts, 0.7);
        CHECK(ap70 <= ap50 + 1e-12);
    }
}
