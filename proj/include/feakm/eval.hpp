#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace feakm {

// Oriented BEV rectangle: center (meters), full extents, yaw.
struct RotatedBox {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    double length = 1.0;
    double width = 1.0;
    double yaw = 0.0;
};

inline std::array<Eigen::Vector2d, 4> box_corners(const RotatedBox& b) {
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const double hl = 0.5 * b.length, hw = 0.5 * b.width;
    std::array<Eigen::Vector2d, 4> out;
    const double lx[4] = {hl, -hl, -hl, hl};
    const double wy[4] = {hw, hw, -hw, -hw};
    for (int k = 0; k < 4; ++k) {
        out[k] = {b.center.x() + c * lx[k] - s * wy[k],
                  b.center.y() + s * lx[k] + c * wy[k]};
    }
    return out;  // counter-clockwise
}

// Signed area via the shoelace formula; positive for counter-clockwise rings.
inline double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
    if (poly.size() < 3) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % n];
        acc += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * std::abs(acc);
}

// Sutherland-Hodgman clipping of a convex subject polygon against a convex
// clip polygon (both counter-clockwise).
inline std::vector<Eigen::Vector2d> clip_convex(std::vector<Eigen::Vector2d> subject,
                                                const std::vector<Eigen::Vector2d>& clip) {
    auto inside = [](const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x()) >= 0.0;
    };
    auto intersect = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q,
                        const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        const Eigen::Vector2d r = q - p, s = b - a;
        const double denom = r.x() * s.y() - r.y() * s.x();
        const double t = ((a.x() - p.x()) * s.y() - (a.y() - p.y()) * s.x()) / denom;
        return Eigen::Vector2d(p + t * r);
    };
    for (std::size_t e = 0, n = clip.size(); e < n && !subject.empty(); ++e) {
        const Eigen::Vector2d& a = clip[e];
        const Eigen::Vector2d& b = clip[(e + 1) % n];
        std::vector<Eigen::Vector2d> out;
        out.reserve(subject.size() + 1);
        for (std::size_t i = 0, m = subject.size(); i < m; ++i) {
            const Eigen::Vector2d& cur = subject[i];
            const Eigen::Vector2d& nxt = subject[(i + 1) % m];
            const bool cur_in = inside(cur, a, b);
            const bool nxt_in = inside(nxt, a, b);
            if (cur_in) out.push_back(cur);
            if (cur_in != nxt_in) out.push_back(intersect(cur, nxt, a, b));
        }
        subject = std::move(out);
    }
    return subject;
}

inline double rotated_iou(const RotatedBox& a, const RotatedBox& b) {
    if (a.length <= 0.0 || a.width <= 0.0 || b.length <= 0.0 || b.width <= 0.0) {
        throw std::invalid_argument("rotated_iou: box sizes must be positive");
    }
    const auto ca = box_corners(a);
    const auto cb = box_corners(b);
    const std::vector<Eigen::Vector2d> pa(ca.begin(), ca.end());
    const std::vector<Eigen::Vector2d> pb(cb.begin(), cb.end());
    const double inter = polygon_area(clip_convex(pa, pb));
    const double area_a = a.length * a.width;
    const double area_b = b.length * b.width;
    const double uni = area_a + area_b - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

struct Detection {
    RotatedBox box;
    double score = 0.0;
};

// Rotated boxes with scores, in the owning agent's frame.
struct DetectionSet {
    std::vector<Detection> boxes;
};

// Average precision with greedy score-ordered matching and all-point
// interpolation (exact area under the precision-recall staircase).
// No ground truths: 1.0 if there are no detections either, otherwise 0.0.
inline double average_precision(const DetectionSet& dets,
                                const std::vector<RotatedBox>& gts,
                                double iou_threshold) {
    if (gts.empty()) return dets.boxes.empty() ? 1.0 : 0.0;
    std::vector<std::size_t> order(dets.boxes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return dets.boxes[i].score > dets.boxes[j].score;
    });

    std::vector<bool> gt_used(gts.size(), false);
    std::vector<int> tp(order.size(), 0);
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Detection& d = dets.boxes[order[k]];
        double best_iou = 0.0;
        int best_gt = -1;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_used[g]) continue;
            const double iou = rotated_iou(d.box, gts[g]);
            if (iou >= iou_threshold && iou > best_iou) {
                best_iou = iou;
                best_gt = static_cast<int>(g);
            }
        }
        if (best_gt >= 0) {
            gt_used[best_gt] = true;
            tp[k] = 1;
        }
    }

    const double n_gt = static_cast<double>(gts.size());
    std::vector<double> precision(order.size()), recall(order.size());
    int cum_tp = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        cum_tp += tp[k];
        precision[k] = static_cast<double>(cum_tp) / static_cast<double>(k + 1);
        recall[k] = static_cast<double>(cum_tp) / n_gt;
    }
    // Monotone envelope from the right, then sum rectangle areas.
    for (int k = static_cast<int>(order.size()) - 2; k >= 0; --k) {
        precision[k] = std::max(precision[k], precision[k + 1]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (recall[k] > prev_recall) {
            ap += (recall[k] - prev_recall) * precision[k];
            prev_recall = recall[k];
        }
    }
    return ap;
}

}  // namespace feakm
