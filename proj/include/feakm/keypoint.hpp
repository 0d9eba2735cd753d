#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "feakm/grid.hpp"

namespace feakm {

struct ScoredPeak {
    Eigen::Vector2d coord;  // (col_x, row_y), cells
    double score = 0.0;
};

struct KeypointParams {
    double delta = 0.3;   // confidence threshold
    int max_points = 128;
    int nms_radius = 2;   // cells, Chebyshev
    int coarse_factor = 4;
};

// Cells with confidence strictly above delta, greedily NMS-suppressed within
// a Chebyshev radius, in (score desc, row, col) order, truncated to max_points.
inline std::vector<ScoredPeak> extract_keypoints(const ConfidenceMap& c, double delta,
                                                 int max_points, int nms_radius) {
    if (delta < 0.0 || delta > 1.0) {
        throw std::invalid_argument("extract_keypoints: delta must be in [0, 1]");
    }
    struct Candidate {
        float score;
        int row;
        int col;
    };
    std::vector<Candidate> candidates;
    for (int row = 0; row < c.spec.H; ++row) {
        for (int col = 0; col < c.spec.W; ++col) {
            const float v = c.at(row, col);
            if (v > delta) candidates.push_back({v, row, col});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.row != b.row) return a.row < b.row;
        return a.col < b.col;
    });

    std::vector<std::uint8_t> suppressed(static_cast<std::size_t>(c.spec.H) * c.spec.W, 0);
    std::vector<ScoredPeak> out;
    for (const Candidate& cand : candidates) {
        if (static_cast<int>(out.size()) >= max_points) break;
        if (suppressed[static_cast<std::size_t>(cand.row) * c.spec.W + cand.col]) continue;
        out.push_back({Eigen::Vector2d(cand.col, cand.row), cand.score});
        const int r0 = std::max(0, cand.row - nms_radius);
        const int r1 = std::min(c.spec.H - 1, cand.row + nms_radius);
        const int c0 = std::max(0, cand.col - nms_radius);
        const int c1 = std::min(c.spec.W - 1, cand.col + nms_radius);
        for (int row = r0; row <= r1; ++row) {
            std::fill(suppressed.begin() + static_cast<std::size_t>(row) * c.spec.W + c0,
                      suppressed.begin() + static_cast<std::size_t>(row) * c.spec.W + c1 + 1,
                      std::uint8_t{1});
        }
    }
    return out;
}

// Feature grid average-pooled by an integer factor per axis (partial blocks at
// the far edges average over the cells that exist).
struct PooledGrid {
    int H = 0;
    int W = 0;
    int channels = 0;
    std::vector<float> data;

    const float* cell(int row, int col) const {
        return data.data() + (static_cast<std::size_t>(row) * W + col) * channels;
    }
};

inline PooledGrid pool_average(const FeatureGrid& f, int factor) {
    if (factor < 1) throw std::invalid_argument("pool_average: factor must be >= 1");
    PooledGrid out;
    out.H = (f.spec.H + factor - 1) / factor;
    out.W = (f.spec.W + factor - 1) / factor;
    out.channels = f.channels;
    out.data.assign(static_cast<std::size_t>(out.H) * out.W * out.channels, 0.0f);
    for (int pr = 0; pr < out.H; ++pr) {
        const int r0 = pr * factor;
        const int r1 = std::min(f.spec.H, r0 + factor);
        for (int pc = 0; pc < out.W; ++pc) {
            const int c0 = pc * factor;
            const int c1 = std::min(f.spec.W, c0 + factor);
            float* dst = out.data.data() + (static_cast<std::size_t>(pr) * out.W + pc) * out.channels;
            for (int row = r0; row < r1; ++row) {
                for (int col = c0; col < c1; ++col) {
                    const float* src = f.cell(row, col);
                    for (int ch = 0; ch < out.channels; ++ch) dst[ch] += src[ch];
                }
            }
            const float inv = 1.0f / static_cast<float>((r1 - r0) * (c1 - c0));
            for (int ch = 0; ch < out.channels; ++ch) dst[ch] *= inv;
        }
    }
    return out;
}

// Catmull-Rom weights (a = -0.5) for the four nodes around t in [0, 1).
inline void catmull_rom_weights(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
    w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
    w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
    w[3] = 0.5 * (t3 - t2);
}

// Bicubic tensor-product sample of the pooled grid at continuous pooled-cell
// coordinates, border nodes clamped. Accumulates in double.
inline void catmull_rom_sample(const PooledGrid& g, double x, double y, double* out) {
    const int ix = static_cast<int>(std::floor(x));
    const int iy = static_cast<int>(std::floor(y));
    double wx[4], wy[4];
    catmull_rom_weights(x - ix, wx);
    catmull_rom_weights(y - iy, wy);
    for (int ch = 0; ch < g.channels; ++ch) out[ch] = 0.0;
    for (int j = 0; j < 4; ++j) {
        const int row = std::clamp(iy - 1 + j, 0, g.H - 1);
        for (int i = 0; i < 4; ++i) {
            const int col = std::clamp(ix - 1 + i, 0, g.W - 1);
            const double w = wy[j] * wx[i];
            const float* src = g.cell(row, col);
            for (int ch = 0; ch < g.channels; ++ch) out[ch] += w * src[ch];
        }
    }
}

struct DescriptorResult {
    Eigen::MatrixXf descriptors;          // N x D, rows unit norm unless degenerate
    std::vector<std::uint8_t> degenerate;  // rows that interpolated to ~zero
};

// Semi-dense descriptors: average-pool the feature grid by coarse_factor,
// bicubic-interpolate the pooled grid at coord / coarse_factor, L2-normalize.
inline DescriptorResult compute_descriptors(const FeatureGrid& f,
                                            const std::vector<Eigen::Vector2d>& coords,
                                            int coarse_factor) {
    for (const Eigen::Vector2d& c : coords) {
        if (c.x() < -0.5 || c.x() > f.spec.W - 0.5 || c.y() < -0.5 || c.y() > f.spec.H - 0.5) {
            throw std::out_of_range("compute_descriptors: coordinate (" + std::to_string(c.x()) +
                                    ", " + std::to_string(c.y()) + ") outside grid bounds");
        }
    }
    const PooledGrid pooled = pool_average(f, coarse_factor);
    DescriptorResult result;
    result.descriptors.resize(static_cast<Eigen::Index>(coords.size()), f.channels);
    result.degenerate.assign(coords.size(), 0);
    std::vector<double> buf(f.channels);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        catmull_rom_sample(pooled, coords[i].x() / coarse_factor, coords[i].y() / coarse_factor,
                           buf.data());
        double norm2 = 0.0;
        for (double v : buf) norm2 += v * v;
        const double norm = std::sqrt(norm2);
        if (norm < 1e-12) {
            result.degenerate[i] = 1;
            result.descriptors.row(static_cast<Eigen::Index>(i)).setZero();
        } else {
            for (int ch = 0; ch < f.channels; ++ch) {
                result.descriptors(static_cast<Eigen::Index>(i), ch) =
                    static_cast<float>(buf[ch] / norm);
            }
        }
    }
    return result;
}

// Keypoint coordinates stay in the sender's grid cells; the receiver converts
// after transform estimation.
struct KeypointSet {
    std::vector<Eigen::Vector2d> coords;  // (col_x, row_y) cells
    Eigen::MatrixXf descriptors;          // N x D, unit rows
    std::vector<double> scores;

    std::size_t size() const { return coords.size(); }
};

// Full local detecting stage: extract peaks from the confidence map, compute
// descriptors from the feature grid, drop degenerate rows.
inline KeypointSet build_keypoint_set(const FeatureGrid& f, const ConfidenceMap& c,
                                      const KeypointParams& params) {
    const std::vector<ScoredPeak> peaks =
        extract_keypoints(c, params.delta, params.max_points, params.nms_radius);
    std::vector<Eigen::Vector2d> coords;
    coords.reserve(peaks.size());
    for (const ScoredPeak& p : peaks) coords.push_back(p.coord);
    const DescriptorResult desc = compute_descriptors(f, coords, params.coarse_factor);

    KeypointSet out;
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        if (!desc.degenerate[i]) keep.push_back(static_cast<Eigen::Index>(i));
    }
    out.descriptors.resize(static_cast<Eigen::Index>(keep.size()), f.channels);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        out.coords.push_back(peaks[keep[k]].coord);
        out.scores.push_back(peaks[keep[k]].score);
        out.descriptors.row(static_cast<Eigen::Index>(k)) = desc.descriptors.row(keep[k]);
    }
    return out;
}

}  // namespace feakm
