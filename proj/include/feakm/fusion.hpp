#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "feakm/geometry.hpp"
#include "feakm/grid.hpp"

namespace feakm {

// Pull-warp of a source grid into the ego frame: each ego cell samples the
// source at the inverse-transformed location with bilinear interpolation;
// locations outside the source extent contribute zero.
inline FeatureGrid project_grid(const FeatureGrid& f_j, const RigidTransform2D& t,
                                const GridSpec& ego_spec) {
    FeatureGrid out(ego_spec, f_j.channels);
    const RigidTransform2D inv = invert(t);
    const int d = f_j.channels;
    for (int row = 0; row < ego_spec.H; ++row) {
        for (int col = 0; col < ego_spec.W; ++col) {
            const Eigen::Vector2d ego_pt = grid_to_world(Eigen::Vector2d(col, row), ego_spec);
            const Eigen::Vector2d src_cell = world_to_grid(inv.apply(ego_pt), f_j.spec);
            const double x = src_cell.x(), y = src_cell.y();
            const int x0 = static_cast<int>(std::floor(x));
            const int y0 = static_cast<int>(std::floor(y));
            const double fx = x - x0, fy = y - y0;
            const double w00 = (1.0 - fx) * (1.0 - fy);
            const double w01 = fx * (1.0 - fy);
            const double w10 = (1.0 - fx) * fy;
            const double w11 = fx * fy;
            float* dst = out.cell(row, col);
            auto add = [&](int r, int c, double w) {
                if (w <= 0.0 || !f_j.in_bounds(r, c)) return;
                const float* src = f_j.cell(r, c);
                const float wf = static_cast<float>(w);
                for (int ch = 0; ch < d; ++ch) dst[ch] += wf * src[ch];
            };
            add(y0, x0, w00);
            add(y0, x0 + 1, w01);
            add(y0 + 1, x0, w10);
            add(y0 + 1, x0 + 1, w11);
        }
    }
    return out;
}

namespace detail {

// Exact average pooling; caller guarantees divisibility.
inline FeatureGrid avg_pool(const FeatureGrid& f, int factor) {
    if (factor == 1) return f;
    GridSpec spec = GridSpec::make(f.spec.x_min, f.spec.x_max, f.spec.y_min, f.spec.y_max,
                                   f.spec.cell_size * factor);
    FeatureGrid out(spec, f.channels);
    const float inv = 1.0f / static_cast<float>(factor * factor);
    for (int row = 0; row < spec.H; ++row) {
        for (int col = 0; col < spec.W; ++col) {
            float* dst = out.cell(row, col);
            for (int rr = row * factor; rr < (row + 1) * factor; ++rr) {
                for (int cc = col * factor; cc < (col + 1) * factor; ++cc) {
                    const float* src = f.cell(rr, cc);
                    for (int ch = 0; ch < f.channels; ++ch) dst[ch] += src[ch];
                }
            }
            for (int ch = 0; ch < f.channels; ++ch) dst[ch] *= inv;
        }
    }
    return out;
}

// Bilinear upsample back to the full resolution, border-clamped. Coarse cell
// centers sit at fine coordinate i*factor + (factor-1)/2.
inline FeatureGrid upsample_bilinear(const FeatureGrid& f, const GridSpec& fine_spec, int factor) {
    if (factor == 1) return f;
    FeatureGrid out(fine_spec, f.channels);
    const double offset = (factor - 1) / 2.0;
    for (int row = 0; row < fine_spec.H; ++row) {
        const double cy = (row - offset) / factor;
        const int y0 = static_cast<int>(std::floor(cy));
        const double fy = cy - y0;
        const int y0c = std::clamp(y0, 0, f.spec.H - 1);
        const int y1c = std::clamp(y0 + 1, 0, f.spec.H - 1);
        for (int col = 0; col < fine_spec.W; ++col) {
            const double cx = (col - offset) / factor;
            const int x0 = static_cast<int>(std::floor(cx));
            const double fx = cx - x0;
            const int x0c = std::clamp(x0, 0, f.spec.W - 1);
            const int x1c = std::clamp(x0 + 1, 0, f.spec.W - 1);
            const float* s00 = f.cell(y0c, x0c);
            const float* s01 = f.cell(y0c, x1c);
            const float* s10 = f.cell(y1c, x0c);
            const float* s11 = f.cell(y1c, x1c);
            const float w00 = static_cast<float>((1.0 - fx) * (1.0 - fy));
            const float w01 = static_cast<float>(fx * (1.0 - fy));
            const float w10 = static_cast<float>((1.0 - fx) * fy);
            const float w11 = static_cast<float>(fx * fy);
            float* dst = out.cell(row, col);
            for (int ch = 0; ch < f.channels; ++ch) {
                dst[ch] = w00 * s00[ch] + w01 * s01[ch] + w10 * s10[ch] + w11 * s11[ch];
            }
        }
    }
    return out;
}

}  // namespace detail

enum class LevelCombine { Mean, Concat };

struct FusionParams {
    int levels = 3;
    LevelCombine combine = LevelCombine::Mean;
};

struct FusedFeature {
    FeatureGrid grid;
    std::vector<int> contributing_agents;
    int levels_used = 1;
};

// Multiscale fusion: per level, average-pool all inputs by 2^(l-1), take the
// element-wise max across agents, upsample back, then combine levels by a
// channel-preserving mean (or channel concatenation in Concat mode).
inline FusedFeature multiscale_fuse(const FeatureGrid& ego, const std::vector<FeatureGrid>& warped,
                                    const FusionParams& params,
                                    std::vector<int> contributing_agents = {}) {
    if (params.levels < 1) throw std::invalid_argument("multiscale_fuse: levels must be >= 1");
    for (const FeatureGrid& w : warped) {
        if (!(w.spec == ego.spec) || w.channels != ego.channels) {
            throw std::invalid_argument("multiscale_fuse: input grid dims/channels mismatch");
        }
    }
    for (int l = 1; l <= params.levels; ++l) {
        const int factor = 1 << (l - 1);
        if (ego.spec.H % factor != 0 || ego.spec.W % factor != 0) {
            throw std::invalid_argument("multiscale_fuse: level " + std::to_string(l) +
                                        " needs dims divisible by " + std::to_string(factor) +
                                        ", got " + std::to_string(ego.spec.W) + "x" +
                                        std::to_string(ego.spec.H));
        }
    }

    std::vector<FeatureGrid> level_fused;
    for (int l = 1; l <= params.levels; ++l) {
        const int factor = 1 << (l - 1);
        FeatureGrid fused = detail::avg_pool(ego, factor);
        for (const FeatureGrid& w : warped) {
            const FeatureGrid pooled = detail::avg_pool(w, factor);
            for (std::size_t i = 0; i < fused.data.size(); ++i) {
                fused.data[i] = std::max(fused.data[i], pooled.data[i]);
            }
        }
        level_fused.push_back(detail::upsample_bilinear(fused, ego.spec, factor));
    }

    FusedFeature out;
    out.levels_used = params.levels;
    out.contributing_agents = std::move(contributing_agents);
    if (params.combine == LevelCombine::Mean) {
        out.grid = std::move(level_fused[0]);
        for (std::size_t l = 1; l < level_fused.size(); ++l) {
            for (std::size_t i = 0; i < out.grid.data.size(); ++i) {
                out.grid.data[i] += level_fused[l].data[i];
            }
        }
        const float inv = 1.0f / static_cast<float>(params.levels);
        for (float& v : out.grid.data) v *= inv;
    } else {
        out.grid = FeatureGrid(ego.spec, ego.channels * params.levels);
        for (int row = 0; row < ego.spec.H; ++row) {
            for (int col = 0; col < ego.spec.W; ++col) {
                float* dst = out.grid.cell(row, col);
                for (int l = 0; l < params.levels; ++l) {
                    const float* src = level_fused[static_cast<std::size_t>(l)].cell(row, col);
                    std::copy(src, src + ego.channels, dst + l * ego.channels);
                }
            }
        }
    }
    return out;
}

}  // namespace feakm
