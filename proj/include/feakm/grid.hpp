#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "feakm/geometry.hpp"

namespace feakm {

// Dense H x W x D feature map, row-major (row, col, channel). Values are
// non-negative by construction everywhere in this library.
struct FeatureGrid {
    GridSpec spec;
    int channels = 0;
    std::vector<float> data;  // size H * W * channels

    FeatureGrid() = default;
    FeatureGrid(const GridSpec& s, int d)
        : spec(s), channels(d),
          data(static_cast<std::size_t>(s.H) * s.W * d, 0.0f) {
        if (d <= 0) throw std::invalid_argument("FeatureGrid: channels must be positive");
    }

    std::size_t index(int row, int col, int ch) const {
        return (static_cast<std::size_t>(row) * spec.W + col) * channels + ch;
    }
    float* cell(int row, int col) { return data.data() + index(row, col, 0); }
    const float* cell(int row, int col) const { return data.data() + index(row, col, 0); }

    bool in_bounds(int row, int col) const {
        return row >= 0 && row < spec.H && col >= 0 && col < spec.W;
    }
};

// Per-cell objectness in [0, 1].
struct ConfidenceMap {
    GridSpec spec;
    std::vector<float> data;  // size H * W, row-major

    ConfidenceMap() = default;
    explicit ConfidenceMap(const GridSpec& s)
        : spec(s), data(static_cast<std::size_t>(s.H) * s.W, 0.0f) {}

    float& at(int row, int col) { return data[static_cast<std::size_t>(row) * spec.W + col]; }
    float at(int row, int col) const { return data[static_cast<std::size_t>(row) * spec.W + col]; }
};

// L2 norm across channels per cell. This is the raw "objectness" field the
// confidence map is normalized from.
inline std::vector<float> channel_norm(const FeatureGrid& f) {
    std::vector<float> out(static_cast<std::size_t>(f.spec.H) * f.spec.W, 0.0f);
    const int d = f.channels;
    for (std::size_t c = 0; c < out.size(); ++c) {
        const float* p = f.data.data() + c * d;
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += static_cast<double>(p[k]) * p[k];
        out[c] = static_cast<float>(std::sqrt(acc));
    }
    return out;
}

}  // namespace feakm
