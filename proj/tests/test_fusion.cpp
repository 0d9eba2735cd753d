#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "feakm/fusion.hpp"
#include "feakm/rng.hpp"

using namespace feakm;

namespace {

GridSpec spec_small() { return GridSpec::make(-16.0, 16.0, -8.0, 8.0, 0.5); }  // 64 x 32

FeatureGrid random_grid(const GridSpec& spec, int channels, Rng& rng) {
    FeatureGrid f(spec, channels);
    for (float& v : f.data) v = static_cast<float>(rng.uniform());
    return f;
}

// Smooth test field: a few Gaussian bumps, bounded curvature so interpolation
// error behaves.
FeatureGrid smooth_grid(const GridSpec& spec, int channels, Rng& rng) {
    FeatureGrid f(spec, channels);
    const int bumps = 24;
    std::vector<Eigen::Vector2d> centers;
    std::vector<double> sigmas, amps;
    for (int b = 0; b < bumps; ++b) {
        centers.push_back({rng.uniform(0, spec.W - 1.0), rng.uniform(0, spec.H - 1.0)});
        sigmas.push_back(rng.uniform(3.0, 8.0));
        amps.push_back(rng.uniform(0.2, 1.0));
    }
    for (int row = 0; row < spec.H; ++row) {
        for (int col = 0; col < spec.W; ++col) {
            double acc = 0.0;
            for (int b = 0; b < bumps; ++b) {
                const double dx = col - centers[b].x();
                const double dy = row - centers[b].y();
                acc += amps[b] * std::exp(-(dx * dx + dy * dy) / (2.0 * sigmas[b] * sigmas[b]));
            }
            for (int ch = 0; ch < channels; ++ch) {
                f.cell(row, col)[ch] = static_cast<float>(acc * (1.0 + 0.1 * ch));
            }
        }
    }
    return f;
}

double max_abs_diff_interior(const FeatureGrid& a, const FeatureGrid& b, int margin) {
    double worst = 0.0;
    for (int row = margin; row < a.spec.H - margin; ++row) {
        for (int col = margin; col < a.spec.W - margin; ++col) {
            for (int ch = 0; ch < a.channels; ++ch) {
                worst = std::max(worst,
                                 std::abs(static_cast<double>(a.cell(row, col)[ch]) -
                                          b.cell(row, col)[ch]));
            }
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("identity projection reproduces the input exactly") {
    Rng rng(81);
    const FeatureGrid f = random_grid(spec_small(), 3, rng);
    const FeatureGrid out = project_grid(f, RigidTransform2D::identity(), f.spec);
    CHECK(max_abs_diff_interior(out, f, 0) == 0.0);
}

TEST_CASE("integer translation shifts cells and zero-fills the border") {
    Rng rng(82);
    const GridSpec spec = spec_small();
    const FeatureGrid f = random_grid(spec, 2, rng);
    // +3 cells in x: transform moves source points by +1.5 m.
    const RigidTransform2D t = RigidTransform2D::from_angle(0.0, {3 * spec.cell_size, 0.0});
    const FeatureGrid out = project_grid(f, t, spec);
    for (int row = 0; row < spec.H; ++row) {
        for (int col = 0; col < spec.W; ++col) {
            for (int ch = 0; ch < 2; ++ch) {
                const float expected = col >= 3 ? f.cell(row, col - 3)[ch] : 0.0f;
                CHECK(out.cell(row, col)[ch] == expected);
            }
        }
    }
}

TEST_CASE("projection is exact on affine fields under rotation") {
    // Bilinear interpolation reproduces affine functions exactly, so a warp of
    // an affine field must equal the affine composition wherever all four
    // sample nodes are in bounds. Sharp check of the coordinate conventions.
    const GridSpec spec = spec_small();
    FeatureGrid f(spec, 1);
    const double a = 0.7, bx = 0.31, by = -0.13;
    for (int row = 0; row < spec.H; ++row) {
        for (int col = 0; col < spec.W; ++col) {
            const Eigen::Vector2d w = grid_to_world(Eigen::Vector2d(col, row), spec);
            f.cell(row, col)[0] = static_cast<float>(a + bx * w.x() + by * w.y());
        }
    }
    const RigidTransform2D t = RigidTransform2D::from_angle(0.35, {1.2, -0.7});
    const RigidTransform2D inv = invert(t);
    const FeatureGrid out = project_grid(f, t, spec);
    for (int row = 4; row < spec.H - 4; ++row) {
        for (int col = 4; col < spec.W - 4; ++col) {
            const Eigen::Vector2d src = inv.apply(grid_to_world(Eigen::Vector2d(col, row), spec));
            const Eigen::Vector2d cell = world_to_grid(src, spec);
            if (cell.x() < 1 || cell.x() > spec.W - 2 || cell.y() < 1 || cell.y() > spec.H - 2) {
                continue;  // touches the zero border
            }
            const double expected = a + bx * src.x() + by * src.y();
            CHECK(out.cell(row, col)[0] == Catch::Approx(expected).margin(1e-5));
        }
    }
}

TEST_CASE("round-trip warp error is within the supersampled interpolation bound") {
    Rng rng(83);
    const GridSpec spec = spec_small();
    const FeatureGrid f = smooth_grid(spec, 2, rng);
    // Small enough that interior content never crosses the zero border on
    // either hop; 8-cell margin covers both displacements.
    const RigidTransform2D t = RigidTransform2D::from_angle(0.04, {0.6, -0.4});

    // Coarse route: warp at native resolution, warp back.
    const FeatureGrid coarse_round = project_grid(project_grid(f, t, spec), invert(t), spec);
    const double coarse_err = max_abs_diff_interior(coarse_round, f, 8);

    // Oracle route: same warp through a 10x supersampled intermediate grid.
    const GridSpec fine = GridSpec::make(spec.x_min, spec.x_max, spec.y_min, spec.y_max,
                                         spec.cell_size / 10.0);
    const FeatureGrid fine_round = project_grid(project_grid(f, t, fine), invert(t), spec);
    const double fine_err = max_abs_diff_interior(fine_round, f, 8);

    CHECK(fine_err > 0.0);
    // First-hop interpolation error scales with the intermediate cell size
    // squared (100x here); 300x leaves headroom for the shared second hop.
    CHECK(coarse_err <= 300.0 * fine_err);
    CHECK(coarse_err < 0.05);
}

TEST_CASE("L=1 fusion with no collaborators is the identity") {
    Rng rng(84);
    const FeatureGrid ego = random_grid(spec_small(), 3, rng);
    FusionParams params;
    params.levels = 1;
    const FusedFeature out = multiscale_fuse(ego, {}, params);
    CHECK(max_abs_diff_interior(out.grid, ego, 0) == 0.0);
    CHECK(out.levels_used == 1);
}

TEST_CASE("fusing identical inputs equals fusing nothing") {
    Rng rng(85);
    const FeatureGrid ego = random_grid(spec_small(), 3, rng);
    FusionParams params;
    params.levels = 3;
    const FusedFeature with_dup = multiscale_fuse(ego, {ego, ego}, params);
    const FusedFeature alone = multiscale_fuse(ego, {}, params);
    CHECK(max_abs_diff_interior(with_dup.grid, alone.grid, 0) == 0.0);
}

TEST_CASE("zero ego with one warped grid at L=1 returns the warped grid") {
    Rng rng(86);
    const GridSpec spec = spec_small();
    const FeatureGrid zero(spec, 2);
    const FeatureGrid other = random_grid(spec, 2, rng);
    FusionParams params;
    params.levels = 1;
    const FusedFeature out = multiscale_fuse(zero, {other}, params);
    CHECK(max_abs_diff_interior(out.grid, other, 0) == 0.0);
}

TEST_CASE("fusion is invariant to collaborator order") {
    Rng rng(87);
    const GridSpec spec = spec_small();
    const FeatureGrid ego = random_grid(spec, 3, rng);
    const FeatureGrid w1 = random_grid(spec, 3, rng);
    const FeatureGrid w2 = random_grid(spec, 3, rng);
    const FeatureGrid w3 = random_grid(spec, 3, rng);
    FusionParams params;
    params.levels = 3;
    const FusedFeature a = multiscale_fuse(ego, {w1, w2, w3}, params);
    const FusedFeature b = multiscale_fuse(ego, {w3, w1, w2}, params);
    for (std::size_t i = 0; i < a.grid.data.size(); ++i) {
        CHECK(a.grid.data[i] == b.grid.data[i]);  // bitwise
    }
}

TEST_CASE("fusion is monotone in its inputs") {
    Rng rng(88);
    const GridSpec spec = spec_small();
    const FeatureGrid ego = random_grid(spec, 2, rng);
    FeatureGrid other = random_grid(spec, 2, rng);
    FusionParams params;
    params.levels = 2;
    const FusedFeature before = multiscale_fuse(ego, {other}, params);
    // bump one input cell; no output cell may decrease
    other.cell(10, 20)[1] += 0.75f;
    const FusedFeature after = multiscale_fuse(ego, {other}, params);
    for (std::size_t i = 0; i < before.grid.data.size(); ++i) {
        CHECK(after.grid.data[i] >= before.grid.data[i]);
    }
}

TEST_CASE("channel count is preserved by mean combination for every L") {
    Rng rng(89);
    const FeatureGrid ego = random_grid(spec_small(), 5, rng);
    for (int levels = 1; levels <= 3; ++levels) {
        FusionParams params;
        params.levels = levels;
        const FusedFeature out = multiscale_fuse(ego, {}, params);
        CHECK(out.grid.channels == 5);
        CHECK(out.grid.spec == ego.spec);
    }
}

TEST_CASE("concat combination stacks channels") {
    Rng rng(90);
    const FeatureGrid ego = random_grid(spec_small(), 4, rng);
    FusionParams params;
    params.levels = 3;
    params.combine = LevelCombine::Concat;
    const FusedFeature out = multiscale_fuse(ego, {}, params);
    CHECK(out.grid.channels == 12);
}

TEST_CASE("non-divisible dims name the offending level") {
    const GridSpec odd = GridSpec::make(0.0, 15.0, 0.0, 9.0, 0.5);  // 30 x 18
    const FeatureGrid ego(odd, 2);
    FusionParams params;
    params.levels = 3;  // needs divisibility by 4
    CHECK_THROWS_WITH(multiscale_fuse(ego, {}, params),
                      Catch::Matchers::ContainsSubstring("level 3"));
}
