#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "feakm/parallel.hpp"
#include "feakm/pipeline.hpp"
#include "feakm/rng.hpp"
#include "feakm/scene.hpp"

namespace feakm {

// One pipeline configuration evaluated across the noise ladder.
struct SweepVariant {
    std::string name;
    TransformSource source = TransformSource::Corrected;
    bool confidence_keypoints = true;
    bool multiscale = true;
    int k_pairs = 4;
};

struct NoiseLevel {
    double sigma_t = 0.0;  // meters
    double sigma_r = 0.0;  // degrees
};

struct SweepConfig {
    std::vector<NoiseLevel> noise_levels;
    int trials_per_level = 30;
    SceneConfig scene;
    PipelineParams pipeline;
    std::vector<SweepVariant> variants;
    std::uint64_t seed = 42;
    int workers = 1;
};

// Aggregated over trials for one (noise level, variant) cell.
struct SweepRow {
    double sigma_t = 0.0;
    double sigma_r = 0.0;
    std::string variant;
    double ap50 = 0.0;
    double ap70 = 0.0;
    double mean_pairs = 0.0;
    long n_consistent = 0;
    long n_deviant = 0;
    long n_unverifiable = 0;
    double t_err_m = 0.0;
    double r_err_deg = 0.0;
    long failures = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // level-major, then variant order
};

// The noise ladder the tables use: 0.0/0.0, 0.0/0.2, then 0.4/0.4 .. 2.0/2.0
// in 0.2 steps (11 levels).
inline std::vector<NoiseLevel> default_noise_ladder() {
    std::vector<NoiseLevel> out{{0.0, 0.0}, {0.0, 0.2}};
    for (int i = 2; i <= 10; ++i) {
        const double s = 0.2 * i;
        out.push_back({s, s});
    }
    return out;
}

inline std::vector<SweepVariant> default_variants(int k_pairs) {
    return {
        {"feakm", TransformSource::Corrected, true, true, k_pairs},
        {"no_correction", TransformSource::Reported, true, true, k_pairs},
        {"oracle", TransformSource::TruePose, true, true, k_pairs},
    };
}

// Table-3-style 2x2 design: confidence map x multiscale, correction on.
inline std::vector<SweepVariant> ablation_variants(int k_pairs) {
    std::vector<SweepVariant> out;
    for (int conf = 0; conf <= 1; ++conf) {
        for (int multi = 0; multi <= 1; ++multi) {
            SweepVariant v;
            v.name = std::string("ablation_conf") + (conf ? "1" : "0") + "_multi" + (multi ? "1" : "0");
            v.confidence_keypoints = conf == 1;
            v.multiscale = multi == 1;
            v.k_pairs = k_pairs;
            out.push_back(std::move(v));
        }
    }
    return out;
}

namespace detail {

struct TrialOutcome {
    bool failed = false;
    double ap50 = 0.0;
    double ap70 = 0.0;
    double pairs = 0.0;
    long n_consistent = 0;
    long n_deviant = 0;
    long n_unverifiable = 0;
    double t_err = 0.0;
    double r_err = 0.0;
};

}  // namespace detail

// Runs every (level, variant, trial) cell. Scenes are a function of
// (seed, trial) only, so every noise level sees the same worlds; the noise
// realization itself scales smoothly with sigma because the perturbation
// stream is separate. Trials run in parallel, results merge in index order,
// so output bytes do not depend on the worker count.
inline SweepResult run_sweep(const SweepConfig& cfg) {
    if (cfg.noise_levels.empty()) {
        throw std::invalid_argument("sweep.noise_levels must be non-empty");
    }
    if (cfg.trials_per_level < 1) {
        throw std::invalid_argument("sweep.trials_per_level must be >= 1");
    }
    const std::size_t n_levels = cfg.noise_levels.size();
    const std::size_t n_variants = cfg.variants.size();
    const std::size_t n_trials = static_cast<std::size_t>(cfg.trials_per_level);
    std::vector<detail::TrialOutcome> outcomes(n_levels * n_variants * n_trials);

    parallel_for(n_levels * n_trials, cfg.workers, [&](std::size_t work) {
        const std::size_t level = work / n_trials;
        const std::size_t trial = work % n_trials;

        SceneConfig scene_cfg = cfg.scene;
        scene_cfg.noise.sigma_t = cfg.noise_levels[level].sigma_t;
        scene_cfg.noise.sigma_r = cfg.noise_levels[level].sigma_r;
        const std::uint64_t scene_seed = derive_seed(cfg.seed, 0x5ce, trial);

        for (std::size_t v = 0; v < n_variants; ++v) {
            const SweepVariant& variant = cfg.variants[v];
            detail::TrialOutcome& out = outcomes[(level * n_variants + v) * n_trials + trial];
            try {
                const Scene scene = generate_scene(scene_cfg, scene_seed);
                PipelineParams params = cfg.pipeline;
                params.source = variant.source;
                params.confidence_keypoints = variant.confidence_keypoints;
                params.multiscale = variant.multiscale;
                params.matcher.min_pairs = variant.k_pairs;
                params.align.ransac.min_inliers = std::max(variant.k_pairs, 3);
                const SceneRunResult run = run_scene_pipeline(scene, 0, params);

                out.ap50 = run.ap50;
                out.ap70 = run.ap70;
                double pairs = 0.0, t_err = 0.0, r_err = 0.0;
                for (const PairAudit& audit : run.audits) {
                    pairs += audit.matched_pairs;
                    t_err += audit.translation_error_m;
                    r_err += audit.rotation_error_deg;
                    if (audit.status) {
                        switch (*audit.status) {
                            case AlignmentStatus::Consistent: out.n_consistent++; break;
                            case AlignmentStatus::Deviant: out.n_deviant++; break;
                            case AlignmentStatus::Unverifiable: out.n_unverifiable++; break;
                        }
                    }
                }
                const double n_pairs_den = run.audits.empty() ? 1.0 : static_cast<double>(run.audits.size());
                out.pairs = pairs / n_pairs_den;
                out.t_err = t_err / n_pairs_den;
                out.r_err = r_err / n_pairs_den;
            } catch (const std::exception&) {
                out.failed = true;
            }
        }
    });

    SweepResult result;
    for (std::size_t level = 0; level < n_levels; ++level) {
        for (std::size_t v = 0; v < n_variants; ++v) {
            SweepRow row;
            row.sigma_t = cfg.noise_levels[level].sigma_t;
            row.sigma_r = cfg.noise_levels[level].sigma_r;
            row.variant = cfg.variants[v].name;
            long ok = 0;
            for (std::size_t trial = 0; trial < n_trials; ++trial) {
                const detail::TrialOutcome& out = outcomes[(level * n_variants + v) * n_trials + trial];
                if (out.failed) {
                    row.failures++;
                    continue;
                }
                ok++;
                row.ap50 += out.ap50;
                row.ap70 += out.ap70;
                row.mean_pairs += out.pairs;
                row.t_err_m += out.t_err;
                row.r_err_deg += out.r_err;
                row.n_consistent += out.n_consistent;
                row.n_deviant += out.n_deviant;
                row.n_unverifiable += out.n_unverifiable;
            }
            if (ok > 0) {
                row.ap50 /= ok;
                row.ap70 /= ok;
                row.mean_pairs /= ok;
                row.t_err_m /= ok;
                row.r_err_deg /= ok;
            }
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

inline std::string sweep_csv(const SweepResult& result) {
    std::string out =
        "sigma_t,sigma_r,variant,ap50,ap70,mean_pairs,n_consistent,n_deviant,n_unverifiable,"
        "t_err_m,r_err_deg,failures\n";
    char line[512];
    for (const SweepRow& r : result.rows) {
        std::snprintf(line, sizeof(line), "%.2f,%.2f,%s,%.6f,%.6f,%.3f,%ld,%ld,%ld,%.6f,%.6f,%ld\n",
                      r.sigma_t, r.sigma_r, r.variant.c_str(), r.ap50, r.ap70, r.mean_pairs,
                      r.n_consistent, r.n_deviant, r.n_unverifiable, r.t_err_m, r.r_err_deg,
                      r.failures);
        out += line;
    }
    return out;
}

}  // namespace feakm
