#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "feakm/config.hpp"
#include "feakm/io.hpp"
#include "feakm/parallel.hpp"
#include "feakm/pipeline.hpp"
#include "feakm/sweep.hpp"

namespace feakm {

struct CliOptions {
    std::string config_path;  // empty = defaults
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> k_pairs;
    bool no_correction = false;
    bool no_confidence_map = false;
    bool no_multiscale = false;
    bool plot = false;
    bool dump_assignment = false;
};

inline RunConfig load_run_config(const CliOptions& opts) {
    RunConfig cfg = opts.config_path.empty() ? RunConfig{} : RunConfig::from_file(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.workers) cfg.workers = *opts.workers;
    if (opts.k_pairs) cfg.pipeline.matcher.min_pairs = *opts.k_pairs;
    if (opts.no_correction) cfg.pipeline.source = TransformSource::Reported;
    if (opts.no_confidence_map) cfg.pipeline.confidence_keypoints = false;
    if (opts.no_multiscale) cfg.pipeline.multiscale = false;
    cfg.finalize();
    return cfg;
}

inline void snapshot_config(const RunConfig& cfg, const CliOptions& opts) {
    std::filesystem::create_directories(opts.out_dir);
    const std::filesystem::path snap = std::filesystem::path(opts.out_dir) / "config.txt";
    if (!opts.config_path.empty()) {
        write_text_file(snap, read_text_file(opts.config_path));
    } else {
        write_text_file(snap, cfg.dump());
    }
    write_text_file(std::filesystem::path(opts.out_dir) / "config_effective.txt", cfg.dump());
}

inline int effective_workers(const RunConfig& cfg) {
    return cfg.workers == 0 ? default_workers() : cfg.workers;
}

// One scene end-to-end: detections, alignment audit, scene dump and fused
// confidence for inspection.
inline int cmd_simulate(const CliOptions& opts) {
    const RunConfig cfg = load_run_config(opts);
    snapshot_config(cfg, opts);
    const std::filesystem::path out(opts.out_dir);

    const Scene scene = generate_scene(cfg.scene, cfg.seed);
    const SceneRunResult run = run_scene_pipeline(scene, 0, cfg.pipeline, /*keep_debug=*/true);

    write_text_file(out / "detections.csv", detections_csv(run.detections));
    write_text_file(out / "scene.jsonl", scene_jsonl(scene));

    std::string audit = "agent,status,matched_pairs,t_err_m,r_err_deg,message_bytes\n";
    char line[256];
    for (const PairAudit& a : run.audits) {
        std::snprintf(line, sizeof(line), "%d,%s,%d,%.6f,%.6f,%llu\n", a.agent,
                      a.status ? to_string(*a.status) : "n/a", a.matched_pairs,
                      a.translation_error_m, a.rotation_error_deg,
                      static_cast<unsigned long long>(a.message_bytes));
        audit += line;
    }
    write_text_file(out / "alignment_audit.csv", audit);

    for (std::size_t i = 0; i < run.debug_level_grids.size(); ++i) {
        write_tensor_file(out / ("grid_" + std::to_string(i) + ".fkmt"), run.debug_level_grids[i]);
    }

    std::printf("simulate: %zu objects, %zu detections, ap50=%.3f ap70=%.3f, %llu bytes sent\n",
                scene.objects.size(), run.detections.boxes.size(), run.ap50, run.ap70,
                static_cast<unsigned long long>(run.bytes_sent));
    return 0;
}

inline SweepConfig make_sweep_config(const RunConfig& cfg) {
    SweepConfig sweep;
    sweep.noise_levels = cfg.sweep_levels;
    sweep.trials_per_level = cfg.sweep_trials;
    sweep.scene = cfg.scene;
    sweep.pipeline = cfg.pipeline;
    sweep.seed = cfg.seed;
    sweep.workers = effective_workers(cfg);
    sweep.variants = default_variants(cfg.pipeline.matcher.min_pairs);
    if (cfg.sweep_toggle_grid) {
        for (SweepVariant& v : ablation_variants(cfg.pipeline.matcher.min_pairs)) {
            sweep.variants.push_back(std::move(v));
        }
    }
    return sweep;
}

inline int cmd_sweep(const CliOptions& opts) {
    const RunConfig cfg = load_run_config(opts);
    snapshot_config(cfg, opts);
    const std::filesystem::path out(opts.out_dir);

    const SweepConfig sweep = make_sweep_config(cfg);
    const SweepResult result = run_sweep(sweep);
    write_text_file(out / "sweep.csv", sweep_csv(result));
    if (opts.plot) write_text_file(out / "sweep.svg", sweep_svg(result));

    std::printf("sweep: %zu levels x %d trials, %zu variants -> %s\n", sweep.noise_levels.size(),
                sweep.trials_per_level, sweep.variants.size(),
                (out / "sweep.csv").string().c_str());
    for (const SweepRow& r : result.rows) {
        std::printf("  %.1f/%.1f %-16s ap50=%.3f ap70=%.3f pairs=%.1f status=%ld/%ld/%ld\n",
                    r.sigma_t, r.sigma_r, r.variant.c_str(), r.ap50, r.ap70, r.mean_pairs,
                    r.n_consistent, r.n_deviant, r.n_unverifiable);
    }
    return 0;
}

// Single agent pair through keypoints + matcher + align, with ground truth
// for reference.
inline int cmd_match(const CliOptions& opts) {
    const RunConfig cfg = load_run_config(opts);
    snapshot_config(cfg, opts);
    const std::filesystem::path out(opts.out_dir);

    const Scene scene = generate_scene(cfg.scene, cfg.seed);
    const FeatureGrid grid_i = encode_agent_view(scene, 0);
    const FeatureGrid grid_j = encode_agent_view(scene, 1);
    auto [dets_i, conf_i] = decode_detections(grid_i, cfg.pipeline.decode,
                                              ground_truth_in_range(scene, 0, cfg.scene.grid));
    auto [dets_j, conf_j] = decode_detections(grid_j, cfg.pipeline.decode,
                                              ground_truth_in_range(scene, 1, cfg.scene.grid));
    const KeypointSet kp_i = extract_agent_keypoints(grid_i, conf_i, cfg.pipeline);
    const KeypointSet kp_j = extract_agent_keypoints(grid_j, conf_j, cfg.pipeline);

    const Eigen::MatrixXf desc_i = kp_i.descriptors;
    const AssignmentMatrix assignment =
        build_assignment(kp_i.descriptors, kp_j.descriptors, cfg.pipeline.matcher.temperature,
                         cfg.pipeline.matcher.sinkhorn_iters, cfg.pipeline.matcher.dustbin_score);
    if (opts.dump_assignment) {
        std::string csv;
        char cell[32];
        for (Eigen::Index i = 0; i < assignment.scores.rows(); ++i) {
            for (Eigen::Index j = 0; j < assignment.scores.cols(); ++j) {
                std::snprintf(cell, sizeof(cell), j ? ",%.6f" : "%.6f", assignment.scores(i, j));
                csv += cell;
            }
            csv += "\n";
        }
        write_text_file(out / "assignment.csv", csv);
    }

    const MatchResult match = match_keypoints(kp_i, kp_j, cfg.pipeline.matcher);
    const RigidTransform2D truth =
        relative_transform(scene.agent_poses_true[0], scene.agent_poses_true[1]);

    if (const MatchSet* ms = std::get_if<MatchSet>(&match)) {
        const AlignmentResult aligned =
            correct_pose(scene.agent_poses_reported[0], scene.agent_poses_reported[1], kp_i, kp_j,
                         *ms, cfg.scene.grid, cfg.pipeline.align);
        const RigidTransform2D err = compose(invert(truth), aligned.transform);
        std::printf("match: %zu pairs, status=%s, t_err=%.3f m, r_err=%.3f deg, rms=%.3f m\n",
                    ms->pairs.size(), to_string(*aligned.status), err.translation.norm(),
                    rad2deg(std::abs(err.angle())), aligned.rms_residual);
    } else {
        const MatchFailure failure = std::get<MatchFailure>(match);
        const RigidTransform2D rep = relative_transform(scene.agent_poses_reported[0],
                                                        scene.agent_poses_reported[1]);
        const RigidTransform2D err = compose(invert(truth), rep);
        std::printf("match: %d pairs (< %d required), status=%s, fallback t_err=%.3f m, "
                    "r_err=%.3f deg\n",
                    failure.pairs_found, failure.pairs_required,
                    to_string(AlignmentStatus::Unverifiable), err.translation.norm(),
                    rad2deg(std::abs(err.angle())));
    }
    return 0;
}

// Re-reads a sweep CSV and prints a table (plus the SVG when asked).
inline int cmd_report(const CliOptions& opts) {
    const std::filesystem::path csv_path = std::filesystem::path(opts.out_dir) / "sweep.csv";
    const std::string text = read_text_file(csv_path);
    SweepResult result;
    std::istringstream stream(text);
    std::string line;
    std::getline(stream, line);  // header
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        SweepRow row;
        char variant[128] = {0};
        if (std::sscanf(line.c_str(), "%lf,%lf,%127[^,],%lf,%lf,%lf,%ld,%ld,%ld,%lf,%lf,%ld",
                        &row.sigma_t, &row.sigma_r, variant, &row.ap50, &row.ap70, &row.mean_pairs,
                        &row.n_consistent, &row.n_deviant, &row.n_unverifiable, &row.t_err_m,
                        &row.r_err_deg, &row.failures) != 12) {
            std::fprintf(stderr, "report: malformed row: %s\n", line.c_str());
            return 1;
        }
        row.variant = variant;
        result.rows.push_back(std::move(row));
    }
    std::printf("%-10s %-16s %8s %8s %8s %24s %10s\n", "noise", "variant", "ap50", "ap70", "pairs",
                "consistent/deviant/unver", "t_err_m");
    for (const SweepRow& r : result.rows) {
        char noise[32];
        std::snprintf(noise, sizeof(noise), "%.1f/%.1f", r.sigma_t, r.sigma_r);
        char status[32];
        std::snprintf(status, sizeof(status), "%ld/%ld/%ld", r.n_consistent, r.n_deviant,
                      r.n_unverifiable);
        std::printf("%-10s %-16s %8.3f %8.3f %8.1f %24s %10.3f\n", noise, r.variant.c_str(), r.ap50,
                    r.ap70, r.mean_pairs, status, r.t_err_m);
    }
    if (opts.plot) {
        write_text_file(std::filesystem::path(opts.out_dir) / "sweep.svg", sweep_svg(result));
    }
    return 0;
}

}  // namespace feakm
