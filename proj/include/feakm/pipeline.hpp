#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "feakm/align.hpp"
#include "feakm/eval.hpp"
#include "feakm/fusion.hpp"
#include "feakm/geometry.hpp"
#include "feakm/keypoint.hpp"
#include "feakm/matcher.hpp"
#include "feakm/protocol.hpp"
#include "feakm/scene.hpp"

namespace feakm {

// Where the relative transform used for projection comes from:
//   Corrected  - keypoint matching + SVD, verified against the reported pose
//   Reported   - trust the (noisy) reported poses, no rectification
//   TruePose   - oracle reference using ground-truth poses
enum class TransformSource { Corrected, Reported, TruePose };

struct PipelineParams {
    KeypointParams keypoint;
    MatcherParams matcher;
    AlignParams align;
    FusionParams fusion;
    DecodeParams decode;
    TransformSource source = TransformSource::Corrected;
    bool confidence_keypoints = true;  // off: threshold 0, points capped by max_points only
    bool multiscale = true;            // off: single level
};

// Per collaborator audit row.
struct PairAudit {
    int agent = 0;
    std::optional<AlignmentStatus> status;  // set only on the corrected path
    int matched_pairs = 0;
    double translation_error_m = 0.0;  // transform actually used vs ground truth
    double rotation_error_deg = 0.0;
    std::uint64_t message_bytes = 0;
};

struct SceneRunResult {
    DetectionSet detections;          // fused, ego true frame
    std::vector<RotatedBox> ground_truth;
    double ap50 = 0.0;
    double ap70 = 0.0;
    std::vector<PairAudit> audits;
    std::uint64_t bytes_sent = 0;
    ConfidenceMap fused_confidence;
    std::vector<FeatureGrid> debug_level_grids;  // filled when keep_debug is set
    bool keep_debug = false;
};

inline KeypointSet extract_agent_keypoints(const FeatureGrid& grid, const ConfidenceMap& conf,
                                           const PipelineParams& params) {
    KeypointParams kp = params.keypoint;
    if (!params.confidence_keypoints) kp.delta = 0.0;  // no confidence gating, more points
    return build_keypoint_set(grid, conf, kp);
}

// Full collaboration round for one ego agent: encode every view, exchange
// keypoint messages over the wire format, rectify (or not) each pairwise
// transform, warp, fuse multiscale, decode, and score against ground truth.
inline SceneRunResult run_scene_pipeline(const Scene& scene, int ego, const PipelineParams& params,
                                         bool keep_debug = false) {
    const int n_agents = static_cast<int>(scene.agent_poses_true.size());
    if (ego < 0 || ego >= n_agents) throw std::invalid_argument("run_scene_pipeline: bad ego index");
    const GridSpec& grid_spec = scene.config.grid;

    std::vector<FeatureGrid> features;
    std::vector<ConfidenceMap> confidences;
    std::vector<KeypointSet> keypoints;
    features.reserve(static_cast<std::size_t>(n_agents));
    for (int a = 0; a < n_agents; ++a) {
        features.push_back(encode_agent_view(scene, a));
        auto [dets, conf] = decode_detections(features.back(), params.decode,
                                              ground_truth_in_range(scene, a, grid_spec));
        (void)dets;  // individual detections are not needed downstream here
        confidences.push_back(std::move(conf));
        keypoints.push_back(extract_agent_keypoints(features.back(), confidences.back(), params));
    }

    SceneRunResult result;
    result.keep_debug = keep_debug;
    const RigidTransform2D ego_world_inv = invert(pose_to_world(scene.agent_poses_true[ego]));

    std::vector<FeatureGrid> warped;
    for (int j = 0; j < n_agents; ++j) {
        if (j == ego) continue;
        // The collaborator's keypoints travel through the wire format.
        const CollabMessage sent = make_message(static_cast<std::uint32_t>(j),
                                                scene.agent_poses_reported[j], keypoints[j]);
        const std::vector<std::uint8_t> bytes = encode_message(sent);
        const CollabMessage received = decode_message(bytes);
        const KeypointSet kp_j = keypoints_from_message(received);

        PairAudit audit;
        audit.agent = j;
        audit.message_bytes = bytes.size();
        result.bytes_sent += bytes.size();

        const Pose& rep_i = scene.agent_poses_reported[ego];
        const Pose rep_j = received.pose;
        RigidTransform2D used;
        switch (params.source) {
            case TransformSource::TruePose:
                used = relative_transform(scene.agent_poses_true[ego], scene.agent_poses_true[j]);
                break;
            case TransformSource::Reported:
                used = relative_transform(rep_i, rep_j);
                break;
            case TransformSource::Corrected: {
                const MatchResult match = match_keypoints(keypoints[ego], kp_j, params.matcher);
                if (const MatchSet* ms = std::get_if<MatchSet>(&match)) {
                    audit.matched_pairs = static_cast<int>(ms->pairs.size());
                    const AlignmentResult aligned = correct_pose(
                        rep_i, rep_j, keypoints[ego], kp_j, *ms, grid_spec, params.align);
                    audit.status = aligned.status;
                    used = aligned.transform;
                } else {
                    audit.matched_pairs = std::get<MatchFailure>(match).pairs_found;
                    audit.status = AlignmentStatus::Unverifiable;
                    used = relative_transform(rep_i, rep_j);
                }
                break;
            }
        }

        const RigidTransform2D truth =
            relative_transform(scene.agent_poses_true[ego], scene.agent_poses_true[j]);
        const RigidTransform2D err = compose(invert(truth), used);
        audit.translation_error_m = err.translation.norm();
        audit.rotation_error_deg = rad2deg(std::abs(err.angle()));
        result.audits.push_back(audit);

        warped.push_back(project_grid(features[j], used, grid_spec));
    }

    FusionParams fusion = params.fusion;
    if (!params.multiscale) fusion.levels = 1;
    std::vector<int> contributors;
    for (int j = 0; j < n_agents; ++j) {
        if (j != ego) contributors.push_back(j);
    }
    FusedFeature fused = multiscale_fuse(features[ego], warped, fusion, std::move(contributors));
    if (keep_debug) {
        result.debug_level_grids.push_back(features[ego]);
        for (FeatureGrid& w : warped) result.debug_level_grids.push_back(std::move(w));
    }

    result.ground_truth = ground_truth_in_range(scene, ego, grid_spec);
    auto [dets, conf] = decode_detections(fused.grid, params.decode, result.ground_truth);
    result.detections = std::move(dets);
    result.fused_confidence = std::move(conf);
    result.ap50 = average_precision(result.detections, result.ground_truth, 0.5);
    result.ap70 = average_precision(result.detections, result.ground_truth, 0.7);
    return result;
}

}  // namespace feakm
