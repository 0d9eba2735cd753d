#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "feakm/eval.hpp"
#include "feakm/geometry.hpp"
#include "feakm/grid.hpp"
#include "feakm/keypoint.hpp"
#include "feakm/rng.hpp"

namespace feakm {

// A ground-truth object. The signature is the object's latent appearance,
// shared across every agent that sees it; descriptors sampled near the object
// in any agent's grid point along this vector.
struct SceneObject {
    int id = 0;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();  // world frame, meters
    double length = 4.5;
    double width = 2.0;
    double yaw = 0.0;
    Eigen::VectorXf signature;  // unit norm, non-negative entries

    RotatedBox box() const { return RotatedBox{center, length, width, yaw}; }
};

struct SceneConfig {
    int objects_min = 14;
    int objects_max = 24;
    double length_min = 3.5;
    double length_max = 5.5;
    double width_min = 1.6;
    double width_max = 2.4;
    double place_x = 50.0;  // objects placed in [-place_x, place_x] x [-place_y, place_y]
    double place_y = 22.0;
    double placement_margin = 1.0;  // meters of clearance enforced between boxes
    int max_place_attempts = 200;   // per object

    int n_agents = 2;
    double agent_spread = 10.0;     // agent x/y uniform in +-spread
    double agent_yaw_deg = 15.0;    // agent yaw uniform in +-this
    double p_occ = 0.2;             // per-agent independent dropout
    double comm_range = 100.0;

    int channels = 64;          // descriptor dimension D
    int signature_active = 8;   // non-zero channels per object signature
    double bump_sigma = 1.5;    // cells
    double noise_floor = 0.05;  // background noise amplitude eta

    PoseNoiseSpec noise;  // applied to every agent's reported pose
    GridSpec grid;
};

struct Scene {
    std::vector<SceneObject> objects;
    std::vector<Pose> agent_poses_true;
    std::vector<Pose> agent_poses_reported;
    double comm_range = 100.0;
    std::uint64_t seed = 0;
    // visible[agent][object]: occlusion dropout draw, fixed at generation time
    std::vector<std::vector<std::uint8_t>> visible;
    SceneConfig config;
};

// Sparse non-negative unit signature. Non-negativity keeps feature grids
// non-negative after stamping; sparsity keeps distinct objects close to
// orthogonal so raw similarity separates them.
inline Eigen::VectorXf random_signature(int channels, int active, Rng& rng) {
    Eigen::VectorXf sig = Eigen::VectorXf::Zero(channels);
    active = std::min(active, channels);
    std::vector<int> picked;
    while (static_cast<int>(picked.size()) < active) {
        const int ch = static_cast<int>(rng.uniform_int(0, channels - 1));
        if (std::find(picked.begin(), picked.end(), ch) == picked.end()) picked.push_back(ch);
    }
    for (int ch : picked) sig[ch] = static_cast<float>(std::abs(rng.normal()) + 0.1);
    sig.normalize();
    return sig;
}

// Places non-overlapping objects, draws agent poses, occlusion dropouts and
// reported (perturbed) poses. Independent RNG streams per concern, so the same
// seed yields the same world at every noise level, with the noise realization
// scaling smoothly in sigma.
inline Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
    if (cfg.n_agents < 2) throw std::invalid_argument("generate_scene: need at least 2 agents");
    if (cfg.objects_min < 0 || cfg.objects_max < cfg.objects_min) {
        throw std::invalid_argument("generate_scene: bad object count range");
    }
    Scene scene;
    scene.comm_range = cfg.comm_range;
    scene.seed = seed;
    scene.config = cfg;

    Rng obj_rng(derive_seed(seed, 1));
    Rng agent_rng(derive_seed(seed, 2));
    Rng occ_rng(derive_seed(seed, 3));
    Rng noise_rng(derive_seed(seed, 4));

    const int n_objects = static_cast<int>(obj_rng.uniform_int(cfg.objects_min, cfg.objects_max));
    for (int i = 0; i < n_objects; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < cfg.max_place_attempts; ++attempt) {
            SceneObject obj;
            obj.id = i;
            obj.center = {obj_rng.uniform(-cfg.place_x, cfg.place_x),
                          obj_rng.uniform(-cfg.place_y, cfg.place_y)};
            obj.yaw = obj_rng.uniform(-M_PI, M_PI);
            obj.length = obj_rng.uniform(cfg.length_min, cfg.length_max);
            obj.width = obj_rng.uniform(cfg.width_min, cfg.width_max);
            obj.signature = random_signature(cfg.channels, cfg.signature_active, obj_rng);

            RotatedBox inflated = obj.box();
            inflated.length += cfg.placement_margin;
            inflated.width += cfg.placement_margin;
            bool clear = true;
            for (const SceneObject& other : scene.objects) {
                RotatedBox other_inflated = other.box();
                other_inflated.length += cfg.placement_margin;
                other_inflated.width += cfg.placement_margin;
                if (rotated_iou(inflated, other_inflated) > 0.0) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                scene.objects.push_back(std::move(obj));
                placed = true;
                break;
            }
        }
        if (!placed) {
            throw std::runtime_error(
                "generate_scene: placement failed after " + std::to_string(cfg.max_place_attempts) +
                " attempts (objects=" + std::to_string(n_objects) +
                ", extent=" + std::to_string(2.0 * cfg.place_x) + "x" + std::to_string(2.0 * cfg.place_y) +
                ", max size=" + std::to_string(cfg.length_max) + "x" + std::to_string(cfg.width_max) + ")");
        }
    }

    const double yaw_max = deg2rad(cfg.agent_yaw_deg);
    for (int a = 0; a < cfg.n_agents; ++a) {
        scene.agent_poses_true.push_back(Pose::planar(
            agent_rng.uniform(-cfg.agent_spread, cfg.agent_spread),
            agent_rng.uniform(-cfg.agent_spread, cfg.agent_spread),
            agent_rng.uniform(-yaw_max, yaw_max)));
    }

    scene.visible.resize(cfg.n_agents);
    for (int a = 0; a < cfg.n_agents; ++a) {
        scene.visible[a].resize(scene.objects.size());
        for (std::size_t o = 0; o < scene.objects.size(); ++o) {
            scene.visible[a][o] = occ_rng.bernoulli(1.0 - cfg.p_occ) ? 1 : 0;
        }
    }

    for (int a = 0; a < cfg.n_agents; ++a) {
        scene.agent_poses_reported.push_back(perturb_pose(scene.agent_poses_true[a], cfg.noise, noise_rng));
    }
    return scene;
}

// Object center expressed in an agent's TRUE frame.
inline Eigen::Vector2d object_in_agent_frame(const Scene& scene, int agent, const SceneObject& obj) {
    const RigidTransform2D world_to_agent = invert(pose_to_world(scene.agent_poses_true[agent]));
    return world_to_agent.apply(obj.center);
}

// In view = occlusion draw kept it, within comm range, and its center lands
// inside the agent's grid extent.
inline bool object_in_view(const Scene& scene, int agent, std::size_t obj_index, const GridSpec& grid) {
    if (!scene.visible[agent][obj_index]) return false;
    const SceneObject& obj = scene.objects[obj_index];
    const Pose& p = scene.agent_poses_true[agent];
    const double dist = (obj.center - Eigen::Vector2d(p.x, p.y)).norm();
    if (dist > scene.comm_range) return false;
    const Eigen::Vector2d local = object_in_agent_frame(scene, agent, obj);
    const Eigen::Vector2d cell = world_to_grid(local, grid);
    return cell.x() >= 0.0 && cell.x() <= grid.W - 1.0 && cell.y() >= 0.0 && cell.y() <= grid.H - 1.0;
}

inline std::vector<std::size_t> covisible_objects(const Scene& scene, int agent_a, int agent_b,
                                                  const GridSpec& grid) {
    std::vector<std::size_t> out;
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        if (object_in_view(scene, agent_a, o, grid) && object_in_view(scene, agent_b, o, grid)) {
            out.push_back(o);
        }
    }
    return out;
}

// Ground truth for ego scoring: every object whose center lies in the agent's
// detection extent, occluded or not. Boxes come out in the agent's true frame.
inline std::vector<RotatedBox> ground_truth_in_range(const Scene& scene, int agent, const GridSpec& grid) {
    std::vector<RotatedBox> out;
    const Pose& p = scene.agent_poses_true[agent];
    const RigidTransform2D world_to_agent = invert(pose_to_world(p));
    for (const SceneObject& obj : scene.objects) {
        const Eigen::Vector2d local = world_to_agent.apply(obj.center);
        const Eigen::Vector2d cell = world_to_grid(local, grid);
        if (cell.x() < 0.0 || cell.x() > grid.W - 1.0 || cell.y() < 0.0 || cell.y() > grid.H - 1.0) {
            continue;
        }
        out.push_back(RotatedBox{local, obj.length, obj.width, wrap_angle(obj.yaw - p.yaw)});
    }
    return out;
}

// Deterministic stand-in for the learned encoder: an isotropic Gaussian bump
// of the object's signature at its center in the agent's TRUE frame, over an
// i.i.d. uniform background of amplitude eta. Only the reported pose travels
// downstream; the gap between the two is exactly the experimental noise.
inline FeatureGrid encode_agent_view(const Scene& scene, int agent) {
    const SceneConfig& cfg = scene.config;
    if (agent < 0 || agent >= static_cast<int>(scene.agent_poses_true.size())) {
        throw std::invalid_argument("encode_agent_view: agent index out of range");
    }
    FeatureGrid grid(cfg.grid, cfg.channels);

    if (cfg.noise_floor > 0.0) {
        Rng noise(derive_seed(scene.seed, 100, static_cast<std::uint64_t>(agent)));
        for (float& v : grid.data) v = static_cast<float>(noise.uniform(0.0, cfg.noise_floor));
    }

    const int radius = static_cast<int>(std::ceil(4.0 * cfg.bump_sigma));
    const double inv_two_sigma2 = 1.0 / (2.0 * cfg.bump_sigma * cfg.bump_sigma);
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        if (!scene.visible[agent][o]) continue;
        const SceneObject& obj = scene.objects[o];
        const Pose& p = scene.agent_poses_true[agent];
        if ((obj.center - Eigen::Vector2d(p.x, p.y)).norm() > scene.comm_range) continue;
        const Eigen::Vector2d c = world_to_grid(object_in_agent_frame(scene, agent, obj), cfg.grid);
        if (c.x() < 0.0 || c.x() > cfg.grid.W - 1.0 || c.y() < 0.0 || c.y() > cfg.grid.H - 1.0) continue;

        const int col0 = std::max(0, static_cast<int>(std::floor(c.x())) - radius);
        const int col1 = std::min(cfg.grid.W - 1, static_cast<int>(std::ceil(c.x())) + radius);
        const int row0 = std::max(0, static_cast<int>(std::floor(c.y())) - radius);
        const int row1 = std::min(cfg.grid.H - 1, static_cast<int>(std::ceil(c.y())) + radius);
        for (int row = row0; row <= row1; ++row) {
            for (int col = col0; col <= col1; ++col) {
                const double dx = col - c.x();
                const double dy = row - c.y();
                const float w = static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv_two_sigma2));
                if (w < 1e-6f) continue;
                float* cell = grid.cell(row, col);
                for (int ch = 0; ch < cfg.channels; ++ch) {
                    const float s = obj.signature[ch];
                    if (s != 0.0f) cell[ch] += s * w;
                }
            }
        }
    }
    return grid;
}

struct DecodeParams {
    int nms_radius = 3;           // cells
    double peak_threshold = 0.45;
    int max_detections = 512;
    double prior_length = 4.5;  // box prior when no ground-truth hint matches
    double prior_width = 2.0;
};

// Stand-in detection head + confidence generator. Confidence is the per-cell
// channel norm scaled so the max is 1; detections are NMS peaks above the
// threshold. A peak within 1 cell of a hinted ground-truth box takes that
// box's size and yaw (a well-trained head); otherwise a fixed prior.
inline std::pair<DetectionSet, ConfidenceMap> decode_detections(
    const FeatureGrid& f, const DecodeParams& params,
    const std::vector<RotatedBox>& gt_hint = {}) {
    ConfidenceMap conf(f.spec);
    const std::vector<float> raw = channel_norm(f);
    float max_val = 0.0f;
    for (float v : raw) max_val = std::max(max_val, v);
    if (max_val > 0.0f) {
        for (std::size_t i = 0; i < raw.size(); ++i) conf.data[i] = raw[i] / max_val;
    }

    DetectionSet dets;
    const std::vector<ScoredPeak> peaks =
        extract_keypoints(conf, params.peak_threshold, params.max_detections, params.nms_radius);
    for (const ScoredPeak& peak : peaks) {
        const Eigen::Vector2d center = grid_to_world(peak.coord, f.spec);
        Detection det;
        det.score = peak.score;
        det.box = RotatedBox{center, params.prior_length, params.prior_width, 0.0};
        double best = std::numeric_limits<double>::max();
        for (const RotatedBox& gt : gt_hint) {
            const Eigen::Vector2d gt_cell = world_to_grid(gt.center, f.spec);
            const double d = std::max(std::abs(gt_cell.x() - peak.coord.x()),
                                      std::abs(gt_cell.y() - peak.coord.y()));
            if (d <= 1.0 && d < best) {
                best = d;
                det.box = gt;
                det.box.center = center;  // position still comes from the peak
            }
        }
        dets.boxes.push_back(det);
    }
    return {std::move(dets), std::move(conf)};
}

}  // namespace feakm
