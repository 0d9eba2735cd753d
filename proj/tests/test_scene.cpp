#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "feakm/scene.hpp"

using namespace feakm;

namespace {

SceneConfig small_config() {
    SceneConfig cfg;
    cfg.grid = GridSpec::make(-40.0, 40.0, -24.0, 24.0, 0.5);
    cfg.place_x = 25.0;
    cfg.place_y = 15.0;
    cfg.objects_min = 6;
    cfg.objects_max = 10;
    cfg.agent_spread = 5.0;
    cfg.channels = 16;
    cfg.signature_active = 4;
    return cfg;
}

}  // namespace

TEST_CASE("zero objects yields a valid empty scene") {
    SceneConfig cfg = small_config();
    cfg.objects_min = cfg.objects_max = 0;
    const Scene scene = generate_scene(cfg, 1);
    CHECK(scene.objects.empty());
    CHECK(scene.agent_poses_true.size() == 2);
    CHECK(scene.agent_poses_reported.size() == 2);
}

TEST_CASE("same seed gives bit-identical scenes") {
    const SceneConfig cfg = small_config();
    const Scene a = generate_scene(cfg, 77);
    const Scene b = generate_scene(cfg, 77);
    REQUIRE(a.objects.size() == b.objects.size());
    for (std::size_t i = 0; i < a.objects.size(); ++i) {
        CHECK(a.objects[i].center == b.objects[i].center);
        CHECK(a.objects[i].yaw == b.objects[i].yaw);
        CHECK(a.objects[i].signature == b.objects[i].signature);
    }
    for (std::size_t i = 0; i < a.agent_poses_true.size(); ++i) {
        CHECK(a.agent_poses_true[i].x == b.agent_poses_true[i].x);
        CHECK(a.agent_poses_reported[i].yaw == b.agent_poses_reported[i].yaw);
    }
    CHECK(a.visible == b.visible);
}

TEST_CASE("placement produces disjoint objects") {
    SceneConfig cfg;
    cfg.grid = GridSpec::make(-100.0, 100.0, -40.0, 40.0, 0.5);
    cfg.place_x = 100.0;
    cfg.place_y = 40.0;
    cfg.objects_min = cfg.objects_max = 20;
    cfg.length_max = 5.0;
    cfg.width_max = 2.5;
    const Scene scene = generate_scene(cfg, 5);
    REQUIRE(scene.objects.size() == 20);
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
            CHECK(rotated_iou(scene.objects[i].box(), scene.objects[j].box()) == 0.0);
        }
    }
}

TEST_CASE("congested placement reports the config") {
    SceneConfig cfg = small_config();
    cfg.place_x = 4.0;
    cfg.place_y = 3.0;
    cfg.objects_min = cfg.objects_max = 40;
    cfg.max_place_attempts = 10;
    CHECK_THROWS_WITH(generate_scene(cfg, 1), Catch::Matchers::ContainsSubstring("placement failed"));
}

TEST_CASE("object signatures are unit norm and non-negative") {
    const Scene scene = generate_scene(small_config(), 9);
    for (const SceneObject& obj : scene.objects) {
        CHECK(obj.signature.norm() == Catch::Approx(1.0).margin(1e-6));
        CHECK(obj.signature.minCoeff() >= 0.0f);
    }
}

TEST_CASE("encoding an empty noiseless scene gives an all-zero grid") {
    SceneConfig cfg = small_config();
    cfg.objects_min = cfg.objects_max = 0;
    cfg.noise_floor = 0.0;
    const Scene scene = generate_scene(cfg, 2);
    const FeatureGrid grid = encode_agent_view(scene, 0);
    for (float v : grid.data) CHECK(v == 0.0f);
}

TEST_CASE("a single object stamps its bump at the center cell") {
    SceneConfig cfg = small_config();
    cfg.objects_min = cfg.objects_max = 1;
    cfg.noise_floor = 0.0;
    cfg.p_occ = 0.0;
    const Scene scene = generate_scene(cfg, 3);
    const FeatureGrid grid = encode_agent_view(scene, 0);

    const std::vector<float> norms = channel_norm(grid);
    int best = 0;
    for (std::size_t i = 1; i < norms.size(); ++i) {
        if (norms[i] > norms[best]) best = static_cast<int>(i);
    }
    const int best_row = best / grid.spec.W;
    const int best_col = best % grid.spec.W;
    const Eigen::Vector2d expected =
        world_to_grid(object_in_agent_frame(scene, 0, scene.objects[0]), cfg.grid);
    CHECK(std::abs(best_col - expected.x()) <= 0.5 + 1e-9);
    CHECK(std::abs(best_row - expected.y()) <= 0.5 + 1e-9);
}

TEST_CASE("two agents see consistent descriptors for a shared object") {
    SceneConfig cfg = small_config();
    cfg.objects_min = cfg.objects_max = 1;
    cfg.noise_floor = 0.0;
    cfg.p_occ = 0.0;
    const Scene scene = generate_scene(cfg, 21);
    REQUIRE(covisible_objects(scene, 0, 1, cfg.grid).size() == 1);

    Eigen::VectorXf desc[2];
    for (int agent = 0; agent < 2; ++agent) {
        const FeatureGrid grid = encode_agent_view(scene, agent);
        const Eigen::Vector2d cell =
            world_to_grid(object_in_agent_frame(scene, agent, scene.objects[0]), cfg.grid);
        const Eigen::Vector2d rounded{std::round(cell.x()), std::round(cell.y())};
        const DescriptorResult d = compute_descriptors(grid, {rounded}, 4);
        REQUIRE(d.degenerate[0] == 0);
        desc[agent] = d.descriptors.row(0);
    }
    CHECK(desc[0].dot(desc[1]) > 0.99f);
}

TEST_CASE("decode on an all-zero grid returns nothing") {
    const GridSpec spec = GridSpec::make(-10.0, 10.0, -10.0, 10.0, 0.5);
    const FeatureGrid grid(spec, 8);
    const auto [dets, conf] = decode_detections(grid, DecodeParams{});
    CHECK(dets.boxes.empty());
    for (float v : conf.data) CHECK(v == 0.0f);
}

TEST_CASE("decode recovers a single stamped object with score 1") {
    SceneConfig cfg = small_config();
    cfg.objects_min = cfg.objects_max = 1;
    cfg.noise_floor = 0.0;
    cfg.p_occ = 0.0;
    const Scene scene = generate_scene(cfg, 4);
    const FeatureGrid grid = encode_agent_view(scene, 0);
    const auto [dets, conf] = decode_detections(grid, DecodeParams{});
    REQUIRE(dets.boxes.size() == 1);
    CHECK(dets.boxes[0].score == Catch::Approx(1.0));
    const Eigen::Vector2d expected = object_in_agent_frame(scene, 0, scene.objects[0]);
    CHECK((dets.boxes[0].box.center - expected).norm() < cfg.grid.cell_size);
}

TEST_CASE("decode NMS keeps one of two nearby peaks") {
    const GridSpec spec = GridSpec::make(-10.0, 10.0, -10.0, 10.0, 0.5);
    FeatureGrid grid(spec, 4);
    grid.cell(20, 20)[0] = 1.0f;
    grid.cell(20, 23)[0] = 0.8f;  // 3 cells away
    DecodeParams params;
    params.nms_radius = 5;
    params.peak_threshold = 0.1;
    const auto [dets, conf] = decode_detections(grid, params);
    CHECK(dets.boxes.size() == 1);
}

TEST_CASE("with no noise every in-view object is recovered within a cell") {
    SceneConfig cfg;
    cfg.grid = GridSpec::make(-100.0, 100.0, -40.0, 40.0, 0.5);
    cfg.place_x = 90.0;
    cfg.place_y = 35.0;
    cfg.objects_min = cfg.objects_max = 50;
    cfg.noise_floor = 0.0;
    cfg.p_occ = 0.0;
    cfg.agent_spread = 3.0;
    cfg.agent_yaw_deg = 5.0;
    const Scene scene = generate_scene(cfg, 6);
    REQUIRE(scene.objects.size() == 50);
    const FeatureGrid grid = encode_agent_view(scene, 0);
    DecodeParams params;
    const auto [dets, conf] = decode_detections(grid, params);

    int in_view = 0;
    int recovered = 0;
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        if (!object_in_view(scene, 0, o, cfg.grid)) continue;
        ++in_view;
        const Eigen::Vector2d local = object_in_agent_frame(scene, 0, scene.objects[o]);
        for (const Detection& det : dets.boxes) {
            if ((det.box.center - local).norm() <= cfg.grid.cell_size * std::sqrt(2.0)) {
                ++recovered;
                break;
            }
        }
    }
    CHECK(in_view > 0);
    CHECK(recovered == in_view);
}

TEST_CASE("confidence map peaks at exactly 1 when something is stamped") {
    SceneConfig cfg = small_config();
    cfg.objects_min = cfg.objects_max = 3;
    cfg.p_occ = 0.0;
    const Scene scene = generate_scene(cfg, 8);
    const FeatureGrid grid = encode_agent_view(scene, 0);
    const auto [dets, conf] = decode_detections(grid, DecodeParams{});
    float max_v = 0.0f;
    for (float v : conf.data) {
        max_v = std::max(max_v, v);
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    CHECK(max_v == 1.0f);
}
