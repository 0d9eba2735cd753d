#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "feakm/geometry.hpp"
#include "feakm/pipeline.hpp"
#include "feakm/sweep.hpp"

namespace feakm {

// Configuration problem, carrying the dotted key path that caused it.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& path, const std::string& message)
        : std::runtime_error(path + ": " + message), path_(path) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Flat "dotted.key = value" text format: one assignment per line, '#' starts
// a comment. Unknown and duplicate keys are errors so typos never silently
// fall back to defaults.
inline std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream stream(text);
    std::string line;
    int line_no = 0;
    auto trim = [](std::string s) {
        const auto begin = s.find_first_not_of(" \t\r");
        const auto end = s.find_last_not_of(" \t\r");
        if (begin == std::string::npos) return std::string();
        return s.substr(begin, end - begin + 1);
    };
    while (std::getline(stream, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "empty key");
        if (out.count(key)) throw ConfigError(key, "duplicate key");
        out[key] = value;
    }
    return out;
}

// Everything a run needs, with a default for every field: an empty config
// file runs the documented default experiment.
struct RunConfig {
    double grid_x_min = -100.0;
    double grid_x_max = 100.0;
    double grid_y_min = -40.0;
    double grid_y_max = 40.0;
    double grid_cell_size = 0.5;

    SceneConfig scene;
    PipelineParams pipeline;

    std::vector<NoiseLevel> sweep_levels = default_noise_ladder();
    int sweep_trials = 30;
    bool sweep_toggle_grid = false;

    std::uint64_t seed = 42;
    int workers = 0;  // 0 = all cores

    // Applies parsed keys over the defaults, validating each value and
    // rejecting unknown keys with the offending path.
    static RunConfig from_map(const std::map<std::string, std::string>& kv);
    static RunConfig from_file(const std::string& path);

    // Cross-field validation + derived grid; call after any field mutation.
    void finalize();

    // Canonical dump of every key at its current value.
    std::string dump() const;
};

namespace detail {

inline double parse_double(const std::string& path, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(path, "expected a number, got '" + value + "'");
    }
}

inline long parse_int(const std::string& path, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(path, "expected an integer, got '" + value + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& path, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(path, "expected an unsigned integer, got '" + value + "'");
    }
}

inline bool parse_bool(const std::string& path, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError(path, "expected true/false, got '" + value + "'");
}

inline std::vector<NoiseLevel> parse_noise_levels(const std::string& path, const std::string& value) {
    if (value == "default") return default_noise_ladder();
    std::vector<NoiseLevel> out;
    std::istringstream stream(value);
    std::string item;
    while (std::getline(stream, item, ',')) {
        const auto slash = item.find('/');
        if (slash == std::string::npos) {
            throw ConfigError(path, "expected sigma_t/sigma_r pairs, got '" + item + "'");
        }
        NoiseLevel level;
        level.sigma_t = parse_double(path, item.substr(0, slash));
        level.sigma_r = parse_double(path, item.substr(slash + 1));
        if (level.sigma_t < 0.0 || level.sigma_r < 0.0) {
            throw ConfigError(path, "noise sigmas must be non-negative");
        }
        out.push_back(level);
    }
    if (out.empty()) throw ConfigError(path, "must be non-empty");
    return out;
}

}  // namespace detail

inline RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"grid.x_min", [&](const std::string& p, const std::string& v) { cfg.grid_x_min = detail::parse_double(p, v); }},
        {"grid.x_max", [&](const std::string& p, const std::string& v) { cfg.grid_x_max = detail::parse_double(p, v); }},
        {"grid.y_min", [&](const std::string& p, const std::string& v) { cfg.grid_y_min = detail::parse_double(p, v); }},
        {"grid.y_max", [&](const std::string& p, const std::string& v) { cfg.grid_y_max = detail::parse_double(p, v); }},
        {"grid.cell_size", [&](const std::string& p, const std::string& v) { cfg.grid_cell_size = detail::parse_double(p, v); }},

        {"scene.objects_min", [&](const std::string& p, const std::string& v) { cfg.scene.objects_min = static_cast<int>(detail::parse_int(p, v)); }},
        {"scene.objects_max", [&](const std::string& p, const std::string& v) { cfg.scene.objects_max = static_cast<int>(detail::parse_int(p, v)); }},
        {"scene.length_min", [&](const std::string& p, const std::string& v) { cfg.scene.length_min = detail::parse_double(p, v); }},
        {"scene.length_max", [&](const std::string& p, const std::string& v) { cfg.scene.length_max = detail::parse_double(p, v); }},
        {"scene.width_min", [&](const std::string& p, const std::string& v) { cfg.scene.width_min = detail::parse_double(p, v); }},
        {"scene.width_max", [&](const std::string& p, const std::string& v) { cfg.scene.width_max = detail::parse_double(p, v); }},
        {"scene.place_x", [&](const std::string& p, const std::string& v) { cfg.scene.place_x = detail::parse_double(p, v); }},
        {"scene.place_y", [&](const std::string& p, const std::string& v) { cfg.scene.place_y = detail::parse_double(p, v); }},
        {"scene.placement_margin", [&](const std::string& p, const std::string& v) { cfg.scene.placement_margin = detail::parse_double(p, v); }},
        {"scene.max_place_attempts", [&](const std::string& p, const std::string& v) { cfg.scene.max_place_attempts = static_cast<int>(detail::parse_int(p, v)); }},
        {"scene.agents", [&](const std::string& p, const std::string& v) { cfg.scene.n_agents = static_cast<int>(detail::parse_int(p, v)); }},
        {"scene.agent_spread", [&](const std::string& p, const std::string& v) { cfg.scene.agent_spread = detail::parse_double(p, v); }},
        {"scene.agent_yaw_deg", [&](const std::string& p, const std::string& v) { cfg.scene.agent_yaw_deg = detail::parse_double(p, v); }},
        {"scene.p_occ", [&](const std::string& p, const std::string& v) { cfg.scene.p_occ = detail::parse_double(p, v); }},
        {"scene.comm_range", [&](const std::string& p, const std::string& v) { cfg.scene.comm_range = detail::parse_double(p, v); }},
        {"scene.channels", [&](const std::string& p, const std::string& v) { cfg.scene.channels = static_cast<int>(detail::parse_int(p, v)); }},
        {"scene.signature_active", [&](const std::string& p, const std::string& v) { cfg.scene.signature_active = static_cast<int>(detail::parse_int(p, v)); }},
        {"scene.bump_sigma", [&](const std::string& p, const std::string& v) { cfg.scene.bump_sigma = detail::parse_double(p, v); }},
        {"scene.noise_floor", [&](const std::string& p, const std::string& v) { cfg.scene.noise_floor = detail::parse_double(p, v); }},

        {"noise.sigma_t", [&](const std::string& p, const std::string& v) { cfg.scene.noise.sigma_t = detail::parse_double(p, v); }},
        {"noise.sigma_r", [&](const std::string& p, const std::string& v) { cfg.scene.noise.sigma_r = detail::parse_double(p, v); }},

        {"keypoint.delta", [&](const std::string& p, const std::string& v) { cfg.pipeline.keypoint.delta = detail::parse_double(p, v); }},
        {"keypoint.max_points", [&](const std::string& p, const std::string& v) { cfg.pipeline.keypoint.max_points = static_cast<int>(detail::parse_int(p, v)); }},
        {"keypoint.nms_radius", [&](const std::string& p, const std::string& v) { cfg.pipeline.keypoint.nms_radius = static_cast<int>(detail::parse_int(p, v)); }},
        {"keypoint.coarse_factor", [&](const std::string& p, const std::string& v) { cfg.pipeline.keypoint.coarse_factor = static_cast<int>(detail::parse_int(p, v)); }},

        {"matcher.k_pairs", [&](const std::string& p, const std::string& v) { cfg.pipeline.matcher.min_pairs = static_cast<int>(detail::parse_int(p, v)); }},
        {"matcher.temperature", [&](const std::string& p, const std::string& v) { cfg.pipeline.matcher.temperature = detail::parse_double(p, v); }},
        {"matcher.sinkhorn_iters", [&](const std::string& p, const std::string& v) { cfg.pipeline.matcher.sinkhorn_iters = static_cast<int>(detail::parse_int(p, v)); }},
        {"matcher.confidence_floor", [&](const std::string& p, const std::string& v) { cfg.pipeline.matcher.confidence_floor = detail::parse_double(p, v); }},
        {"matcher.attention_rounds", [&](const std::string& p, const std::string& v) { cfg.pipeline.matcher.attention_rounds = static_cast<int>(detail::parse_int(p, v)); }},
        {"matcher.attention_layers", [&](const std::string& p, const std::string& v) { cfg.pipeline.matcher.attention_layers = static_cast<int>(detail::parse_int(p, v)); }},
        {"matcher.rotary_base", [&](const std::string& p, const std::string& v) { cfg.pipeline.matcher.rotary_base = detail::parse_double(p, v); }},
        {"matcher.dustbin", [&](const std::string& p, const std::string& v) { cfg.pipeline.matcher.dustbin_score = detail::parse_double(p, v); }},
        {"matcher.weights_seed", [&](const std::string& p, const std::string& v) { cfg.pipeline.matcher.weights_seed = detail::parse_u64(p, v); }},

        {"align.tau_t", [&](const std::string& p, const std::string& v) { cfg.pipeline.align.tau_t = detail::parse_double(p, v); }},
        {"align.tau_r_deg", [&](const std::string& p, const std::string& v) { cfg.pipeline.align.tau_r_deg = detail::parse_double(p, v); }},
        {"align.ransac_iterations", [&](const std::string& p, const std::string& v) { cfg.pipeline.align.ransac.iterations = static_cast<int>(detail::parse_int(p, v)); }},
        {"align.ransac_threshold", [&](const std::string& p, const std::string& v) { cfg.pipeline.align.ransac.inlier_threshold = detail::parse_double(p, v); }},
        {"align.ransac_seed", [&](const std::string& p, const std::string& v) { cfg.pipeline.align.ransac.seed = detail::parse_u64(p, v); }},

        {"fusion.levels", [&](const std::string& p, const std::string& v) { cfg.pipeline.fusion.levels = static_cast<int>(detail::parse_int(p, v)); }},
        {"fusion.combine", [&](const std::string& p, const std::string& v) {
             if (v == "mean") cfg.pipeline.fusion.combine = LevelCombine::Mean;
             else if (v == "concat") cfg.pipeline.fusion.combine = LevelCombine::Concat;
             else throw ConfigError(p, "expected mean|concat, got '" + v + "'");
         }},

        {"detect.nms_radius", [&](const std::string& p, const std::string& v) { cfg.pipeline.decode.nms_radius = static_cast<int>(detail::parse_int(p, v)); }},
        {"detect.peak_threshold", [&](const std::string& p, const std::string& v) { cfg.pipeline.decode.peak_threshold = detail::parse_double(p, v); }},
        {"detect.max_detections", [&](const std::string& p, const std::string& v) { cfg.pipeline.decode.max_detections = static_cast<int>(detail::parse_int(p, v)); }},
        {"detect.prior_length", [&](const std::string& p, const std::string& v) { cfg.pipeline.decode.prior_length = detail::parse_double(p, v); }},
        {"detect.prior_width", [&](const std::string& p, const std::string& v) { cfg.pipeline.decode.prior_width = detail::parse_double(p, v); }},

        {"sweep.noise_levels", [&](const std::string& p, const std::string& v) { cfg.sweep_levels = detail::parse_noise_levels(p, v); }},
        {"sweep.trials_per_level", [&](const std::string& p, const std::string& v) { cfg.sweep_trials = static_cast<int>(detail::parse_int(p, v)); }},
        {"sweep.toggle_grid", [&](const std::string& p, const std::string& v) { cfg.sweep_toggle_grid = detail::parse_bool(p, v); }},

        {"run.seed", [&](const std::string& p, const std::string& v) { cfg.seed = detail::parse_u64(p, v); }},
        {"run.workers", [&](const std::string& p, const std::string& v) { cfg.workers = static_cast<int>(detail::parse_int(p, v)); }},
    };

    for (const auto& [key, value] : kv) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError(key, "unknown config key");
        it->second(key, value);
    }
    cfg.finalize();
    return cfg;
}

inline RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_map(parse_config_text(buf.str()));
}

inline void RunConfig::finalize() {
    scene.grid = GridSpec::make(grid_x_min, grid_x_max, grid_y_min, grid_y_max, grid_cell_size);

    auto require = [](bool ok, const std::string& path, const std::string& message) {
        if (!ok) throw ConfigError(path, message);
    };
    require(pipeline.keypoint.delta >= 0.0 && pipeline.keypoint.delta <= 1.0, "keypoint.delta",
            "must be in [0, 1]");
    require(pipeline.keypoint.max_points > 0, "keypoint.max_points", "must be positive");
    require(pipeline.keypoint.nms_radius >= 0, "keypoint.nms_radius", "must be non-negative");
    require(pipeline.keypoint.coarse_factor >= 1, "keypoint.coarse_factor", "must be >= 1");
    require(pipeline.matcher.min_pairs >= 2, "matcher.k_pairs", "must be >= 2");
    require(pipeline.matcher.temperature > 0.0, "matcher.temperature", "must be positive");
    require(pipeline.matcher.sinkhorn_iters >= 1, "matcher.sinkhorn_iters", "must be >= 1");
    require(pipeline.matcher.confidence_floor >= 0.0 && pipeline.matcher.confidence_floor <= 1.0,
            "matcher.confidence_floor", "must be in [0, 1]");
    require(pipeline.matcher.attention_rounds >= 0, "matcher.attention_rounds", "must be >= 0");
    require(pipeline.matcher.attention_layers >= 1, "matcher.attention_layers", "must be >= 1");
    require(pipeline.align.tau_t > 0.0, "align.tau_t", "must be positive");
    require(pipeline.align.tau_r_deg > 0.0, "align.tau_r_deg", "must be positive");
    require(pipeline.align.ransac.iterations >= 1, "align.ransac_iterations", "must be >= 1");
    require(pipeline.align.ransac.inlier_threshold > 0.0, "align.ransac_threshold",
            "must be positive");
    require(pipeline.fusion.levels >= 1, "fusion.levels", "must be >= 1");
    const int top_factor = 1 << (pipeline.fusion.levels - 1);
    require(scene.grid.H % top_factor == 0 && scene.grid.W % top_factor == 0, "fusion.levels",
            "grid dims " + std::to_string(scene.grid.W) + "x" + std::to_string(scene.grid.H) +
                " not divisible by " + std::to_string(top_factor));
    require(pipeline.decode.peak_threshold >= 0.0 && pipeline.decode.peak_threshold <= 1.0,
            "detect.peak_threshold", "must be in [0, 1]");
    require(pipeline.decode.nms_radius >= 0, "detect.nms_radius", "must be non-negative");
    require(scene.objects_min >= 0 && scene.objects_max >= scene.objects_min, "scene.objects_min",
            "need 0 <= objects_min <= objects_max");
    require(scene.n_agents >= 2, "scene.agents", "must be >= 2");
    require(scene.p_occ >= 0.0 && scene.p_occ < 1.0, "scene.p_occ", "must be in [0, 1)");
    require(scene.comm_range > 0.0, "scene.comm_range", "must be positive");
    require(scene.channels >= 2 && scene.channels % 2 == 0, "scene.channels",
            "must be even and >= 2");
    require(scene.noise.sigma_t >= 0.0, "noise.sigma_t", "must be non-negative");
    require(scene.noise.sigma_r >= 0.0, "noise.sigma_r", "must be non-negative");
    require(scene.bump_sigma > 0.0, "scene.bump_sigma", "must be positive");
    require(scene.noise_floor >= 0.0, "scene.noise_floor", "must be non-negative");
    require(sweep_trials >= 1, "sweep.trials_per_level", "must be >= 1");
    require(!sweep_levels.empty(), "sweep.noise_levels", "must be non-empty");
    require(workers >= 0, "run.workers", "must be >= 0");

    pipeline.align.ransac.min_inliers = std::max(pipeline.matcher.min_pairs, 3);
}

inline std::string RunConfig::dump() const {
    std::ostringstream out;
    out.precision(10);
    out << "grid.x_min = " << grid_x_min << "\n";
    out << "grid.x_max = " << grid_x_max << "\n";
    out << "grid.y_min = " << grid_y_min << "\n";
    out << "grid.y_max = " << grid_y_max << "\n";
    out << "grid.cell_size = " << grid_cell_size << "\n";
    out << "scene.objects_min = " << scene.objects_min << "\n";
    out << "scene.objects_max = " << scene.objects_max << "\n";
    out << "scene.length_min = " << scene.length_min << "\n";
    out << "scene.length_max = " << scene.length_max << "\n";
    out << "scene.width_min = " << scene.width_min << "\n";
    out << "scene.width_max = " << scene.width_max << "\n";
    out << "scene.place_x = " << scene.place_x << "\n";
    out << "scene.place_y = " << scene.place_y << "\n";
    out << "scene.placement_margin = " << scene.placement_margin << "\n";
    out << "scene.max_place_attempts = " << scene.max_place_attempts << "\n";
    out << "scene.agents = " << scene.n_agents << "\n";
    out << "scene.agent_spread = " << scene.agent_spread << "\n";
    out << "scene.agent_yaw_deg = " << scene.agent_yaw_deg << "\n";
    out << "scene.p_occ = " << scene.p_occ << "\n";
    out << "scene.comm_range = " << scene.comm_range << "\n";
    out << "scene.channels = " << scene.channels << "\n";
    out << "scene.signature_active = " << scene.signature_active << "\n";
    out << "scene.bump_sigma = " << scene.bump_sigma << "\n";
    out << "scene.noise_floor = " << scene.noise_floor << "\n";
    out << "noise.sigma_t = " << scene.noise.sigma_t << "\n";
    out << "noise.sigma_r = " << scene.noise.sigma_r << "\n";
    out << "keypoint.delta = " << pipeline.keypoint.delta << "\n";
    out << "keypoint.max_points = " << pipeline.keypoint.max_points << "\n";
    out << "keypoint.nms_radius = " << pipeline.keypoint.nms_radius << "\n";
    out << "keypoint.coarse_factor = " << pipeline.keypoint.coarse_factor << "\n";
    out << "matcher.k_pairs = " << pipeline.matcher.min_pairs << "\n";
    out << "matcher.temperature = " << pipeline.matcher.temperature << "\n";
    out << "matcher.sinkhorn_iters = " << pipeline.matcher.sinkhorn_iters << "\n";
    out << "matcher.confidence_floor = " << pipeline.matcher.confidence_floor << "\n";
    out << "matcher.attention_rounds = " << pipeline.matcher.attention_rounds << "\n";
    out << "matcher.attention_layers = " << pipeline.matcher.attention_layers << "\n";
    out << "matcher.rotary_base = " << pipeline.matcher.rotary_base << "\n";
    out << "matcher.dustbin = " << pipeline.matcher.dustbin_score << "\n";
    out << "matcher.weights_seed = " << pipeline.matcher.weights_seed << "\n";
    out << "align.tau_t = " << pipeline.align.tau_t << "\n";
    out << "align.tau_r_deg = " << pipeline.align.tau_r_deg << "\n";
    out << "align.ransac_iterations = " << pipeline.align.ransac.iterations << "\n";
    out << "align.ransac_threshold = " << pipeline.align.ransac.inlier_threshold << "\n";
    out << "align.ransac_seed = " << pipeline.align.ransac.seed << "\n";
    out << "fusion.levels = " << pipeline.fusion.levels << "\n";
    out << "fusion.combine = " << (pipeline.fusion.combine == LevelCombine::Mean ? "mean" : "concat") << "\n";
    out << "detect.nms_radius = " << pipeline.decode.nms_radius << "\n";
    out << "detect.peak_threshold = " << pipeline.decode.peak_threshold << "\n";
    out << "detect.max_detections = " << pipeline.decode.max_detections << "\n";
    out << "detect.prior_length = " << pipeline.decode.prior_length << "\n";
    out << "detect.prior_width = " << pipeline.decode.prior_width << "\n";
    out << "sweep.noise_levels = ";
    for (std::size_t i = 0; i < sweep_levels.size(); ++i) {
        if (i) out << ",";
        out << sweep_levels[i].sigma_t << "/" << sweep_levels[i].sigma_r;
    }
    out << "\n";
    out << "sweep.trials_per_level = " << sweep_trials << "\n";
    out << "sweep.toggle_grid = " << (sweep_toggle_grid ? "true" : "false") << "\n";
    out << "run.seed = " << seed << "\n";
    out << "run.workers = " << workers << "\n";
    return out.str();
}

}  // namespace feakm
