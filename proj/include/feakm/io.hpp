#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "feakm/eval.hpp"
#include "feakm/grid.hpp"
#include "feakm/scene.hpp"
#include "feakm/sweep.hpp"

namespace feakm {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

inline std::string detections_csv(const DetectionSet& dets) {
    std::string out = "x_m,y_m,length_m,width_m,yaw_rad,score\n";
    char line[256];
    for (const Detection& d : dets.boxes) {
        std::snprintf(line, sizeof(line), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", d.box.center.x(),
                      d.box.center.y(), d.box.length, d.box.width, d.box.yaw, d.score);
        out += line;
    }
    return out;
}

// One JSON object per line: kind=agent rows first (true + reported pose),
// then kind=object rows.
inline std::string scene_jsonl(const Scene& scene) {
    std::string out;
    for (std::size_t a = 0; a < scene.agent_poses_true.size(); ++a) {
        const Pose& t = scene.agent_poses_true[a];
        const Pose& r = scene.agent_poses_reported[a];
        nlohmann::json j{{"kind", "agent"},
                         {"index", a},
                         {"true_pose", {t.x, t.y, t.yaw}},
                         {"reported_pose", {r.x, r.y, r.yaw}}};
        out += j.dump() + "\n";
    }
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        const SceneObject& obj = scene.objects[o];
        std::vector<int> seen_by;
        for (std::size_t a = 0; a < scene.visible.size(); ++a) {
            if (scene.visible[a][o]) seen_by.push_back(static_cast<int>(a));
        }
        nlohmann::json j{{"kind", "object"},
                         {"id", obj.id},
                         {"cx", obj.center.x()},
                         {"cy", obj.center.y()},
                         {"length", obj.length},
                         {"width", obj.width},
                         {"yaw", obj.yaw},
                         {"seen_by", seen_by}};
        out += j.dump() + "\n";
    }
    return out;
}

// Binary tensor dump: magic "FKMT", then u32 H, W, D (little-endian), then
// H*W*D float32 values in (row, col, channel) order.
inline void write_tensor_file(const std::filesystem::path& path, const FeatureGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write("FKMT", 4);
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(grid.spec.H),
                                   static_cast<std::uint32_t>(grid.spec.W),
                                   static_cast<std::uint32_t>(grid.channels)};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(grid.data.data()),
              static_cast<std::streamsize>(grid.data.size() * sizeof(float)));
}

// AP@0.5 vs noise level, one polyline per variant.
inline std::string sweep_svg(const SweepResult& result) {
    std::vector<std::string> variants;
    std::vector<double> sigmas;
    for (const SweepRow& r : result.rows) {
        bool known_variant = false;
        for (const std::string& v : variants) known_variant |= v == r.variant;
        if (!known_variant) variants.push_back(r.variant);
        bool known_sigma = false;
        for (double s : sigmas) known_sigma |= s == r.sigma_t + 100.0 * r.sigma_r;
        if (!known_sigma) sigmas.push_back(r.sigma_t + 100.0 * r.sigma_r);
    }
    const int width = 720, height = 420;
    const double m_left = 60, m_right = 160, m_top = 30, m_bottom = 50;
    const double plot_w = width - m_left - m_right;
    const double plot_h = height - m_top - m_bottom;
    const std::size_t n_levels = sigmas.size();

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
    std::string svg;
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                  "font-family=\"sans-serif\" font-size=\"12\">\n",
                  width, height);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes + gridlines
    for (int i = 0; i <= 10; i += 2) {
        const double y = m_top + plot_h * (1.0 - i / 10.0);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.1f</text>\n",
                      m_left, y, m_left + plot_w, y, m_left - 6, y + 4, i / 10.0);
        svg += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">noise level index "
                  "(sigma_t m / sigma_r deg)</text>\n",
                  m_left + plot_w / 2, height - 12.0);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"16\" y=\"%.1f\" transform=\"rotate(-90 16 %.1f)\" "
                  "text-anchor=\"middle\">AP@0.5</text>\n",
                  m_top + plot_h / 2, m_top + plot_h / 2);
    svg += buf;

    for (std::size_t v = 0; v < variants.size(); ++v) {
        std::string points;
        std::size_t level = 0;
        for (const SweepRow& r : result.rows) {
            if (r.variant != variants[v]) continue;
            const double x = m_left + (n_levels <= 1 ? 0.0 : plot_w * level / (n_levels - 1.0));
            const double y = m_top + plot_h * (1.0 - std::clamp(r.ap50, 0.0, 1.0));
            std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", x, y);
            points += buf;
            ++level;
        }
        const char* color = colors[v % (sizeof(colors) / sizeof(colors[0]))];
        std::snprintf(buf, sizeof(buf),
                      "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"2\" points=\"%s\"/>\n",
                      color, points.c_str());
        svg += buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" fill=\"%s\">%s</text>\n",
                      m_left + plot_w + 10, m_top + 16.0 * (v + 1), color, variants[v].c_str());
        svg += buf;
    }
    // x tick labels
    for (std::size_t level = 0; level < n_levels; ++level) {
        const SweepRow& r = result.rows[level * (result.rows.size() / n_levels)];
        const double x = m_left + (n_levels <= 1 ? 0.0 : plot_w * level / (n_levels - 1.0));
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"9\">"
                      "%.1f/%.1f</text>\n",
                      x, m_top + plot_h + 16, r.sigma_t, r.sigma_r);
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace feakm
