#include "semsplat/config.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <variant>
#include <vector>

namespace semsplat {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

using Target = std::variant<int*, std::uint64_t*, double*, bool*>;

struct Binding {
    std::string key;
    Target target;
};

std::vector<Binding> bindings(RunConfig& c) {
    auto& s = c.synth;
    auto& t = c.pipeline.tracking;
    auto& m = c.pipeline.mapping;
    auto& g = c.pipeline.graph;
    auto& p = c.pipeline;
    return {
        {"synth.seed", &s.seed},
        {"synth.gaussian_count", &s.gaussian_count},
        {"synth.orbit_radius", &s.trajectory.radius},
        {"synth.orbit_height", &s.trajectory.height},
        {"synth.degrees_per_frame", &s.trajectory.degrees_per_frame},
        {"synth.start_degrees", &s.trajectory.start_degrees},
        {"synth.frame_count", &s.frame_count},
        {"synth.width", &s.width},
        {"synth.height", &s.height},
        {"synth.class_count", &s.class_count},
        {"synth.label_flip_rate", &s.label_flip_rate},
        {"synth.feature_noise", &s.feature_noise},
        {"synth.feature_dim", &s.feature_dim},
        {"synth.focal_scale", &s.focal_scale},
        {"synth.coverage_threshold", &s.coverage_threshold},
        {"synth.min_mask_pixels", &s.min_mask_pixels},

        {"tracking.max_iterations", &t.max_iterations},
        {"tracking.rotation_step", &t.rotation_step},
        {"tracking.translation_step", &t.translation_step},
        {"tracking.convergence_tol", &t.convergence_tol},
        {"tracking.w_rgb", &t.weights.rgb},
        {"tracking.w_depth", &t.weights.depth},
        {"tracking.w_semantic", &t.weights.semantic},
        {"tracking.silhouette_gate", &t.silhouette_gate},

        {"mapping.top_k", &m.top_k},
        {"mapping.refine_iterations", &m.refine_iterations},
        {"mapping.densify_silhouette_threshold", &m.densify_silhouette_threshold},
        {"mapping.densify_depth_error_factor", &m.densify_depth_error_factor},
        {"mapping.densify_stride", &m.densify_stride},
        {"mapping.sc_weight", &m.sc_weight},
        {"mapping.overlap_voxel", &m.overlap_voxel},
        {"mapping.silhouette_gate", &m.silhouette_gate},
        {"mapping.prune_opacity", &m.prune_opacity},
        {"mapping.w_rgb", &m.weights.rgb},
        {"mapping.w_depth", &m.weights.depth},
        {"mapping.w_semantic", &m.weights.semantic},
        {"mapping.lr_position", &m.learning_rates.position},
        {"mapping.lr_radius", &m.learning_rates.radius},
        {"mapping.lr_opacity", &m.learning_rates.opacity},
        {"mapping.lr_color", &m.learning_rates.color},
        {"mapping.lr_semantic", &m.learning_rates.semantic},

        {"graph.tau", &g.tau},
        {"graph.window", &g.window},
        {"graph.cluster_threshold", &g.cluster_threshold},

        {"pipeline.keyframe_every", &p.keyframe_every},
        {"pipeline.semantic_enabled", &p.semantic_enabled},
        {"pipeline.consistency_enabled", &p.consistency_enabled},
    };
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

bool parse_bool(const std::string& text, bool& out) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") {
        out = true;
        return true;
    }
    if (text == "false" || text == "0" || text == "no" || text == "off") {
        out = false;
        return true;
    }
    return false;
}

std::string where(const KeyValues& kv, int line) { return kv.source + ":" + std::to_string(line) + ": "; }

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& source) {
    KeyValues kv;
    kv.source = source;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string text = trim(raw.substr(0, raw.find('#')));
        if (text.empty()) continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError(where(kv, line) + "expected 'section.key = value'");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        const auto dot = key.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
            throw ConfigError(where(kv, line) + "key '" + key + "' must have the form section.key");
        }
        if (value.empty()) throw ConfigError(where(kv, line) + "missing value for '" + key + "'");
        if (auto it = kv.entries.find(key); it != kv.entries.end()) {
            throw ConfigError(where(kv, line) + "duplicate key '" + key + "' (first set on line " +
                              std::to_string(it->second.line) + ")");
        }
        kv.entries[key] = {value, line};
    }
    return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    return parse_key_values(in, path.string());
}

RunConfig apply_config(const KeyValues& kv, RunConfig base) {
    const auto table = bindings(base);
    for (const auto& [key, entry] : kv.entries) {
        const Binding* binding = nullptr;
        for (const auto& b : table) {
            if (b.key == key) binding = &b;
        }
        if (!binding) throw ConfigError(where(kv, entry.line) + "unknown key '" + key + "'");
        const bool ok = std::visit(
            [&](auto* target) {
                using T = std::remove_pointer_t<decltype(target)>;
                if constexpr (std::is_same_v<T, bool>) {
                    return parse_bool(entry.value, *target);
                } else {
                    return parse_number(entry.value, *target);
                }
            },
            binding->target);
        if (!ok) throw ConfigError(where(kv, entry.line) + "cannot parse '" + entry.value + "' for '" + key + "'");
    }
    try {
        base.synth.validate();
        base.pipeline.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(kv.source + ": " + e.what());
    }
    return base;
}

RunConfig load_config(const std::filesystem::path& path) { return apply_config(load_key_values(path)); }

std::string format_config(const RunConfig& cfg) {
    RunConfig copy = cfg;
    std::ostringstream out;
    std::string section;
    for (const auto& b : bindings(copy)) {
        const std::string s = b.key.substr(0, b.key.find('.'));
        if (s != section) {
            if (!section.empty()) out << '\n';
            section = s;
        }
        out << b.key << " = ";
        std::visit(
            [&](auto* target) {
                using T = std::remove_pointer_t<decltype(target)>;
                if constexpr (std::is_same_v<T, bool>) {
                    out << (*target ? "true" : "false");
                } else {
                    char buf[32];
                    const auto res = std::to_chars(buf, buf + sizeof buf, *target);
                    out.write(buf, res.ptr - buf);
                }
            },
            b.target);
        out << '\n';
    }
    return out.str();
}

}  // namespace semsplat
