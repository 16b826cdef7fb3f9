#include "semsplat/results_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "semsplat/image_io.hpp"

namespace semsplat {

namespace {

std::string frame_stem(std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%06zu", i);
    return buf;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

void write_renders(const std::filesystem::path& dir, const std::vector<FrameRender>& renders) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < renders.size(); ++i) {
        const std::string stem = frame_stem(i);
        write_pfm(dir / (stem + "_color.pfm"), renders[i].rgb);
        write_pfm(dir / (stem + "_depth.pfm"), renders[i].depth);
        write_png_gray16(dir / (stem + "_sem.png"), renders[i].labels);
    }
}

std::vector<FrameRender> read_renders(const std::filesystem::path& dir, std::size_t frame_count) {
    std::vector<FrameRender> out;
    for (std::size_t i = 0; i < frame_count; ++i) {
        const std::string stem = frame_stem(i);
        FrameRender r;
        for (const char* suffix : {"_color.pfm", "_depth.pfm", "_sem.png"}) {
            const auto path = dir / (stem + suffix);
            if (!std::filesystem::exists(path)) {
                throw LoadError(path.string(), "missing render for frame " + std::to_string(i) + " of " +
                                                   std::to_string(frame_count));
            }
        }
        r.rgb = read_pfm(dir / (stem + "_color.pfm"));
        r.depth = read_pfm(dir / (stem + "_depth.pfm"));
        r.labels = read_png_gray16(dir / (stem + "_sem.png"));
        out.push_back(std::move(r));
    }
    return out;
}

nlohmann::json frame_report_json(const FrameReport& r) {
    return {
        {"frame", r.frame_index},
        {"tracked", r.tracked},
        {"degenerate", r.degenerate},
        {"tracking_iterations", r.tracking_iterations},
        {"tracking_loss", r.tracking_loss},
        {"consistency_loss", r.consistency_loss},
        {"objective", r.objective},
        {"gaussians_added", r.gaussians_added},
        {"gaussian_count", r.gaussian_count},
        {"clusters", r.clusters},
        {"relabeled_masks", r.relabeled_masks},
        {"keyframes", r.keyframe_ids},
    };
}

nlohmann::json metrics_json(const MetricsReport& m) {
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t i = 0; i < m.per_frame.size(); ++i) {
        const auto& f = m.per_frame[i];
        frames.push_back({{"frame", i},
                          {"ate", optional_json(f.ate)},
                          {"psnr", f.psnr},
                          {"ssim", f.ssim},
                          {"depth_l1", optional_json(f.depth_l1)},
                          {"seg_l1", f.seg_l1}});
    }
    return {
        {"ate_rmse", optional_json(m.ate_rmse)},
        {"psnr", m.psnr},
        {"ssim", m.ssim},
        {"depth_l1", optional_json(m.depth_l1)},
        {"seg_l1", m.seg_l1},
        {"lpips", nullptr},
        {"per_frame", frames},
    };
}

void write_run_outputs(const std::filesystem::path& out, const SequenceBundle& bundle, const RunResult& result,
                       bool renders) {
    std::filesystem::create_directories(out);
    std::vector<double> stamps;
    for (const auto& f : bundle.frames) stamps.push_back(f.timestamp);
    write_tum_trajectory(out / "trajectory.txt", stamps, result.trajectory);

    nlohmann::json frames = nlohmann::json::array();
    for (const auto& r : result.reports) frames.push_back(frame_report_json(r));
    write_json(out / "report.json", {{"frame_count", result.trajectory.size()},
                                     {"final_gaussian_count", result.map.size()},
                                     {"frames", frames}});
    if (renders) write_renders(out / "renders", result.renders);
}

MetricsReport evaluate_run_dir(const SequenceBundle& bundle, const std::filesystem::path& result_dir) {
    const auto traj_path = result_dir / "trajectory.txt";
    if (!std::filesystem::exists(traj_path)) throw LoadError(traj_path.string(), "missing trajectory");
    const auto timed = read_tum_trajectory(traj_path);
    if (timed.size() != bundle.frames.size()) {
        throw InvalidArgument("trajectory has " + std::to_string(timed.size()) + " poses but the bundle has " +
                              std::to_string(bundle.frames.size()) + " frames");
    }
    std::vector<Pose> poses;
    for (const auto& t : timed) poses.push_back(t.pose);
    const auto renders = read_renders(result_dir / "renders", bundle.frames.size());
    return evaluate_sequence(bundle, poses, renders);
}

std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::size_t name_width = 6;
    for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
    auto cell = [](const std::optional<double>& v, int precision) {
        if (!v) return std::string("n/a");
        std::ostringstream s;
        s << std::fixed << std::setprecision(precision) << *v;
        return s.str();
    };
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_width)) << "config";
    for (const char* h : {"ATE RMSE", "PSNR", "SSIM", "LPIPS", "Depth L1", "Seg L1"}) out << "  " << std::setw(9) << h;
    out << '\n';
    for (const auto& [name, m] : rows) {
        out << std::left << std::setw(static_cast<int>(name_width)) << name;
        for (const auto& c : {cell(m.ate_rmse, 5), cell(m.psnr, 2), cell(m.ssim, 4), cell(std::nullopt, 0),
                              cell(m.depth_l1, 5), cell(m.seg_l1, 5)}) {
            out << "  " << std::setw(9) << c;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace semsplat
