#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semsplat/metrics.hpp"
#include "semsplat/slam_pipeline.hpp"

namespace semsplat {

/// renders/NNNNNN_color.pfm, NNNNNN_depth.pfm and NNNNNN_sem.png (16-bit labels).
void write_renders(const std::filesystem::path& dir, const std::vector<FrameRender>& renders);
std::vector<FrameRender> read_renders(const std::filesystem::path& dir, std::size_t frame_count);

nlohmann::json frame_report_json(const FrameReport& report);
nlohmann::json metrics_json(const MetricsReport& metrics);

/// trajectory.txt, report.json and, when `renders` is set, renders/.
void write_run_outputs(const std::filesystem::path& out, const SequenceBundle& bundle, const RunResult& result,
                       bool renders = true);

/// Scores a `run` output directory against its bundle. Throws InvalidArgument when the
/// trajectory length does not match the bundle and LoadError for missing files.
MetricsReport evaluate_run_dir(const SequenceBundle& bundle, const std::filesystem::path& result_dir);

/// Fixed-width comparison table, one row per named report. LPIPS is printed as n/a.
std::string metrics_table(const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace semsplat
