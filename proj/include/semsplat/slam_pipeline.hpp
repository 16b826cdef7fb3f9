#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semsplat/dataset_io.hpp"
#include "semsplat/mapper.hpp"
#include "semsplat/metrics.hpp"
#include "semsplat/semantic_graph.hpp"
#include "semsplat/tracker.hpp"

namespace semsplat {

struct GraphConfig {
    double tau = kDefaultTau;
    int window = kDefaultWindow;
    double cluster_threshold = kScoreThreshold;
};

struct PipelineConfig {
    TrackingConfig tracking;
    MappingConfig mapping;
    GraphConfig graph;
    int keyframe_every = 5;
    bool semantic_enabled = true;
    bool consistency_enabled = true;

    void validate() const;
};

struct PipelineState {
    explicit PipelineState(int semantic_dim) : map(semantic_dim) {}

    GaussianMap map;
    std::vector<Pose> trajectory;
    std::vector<Keyframe> keyframes;
    std::vector<MaskNode> graph_window;
    std::map<int, LabelImage> updated_semantics;
    /// Observed labels of the frames still inside the window.
    std::map<int, LabelImage> window_observed;
    int frame_cursor = 0;
};

struct FrameReport {
    int frame_index = 0;
    bool tracked = false;
    bool degenerate = false;
    int tracking_iterations = 0;
    double tracking_loss = 0.0;  // L_t at the final pose
    double consistency_loss = 0.0;
    double objective = 0.0;  // L_opt after refinement, 0 on frames without mapping
    std::size_t gaussians_added = 0;
    std::size_t gaussian_count = 0;
    std::size_t clusters = 0;
    std::size_t relabeled_masks = 0;
    std::vector<int> keyframe_ids;  // empty unless the map was refined
};

/// Tracks, densifies, updates the label window and refines on keyframes. `records`
/// are the frame's mask records; `anchor` fixes the first pose.
FrameReport process_frame(PipelineState& state, const Observation& obs, const std::vector<FeatureRecord>& records,
                          const CameraIntrinsics& intr, const PipelineConfig& cfg,
                          const std::optional<Pose>& anchor = std::nullopt);

struct RunResult {
    std::vector<Pose> trajectory;
    GaussianMap map;
    std::vector<FrameReport> reports;
    std::vector<LabelImage> updated_semantics;
    std::vector<FrameRender> renders;  // final map at the estimated poses
    MetricsReport metrics;
};

/// Runs the whole bundle. Geometric-only bundles force the semantic switches off.
RunResult run_sequence(const SequenceBundle& bundle, const PipelineConfig& cfg);

/// Renders the map at each pose into colour, depth and argmax labels.
std::vector<FrameRender> render_frames(const GaussianMap& map, const std::vector<Pose>& poses,
                                       const CameraIntrinsics& intr);

}  // namespace semsplat
