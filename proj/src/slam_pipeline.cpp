#include "semsplat/slam_pipeline.hpp"

#include <iostream>

#include "semsplat/splat_renderer.hpp"

namespace semsplat {

void PipelineConfig::validate() const {
    tracking.validate();
    mapping.validate();
    if (!(graph.tau > 0.0 && graph.tau <= 1.0)) throw InvalidArgument("graph.tau must lie in (0,1]");
    if (graph.window < 1) throw InvalidArgument("graph.window must be >= 1");
    if (!(graph.cluster_threshold >= 0.0 && graph.cluster_threshold < 1.0)) {
        throw InvalidArgument("graph.cluster_threshold must lie in [0,1)");
    }
    if (keyframe_every < 1) throw InvalidArgument("pipeline.keyframe_every must be >= 1");
}

namespace {

bool consistency_active(const PipelineConfig& cfg) { return cfg.semantic_enabled && cfg.consistency_enabled; }

void update_label_window(PipelineState& state, const Observation& obs, const std::vector<FeatureRecord>& records,
                         const PipelineConfig& cfg, FrameReport& report) {
    const int f = obs.frame_index;
    const int oldest = f - cfg.graph.window + 1;
    std::erase_if(state.graph_window, [&](const MaskNode& n) { return n.frame_index < oldest; });
    std::erase_if(state.window_observed, [&](const auto& kv) { return kv.first < oldest; });
    for (const auto& r : records) state.graph_window.push_back(MaskNode::from_record(r));
    state.window_observed[f] = obs.semantic;

    const ConsistencyGraph graph = build_graph(state.graph_window, cfg.graph.tau, cfg.graph.window);
    const ClusterResult clusters = cluster(graph, cfg.graph.cluster_threshold);
    for (int t : relabel_targets(clusters, graph)) report.relabeled_masks += t >= 0;
    report.clusters = clusters.cluster_count();
    for (auto& [frame, labels] : relabel_frames(clusters, graph, state.window_observed)) {
        state.updated_semantics[frame] = std::move(labels);
    }
}

}  // namespace

FrameReport process_frame(PipelineState& state, const Observation& obs, const std::vector<FeatureRecord>& records,
                          const CameraIntrinsics& intr, const PipelineConfig& cfg, const std::optional<Pose>& anchor) {
    cfg.validate();
    obs.validate(intr);
    if (obs.frame_index != state.frame_cursor) {
        throw InvalidArgument("expected frame " + std::to_string(state.frame_cursor) + ", got " +
                              std::to_string(obs.frame_index));
    }
    FrameReport report;
    report.frame_index = obs.frame_index;

    TrackingConfig tracking = cfg.tracking;
    MappingConfig mapping = cfg.mapping;
    if (!cfg.semantic_enabled) {
        tracking.weights.semantic = 0.0;
        mapping.weights.semantic = 0.0;
    }
    if (!consistency_active(cfg)) mapping.sc_weight = 0.0;

    Pose pose;
    const std::size_t n = state.trajectory.size();
    if (n == 0) {
        pose = anchor.value_or(Pose::identity());
    } else {
        pose = n >= 2 ? constant_velocity_init(state.trajectory[n - 1], state.trajectory[n - 2]) : state.trajectory[n - 1];
        if (!state.map.empty()) {
            const TrackResult tr = track_frame(state.map, pose, obs, intr, tracking);
            report.tracked = true;
            report.degenerate = tr.degenerate;
            report.tracking_iterations = tr.iterations;
            report.tracking_loss = tr.final_loss;
            if (tr.degenerate) {
                std::cerr << "warning: frame " << obs.frame_index << " has no covered pixels, keeping the predicted pose\n";
            }
            pose = tr.pose;
        }
    }
    state.trajectory.push_back(pose);

    report.gaussians_added = densify(state.map, obs, pose, intr, mapping);

    if (consistency_active(cfg)) {
        update_label_window(state, obs, records, cfg, report);
    } else {
        state.updated_semantics[obs.frame_index] = obs.semantic;
    }

    const bool keyframe = obs.frame_index == 0 || obs.frame_index % cfg.keyframe_every == 0;
    if (keyframe) {
        Keyframe current = make_keyframe(obs, pose, intr);
        const std::vector<Keyframe> selected = select_keyframes(current, state.keyframes, mapping);
        for (const auto& kf : selected) report.keyframe_ids.push_back(kf.frame_index);

        std::vector<SemanticTarget> sc_frames;
        if (consistency_active(cfg)) {
            for (const auto& [frame, _] : state.window_observed) {
                sc_frames.push_back({frame, state.trajectory[static_cast<std::size_t>(frame)], state.updated_semantics.at(frame)});
            }
        }
        if (!state.map.empty()) {
            const RefineResult rr = refine_map(state.map, selected, sc_frames, intr, mapping);
            report.objective = rr.final_objective;
        }
        state.keyframes.push_back(std::move(current));
    }

    if (consistency_active(cfg) && !state.map.empty()) {
        for (const auto& [frame, labels] : state.window_observed) {
            const RenderedFrame rf = render(state.map, state.trajectory[static_cast<std::size_t>(frame)], intr);
            report.consistency_loss += frame_consistency_loss(completed_semantics(rf), state.updated_semantics.at(frame));
        }
    }
    report.gaussian_count = state.map.size();
    ++state.frame_cursor;
    return report;
}

std::vector<FrameRender> render_frames(const GaussianMap& map, const std::vector<Pose>& poses,
                                       const CameraIntrinsics& intr) {
    std::vector<FrameRender> out;
    for (const auto& pose : poses) {
        const RenderedFrame rf = render(map, pose, intr);
        out.push_back({rf.color, rf.depth, semantic_labels(rf.semantic, rf.silhouette)});
    }
    return out;
}

RunResult run_sequence(const SequenceBundle& bundle, const PipelineConfig& cfg) {
    bundle.validate();
    PipelineConfig effective = cfg;
    if (bundle.geometric_only) {
        effective.semantic_enabled = false;
        effective.consistency_enabled = false;
    }
    effective.validate();

    PipelineState state(bundle.semantic_dim);
    std::optional<Pose> anchor;
    if (bundle.gt_poses && !bundle.gt_poses->empty()) anchor = bundle.gt_poses->front();

    RunResult result{{}, GaussianMap(bundle.semantic_dim), {}, {}, {}, {}};
    for (std::size_t i = 0; i < bundle.frames.size(); ++i) {
        Observation obs = bundle.frames[i];
        obs.frame_index = static_cast<int>(i);
        result.reports.push_back(process_frame(state, obs, bundle.feature_records[i], bundle.intrinsics, effective, anchor));
    }
    result.trajectory = state.trajectory;
    for (auto& [frame, labels] : state.updated_semantics) result.updated_semantics.push_back(std::move(labels));
    result.renders = render_frames(state.map, result.trajectory, bundle.intrinsics);
    result.metrics = evaluate_sequence(bundle, result.trajectory, result.renders);
    result.map = std::move(state.map);
    return result;
}

}  // namespace semsplat
