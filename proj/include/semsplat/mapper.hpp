#pragma once

#include <vector>

#include "semsplat/image.hpp"
#include "semsplat/scene_model.hpp"
#include "semsplat/tracker.hpp"

namespace semsplat {

struct Keyframe {
    int frame_index = 0;
    Pose pose;
    Observation observation;
    std::vector<Vec3> point_cloud;  // world-space points from valid depth
};

/// Back-projects every valid depth pixel of `obs` into world space.
std::vector<Vec3> back_project(const Observation& obs, const Pose& pose, const CameraIntrinsics& intr);
Keyframe make_keyframe(const Observation& obs, const Pose& pose, const CameraIntrinsics& intr);

struct MappingLearningRates {
    double position = 5e-4;
    double radius = 5e-4;
    double opacity = 0.05;
    double color = 0.01;
    double semantic = 0.05;
};

struct MappingConfig {
    int top_k = 5;
    int refine_iterations = 60;
    double densify_silhouette_threshold = 0.5;
    double densify_depth_error_factor = 50.0;
    int densify_stride = 2;
    double sc_weight = 2.0;
    double overlap_voxel = 0.05;
    /// Pixels with silhouette above this enter the mapping loss; 0 keeps every pixel.
    double silhouette_gate = 0.0;
    double prune_opacity = 0.005;
    LossWeights weights;
    MappingLearningRates learning_rates;

    void validate() const;
};

/// Fraction of `current`'s points whose voxel is occupied by `candidate`.
double overlap(const Keyframe& current, const Keyframe& candidate, double voxel);

/// [current, then up to top_k history keyframes by descending overlap]; ties go to
/// the more recent frame.
std::vector<Keyframe> select_keyframes(const Keyframe& current, const std::vector<Keyframe>& history,
                                       const MappingConfig& cfg);

/// Adds one Gaussian per strided pixel that the map leaves uncovered or explains badly.
/// Returns the number added.
std::size_t densify(GaussianMap& map, const Observation& obs, const Pose& pose, const CameraIntrinsics& intr,
                    const MappingConfig& cfg);

/// A frame rendered at `pose` and compared against consistency-corrected labels.
struct SemanticTarget {
    int frame_index = 0;
    Pose pose;
    LabelImage labels;
};

struct ObjectiveTerms {
    double total = 0.0;        // sum of per-keyframe losses
    double consistency = 0.0;  // L_sc
    double objective = 0.0;    // total + sc_weight * consistency
};

/// total + sc_weight * consistency.
double compose_objective(double total, double consistency, double sc_weight = 2.0);

ObjectiveTerms evaluate_objective(const GaussianMap& map, const std::vector<Keyframe>& keyframes,
                                  const std::vector<SemanticTarget>& sc_frames, const CameraIntrinsics& intr,
                                  const MappingConfig& cfg);

struct RefineResult {
    double initial_objective = 0.0;
    double final_objective = 0.0;
    int iterations = 0;
    std::size_t pruned = 0;
    std::vector<double> loss_history;  // accepted objectives
};

/// Optimises every Gaussian parameter with the keyframe poses frozen, then prunes
/// near-transparent Gaussians. With sc_weight 0 the sc_frames are ignored.
RefineResult refine_map(GaussianMap& map, const std::vector<Keyframe>& keyframes,
                        const std::vector<SemanticTarget>& sc_frames, const CameraIntrinsics& intr,
                        const MappingConfig& cfg);

}  // namespace semsplat
