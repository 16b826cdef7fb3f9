#pragma once

#include <vector>

#include "semsplat/scene_model.hpp"
#include "semsplat/splat_renderer.hpp"

namespace semsplat {

/// Per-term weights of the masked L1 frame loss.
struct LossWeights {
    double rgb = 0.5;
    double depth = 1.0;
    double semantic = 1.5;
};

struct LossTerms {
    double depth = 0.0;     // unweighted sums of absolute residuals
    double rgb = 0.0;
    double semantic = 0.0;
    double total = 0.0;     // weighted sum
    std::size_t gated_pixels = 0;
};

/// Masked weighted L1 between a render and an observation. A pixel counts when its
/// rendered silhouette exceeds `gate`; the depth term additionally needs a valid
/// observed depth. Observed labels are compared as one-hot vectors. When `grad` is
/// non-null it receives `grad_scale * dLoss/d(render)` (accumulated, not overwritten).
LossTerms frame_loss(const RenderedFrame& rendered, const Observation& observed, const LossWeights& weights,
                     double gate, RenderWeights* grad = nullptr, double grad_scale = 1.0);

/// frame_loss with the default weights and the 0.99 gate; returns the weighted total.
double tracking_loss(const RenderedFrame& rendered, const Observation& observed,
                     const LossWeights& weights = {}, double gate = 0.99);

struct TrackingConfig {
    int max_iterations = 60;
    double rotation_step = 2e-3;
    double translation_step = 1e-3;
    double convergence_tol = 1e-6;
    LossWeights weights;
    double silhouette_gate = 0.99;

    void validate() const;
};

struct TrackResult {
    Pose pose;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int iterations = 0;
    bool degenerate = false;            // no gated pixels at the initial pose
    std::vector<double> loss_history;   // accepted losses, starting with the initial one
};

/// Estimates the camera pose for `obs` against a frozen map by Adam steps in the
/// pose tangent space; rejected steps are retried at half the length.
TrackResult track_frame(const GaussianMap& map, const Pose& init_pose, const Observation& obs,
                        const CameraIntrinsics& intr, const TrackingConfig& cfg);

/// Applies the motion prev_prev -> prev once more.
Pose constant_velocity_init(const Pose& prev, const Pose& prev_prev);

}  // namespace semsplat
