#pragma once

#include <optional>
#include <vector>

#include "semsplat/dataset_io.hpp"
#include "semsplat/image.hpp"
#include "semsplat/scene_model.hpp"

namespace semsplat {

inline constexpr double kPsnrCap = 99.0;

/// Rigid (rotation + translation) least-squares alignment of `from` onto `to`.
struct RigidAlignment {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();
};
RigidAlignment align_points(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

/// Per-pose camera-centre residuals after aligning `estimated` onto `ground_truth`.
std::vector<double> ate_residuals(const std::vector<Pose>& estimated, const std::vector<Pose>& ground_truth);
double ate_rmse(const std::vector<Pose>& estimated, const std::vector<Pose>& ground_truth);

double psnr(const ImageF& a, const ImageF& b, double max_value = 1.0);
/// Gaussian-window SSIM (11x11, sigma 1.5) averaged over valid positions and channels.
double ssim(const ImageF& a, const ImageF& b);
/// Mean |a - b| over pixels where `observed` is valid (> 0).
double depth_l1(const ImageF& rendered, const ImageF& observed);
/// Mean one-hot L1 distance between label images, i.e. twice the disagreement rate.
double seg_l1(const LabelImage& rendered, const LabelImage& reference);

/// Per-pixel argmax of the rendered semantics, with the background channel credited
/// with the uncovered mass 1 - silhouette. Ties go to the lower channel.
LabelImage semantic_labels(const ImageF& semantic, const ImageF& silhouette);

struct FrameMetrics {
    std::optional<double> ate;  // aligned camera-centre error
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> depth_l1;  // absent when the frame has no valid depth
    double seg_l1 = 0.0;
};

struct MetricsReport {
    std::optional<double> ate_rmse;
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> depth_l1;
    double seg_l1 = 0.0;
    std::vector<FrameMetrics> per_frame;
};

struct FrameRender {
    ImageF rgb;
    ImageF depth;
    LabelImage labels;
};

/// Scores renders of the final map at the estimated poses against the bundle. ATE needs
/// ground-truth poses and at least two frames; seg L1 prefers reference labels when the
/// bundle carries them.
MetricsReport evaluate_sequence(const SequenceBundle& bundle, const std::vector<Pose>& trajectory,
                                const std::vector<FrameRender>& renders);

}  // namespace semsplat
