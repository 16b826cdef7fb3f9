#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "semsplat/image.hpp"
#include "semsplat/scene_model.hpp"

namespace semsplat {

/// Upper bound on any per-pixel weight; keeps transmittance strictly positive.
inline constexpr double kMaxWeight = 0.9999;
/// Gaussians only reach pixels within this many projected radii of their centre.
inline constexpr double kCutoffRadii = 3.0;
/// Compositing stops once the accumulated transmittance drops below this.
inline constexpr double kMinTransmittance = 1e-4;
/// Edge length of the square screen tiles used for binning.
inline constexpr int kTileSize = 16;

struct ProjectedGaussian {
    Vec2 center_2d = Vec2::Zero();
    double radius_2d = 1.0;
    double depth = 1.0;
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    VecX semantic;
    std::size_t source_index = 0;
    Vec3 camera_point = Vec3::Zero();  // E_t * mu, kept for the backward pass
};

/// Projects `g` through `pose` and `intr`. Returns nullopt when the Gaussian is at or
/// behind the near plane or its cutoff footprint misses the image entirely.
std::optional<ProjectedGaussian> project_gaussian(const Gaussian& g, const Pose& pose,
                                                  const CameraIntrinsics& intr,
                                                  std::size_t source_index = 0);

/// Isotropic 2D falloff scaled by opacity, clamped to [0, kMaxWeight]. The footprint
/// cutoff is applied by the renderer, not here.
double eval_weight(const ProjectedGaussian& pg, const Vec2& pixel);

/// One front-to-back compositing term at a pixel.
struct Contribution {
    std::uint32_t projected = 0;  // index into RenderedFrame::projected()
    std::uint32_t local = 0;      // index into the owning tile's list
    double weight = 0.0;          // f_i(p) after clamping
    bool clamped = false;
};

class RenderedFrame {
public:
    ImageF color;       // H x W x 3
    ImageF depth;       // H x W
    ImageF semantic;    // H x W x S
    ImageF silhouette;  // H x W, 1 - prod(1 - f_i)

    int width() const noexcept { return color.width(); }
    int height() const noexcept { return color.height(); }
    int semantic_dim() const noexcept { return semantic.channels(); }

    /// Contributors at pixel (u, v) in ascending depth order.
    std::span<const Contribution> contributors(int u, int v) const;
    const std::vector<ProjectedGaussian>& projected() const noexcept { return projected_; }

private:
    friend RenderedFrame render(const GaussianMap&, const Pose&, const CameraIntrinsics&);
    friend struct BackwardAccess;

    std::vector<ProjectedGaussian> projected_;
    std::vector<std::vector<std::uint32_t>> tile_lists_;
    std::vector<std::vector<Contribution>> tile_contribs_;
    std::vector<std::uint32_t> pixel_offset_;
    std::vector<std::uint32_t> pixel_count_;
    int tiles_x_ = 0;

    std::uint64_t map_id_ = 0;
    std::uint64_t map_version_ = 0;
    Pose pose_;
    CameraIntrinsics intr_;
};

/// Depth-sorted front-to-back splatting of colour, depth, semantics and silhouette.
/// Empty pixels are black, depth 0, all-zero semantics, silhouette 0.
RenderedFrame render(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr);

/// Rendered semantics with the uncovered mass 1 - s added to channel 0, so empty
/// space reads as background.
ImageF completed_semantics(const RenderedFrame& frame);

/// dLoss/d(output) per pixel and channel. Images left empty are treated as zero.
struct RenderWeights {
    ImageF color;
    ImageF depth;
    ImageF semantic;
    ImageF silhouette;

    static RenderWeights zeros(int width, int height, int semantic_dim);
};

struct GaussianGradient {
    Vec3 position = Vec3::Zero();
    double radius = 0.0;
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    VecX semantic;
};

struct RenderGradients {
    std::vector<GaussianGradient> gaussians;  // indexed like the map
    Vec6 pose = Vec6::Zero();                 // tangent order: rotation, translation
};

/// Exact gradients of sum(weights * outputs) w.r.t. every Gaussian parameter and the
/// pose tangent (see Pose::retract). Throws InvalidState if `frame` was not rendered
/// from this exact map state, pose and intrinsics.
RenderGradients render_backward(const GaussianMap& map, const Pose& pose,
                                const CameraIntrinsics& intr, const RenderedFrame& frame,
                                const RenderWeights& weights);

}  // namespace semsplat
