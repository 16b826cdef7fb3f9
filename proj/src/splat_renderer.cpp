#include "semsplat/splat_renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semsplat/parallel.hpp"

namespace semsplat {

std::optional<ProjectedGaussian> project_gaussian(const Gaussian& g, const Pose& pose,
                                                  const CameraIntrinsics& intr,
                                                  std::size_t source_index) {
    const Vec3 pc = transform_point(pose, g.position);
    const double z = pc.z();
    if (!(z > kNearPlane)) return std::nullopt;

    ProjectedGaussian pg;
    pg.center_2d = {intr.focal_x * pc.x() / z + intr.principal_x,
                    intr.focal_y * pc.y() / z + intr.principal_y};
    pg.radius_2d = intr.focal_x * g.radius / z;
    pg.depth = z;

    const double reach = kCutoffRadii * pg.radius_2d;
    if (pg.center_2d.x() + reach < 0.0 || pg.center_2d.x() - reach > intr.width - 1 ||
        pg.center_2d.y() + reach < 0.0 || pg.center_2d.y() - reach > intr.height - 1) {
        return std::nullopt;
    }
    pg.opacity = g.opacity;
    pg.color = g.color;
    pg.semantic = g.semantic;
    pg.source_index = source_index;
    pg.camera_point = pc;
    return pg;
}

double eval_weight(const ProjectedGaussian& pg, const Vec2& pixel) {
    const double q = (pixel - pg.center_2d).squaredNorm();
    const double f = pg.opacity * std::exp(-q / (2.0 * pg.radius_2d * pg.radius_2d));
    return std::clamp(f, 0.0, kMaxWeight);
}

std::span<const Contribution> RenderedFrame::contributors(int u, int v) const {
    const std::size_t p = static_cast<std::size_t>(v) * width() + u;
    const int tile = (v / kTileSize) * tiles_x_ + (u / kTileSize);
    return {tile_contribs_[tile].data() + pixel_offset_[p], pixel_count_[p]};
}

RenderWeights RenderWeights::zeros(int width, int height, int semantic_dim) {
    return {ImageF(width, height, 3), ImageF(width, height, 1), ImageF(width, height, semantic_dim),
            ImageF(width, height, 1)};
}

RenderedFrame render(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& intr) {
    intr.validate();
    const int width = intr.width;
    const int height = intr.height;
    const int sdim = map.semantic_dim();

    RenderedFrame frame;
    frame.color = ImageF(width, height, 3);
    frame.depth = ImageF(width, height, 1);
    frame.semantic = ImageF(width, height, sdim);
    frame.silhouette = ImageF(width, height, 1);
    frame.map_id_ = map.id();
    frame.map_version_ = map.version();
    frame.pose_ = pose;
    frame.intr_ = intr;

    const auto gaussians = map.gaussians();
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        if (gaussians[i].semantic.size() != sdim) {
            throw InvalidArgument("gaussian semantic dimension does not match the map");
        }
        if (auto pg = project_gaussian(gaussians[i], pose, intr, i)) {
            frame.projected_.push_back(std::move(*pg));
        }
    }
    auto& projected = frame.projected_;
    std::sort(projected.begin(), projected.end(), [](const auto& a, const auto& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.source_index < b.source_index;
    });

    const int tiles_x = (width + kTileSize - 1) / kTileSize;
    const int tiles_y = (height + kTileSize - 1) / kTileSize;
    frame.tiles_x_ = tiles_x;
    frame.tile_lists_.assign(static_cast<std::size_t>(tiles_x) * tiles_y, {});
    frame.tile_contribs_.assign(frame.tile_lists_.size(), {});
    for (std::uint32_t k = 0; k < projected.size(); ++k) {
        const auto& pg = projected[k];
        const double reach = kCutoffRadii * pg.radius_2d;
        const int u0 = std::max(0, static_cast<int>(std::ceil(pg.center_2d.x() - reach)));
        const int u1 = std::min(width - 1, static_cast<int>(std::floor(pg.center_2d.x() + reach)));
        const int v0 = std::max(0, static_cast<int>(std::ceil(pg.center_2d.y() - reach)));
        const int v1 = std::min(height - 1, static_cast<int>(std::floor(pg.center_2d.y() + reach)));
        if (u0 > u1 || v0 > v1) continue;
        for (int ty = v0 / kTileSize; ty <= v1 / kTileSize; ++ty) {
            for (int tx = u0 / kTileSize; tx <= u1 / kTileSize; ++tx) {
                frame.tile_lists_[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(k);
            }
        }
    }

    frame.pixel_offset_.assign(static_cast<std::size_t>(width) * height, 0);
    frame.pixel_count_.assign(static_cast<std::size_t>(width) * height, 0);

    parallel_for(frame.tile_lists_.size(), [&](std::size_t tile) {
        const auto& list = frame.tile_lists_[tile];
        auto& contribs = frame.tile_contribs_[tile];
        const int tx = static_cast<int>(tile) % tiles_x;
        const int ty = static_cast<int>(tile) / tiles_x;
        for (int v = ty * kTileSize; v < std::min(height, (ty + 1) * kTileSize); ++v) {
            for (int u = tx * kTileSize; u < std::min(width, (tx + 1) * kTileSize); ++u) {
                const std::size_t p = static_cast<std::size_t>(v) * width + u;
                frame.pixel_offset_[p] = static_cast<std::uint32_t>(contribs.size());
                double transmittance = 1.0;
                double r = 0.0, gr = 0.0, b = 0.0, d = 0.0;
                auto sem = frame.semantic.pixel(u, v);
                for (std::uint32_t local = 0; local < list.size(); ++local) {
                    const auto& pg = projected[list[local]];
                    const double dx = u - pg.center_2d.x();
                    const double dy = v - pg.center_2d.y();
                    const double q = dx * dx + dy * dy;
                    const double rho2 = pg.radius_2d * pg.radius_2d;
                    if (q > kCutoffRadii * kCutoffRadii * rho2) continue;
                    const double raw = pg.opacity * std::exp(-q / (2.0 * rho2));
                    const bool clamped = raw > kMaxWeight;
                    const double f = clamped ? kMaxWeight : raw;
                    const double a = f * transmittance;
                    r += a * pg.color.x();
                    gr += a * pg.color.y();
                    b += a * pg.color.z();
                    d += a * pg.depth;
                    for (int c = 0; c < sdim; ++c) sem[c] += a * pg.semantic[c];
                    transmittance *= 1.0 - f;
                    contribs.push_back({list[local], local, f, clamped});
                    if (transmittance < kMinTransmittance) break;
                }
                frame.pixel_count_[p] = static_cast<std::uint32_t>(contribs.size()) - frame.pixel_offset_[p];
                frame.color(u, v, 0) = r;
                frame.color(u, v, 1) = gr;
                frame.color(u, v, 2) = b;
                frame.depth(u, v) = d;
                frame.silhouette(u, v) = 1.0 - transmittance;
            }
        }
    });
    return frame;
}

struct BackwardAccess {
    static void check_stamp(const RenderedFrame& frame, const GaussianMap& map, const Pose& pose,
                            const CameraIntrinsics& intr) {
        if (frame.map_id_ != map.id() || frame.map_version_ != map.version()) {
            throw InvalidState("rendered frame is stale: the map changed since it was rendered");
        }
        if (!(frame.pose_ == pose) || !(frame.intr_ == intr)) {
            throw InvalidState("rendered frame was produced with a different pose or intrinsics");
        }
    }
    static const auto& tile_lists(const RenderedFrame& f) { return f.tile_lists_; }
    static const auto& tile_contribs(const RenderedFrame& f) { return f.tile_contribs_; }
    static const auto& pixel_offset(const RenderedFrame& f) { return f.pixel_offset_; }
    static const auto& pixel_count(const RenderedFrame& f) { return f.pixel_count_; }
    static int tiles_x(const RenderedFrame& f) { return f.tiles_x_; }
};

namespace {

// Per projected Gaussian, gradients w.r.t. the screen-space quantities.
// Layout: [center_x, center_y, radius_2d, depth, opacity, r, g, b, semantic...]
constexpr int kSlotCenter = 0;
constexpr int kSlotRadius = 2;
constexpr int kSlotDepth = 3;
constexpr int kSlotOpacity = 4;
constexpr int kSlotColor = 5;
constexpr int kSlotSemantic = 8;

double weight_at(const ImageF& img, int u, int v, int c) {
    return img.empty() ? 0.0 : img(u, v, c);
}

}  // namespace

RenderGradients render_backward(const GaussianMap& map, const Pose& pose,
                                const CameraIntrinsics& intr, const RenderedFrame& frame,
                                const RenderWeights& weights) {
    BackwardAccess::check_stamp(frame, map, pose, intr);
    const int width = intr.width;
    const int height = intr.height;
    const int sdim = map.semantic_dim();
    const int stride = kSlotSemantic + sdim;

    auto check_weights = [&](const ImageF& img, int channels, const char* name) {
        if (!img.empty() && (img.width() != width || img.height() != height || img.channels() != channels)) {
            throw InvalidArgument(std::string("render weights '") + name + "' have the wrong shape");
        }
    };
    check_weights(weights.color, 3, "color");
    check_weights(weights.depth, 1, "depth");
    check_weights(weights.semantic, sdim, "semantic");
    check_weights(weights.silhouette, 1, "silhouette");

    const auto& projected = frame.projected();
    const auto& lists = BackwardAccess::tile_lists(frame);
    const auto& tile_contribs = BackwardAccess::tile_contribs(frame);
    const auto& offsets = BackwardAccess::pixel_offset(frame);
    const auto& counts = BackwardAccess::pixel_count(frame);
    const int tiles_x = BackwardAccess::tiles_x(frame);

    std::vector<std::vector<double>> tile_acc(lists.size());
    parallel_for(lists.size(), [&](std::size_t tile) {
        const auto& contribs_all = tile_contribs[tile];
        auto& acc = tile_acc[tile];
        acc.assign(lists[tile].size() * stride, 0.0);
        if (contribs_all.empty()) return;
        const int tx = static_cast<int>(tile) % tiles_x;
        const int ty = static_cast<int>(tile) / tiles_x;
        std::vector<double> trans;
        std::vector<double> value;
        for (int v = ty * kTileSize; v < std::min(height, (ty + 1) * kTileSize); ++v) {
            for (int u = tx * kTileSize; u < std::min(width, (tx + 1) * kTileSize); ++u) {
                const std::size_t p = static_cast<std::size_t>(v) * width + u;
                const std::uint32_t n = counts[p];
                if (n == 0) continue;
                const Contribution* cs = contribs_all.data() + offsets[p];
                const double wr = weight_at(weights.color, u, v, 0);
                const double wg = weight_at(weights.color, u, v, 1);
                const double wb = weight_at(weights.color, u, v, 2);
                const double wd = weight_at(weights.depth, u, v, 0);
                const double wsil = weight_at(weights.silhouette, u, v, 0);
                const double* ws = weights.semantic.empty() ? nullptr : weights.semantic.pixel(u, v).data();

                trans.resize(n);
                value.resize(n);
                double t = 1.0;
                for (std::uint32_t i = 0; i < n; ++i) {
                    const auto& pg = projected[cs[i].projected];
                    trans[i] = t;
                    double val = wr * pg.color.x() + wg * pg.color.y() + wb * pg.color.z() + wd * pg.depth + wsil;
                    if (ws) {
                        for (int c = 0; c < sdim; ++c) val += ws[c] * pg.semantic[c];
                    }
                    value[i] = val;
                    t *= 1.0 - cs[i].weight;
                }

                double suffix = 0.0;
                for (std::uint32_t k = n; k-- > 0;) {
                    const Contribution& c = cs[k];
                    const auto& pg = projected[c.projected];
                    const double f = c.weight;
                    const double a = f * trans[k];
                    const double dl_df = trans[k] * value[k] - suffix / (1.0 - f);
                    suffix += value[k] * a;

                    double* slot = acc.data() + static_cast<std::size_t>(c.local) * stride;
                    slot[kSlotColor + 0] += wr * a;
                    slot[kSlotColor + 1] += wg * a;
                    slot[kSlotColor + 2] += wb * a;
                    slot[kSlotDepth] += wd * a;
                    if (ws) {
                        for (int s = 0; s < sdim; ++s) slot[kSlotSemantic + s] += ws[s] * a;
                    }
                    if (c.clamped) continue;

                    const double dx = u - pg.center_2d.x();
                    const double dy = v - pg.center_2d.y();
                    const double q = dx * dx + dy * dy;
                    const double rho = pg.radius_2d;
                    const double g = std::exp(-q / (2.0 * rho * rho));
                    slot[kSlotOpacity] += dl_df * g;
                    const double dl_dq = -dl_df * f / (2.0 * rho * rho);
                    slot[kSlotRadius] += dl_df * f * q / (rho * rho * rho);
                    slot[kSlotCenter + 0] += -2.0 * dx * dl_dq;
                    slot[kSlotCenter + 1] += -2.0 * dy * dl_dq;
                }
            }
        }
    });

    // Reduce tiles in index order so the sum order is fixed.
    std::vector<double> screen(projected.size() * stride, 0.0);
    for (std::size_t tile = 0; tile < lists.size(); ++tile) {
        const auto& list = lists[tile];
        const auto& acc = tile_acc[tile];
        for (std::size_t local = 0; local < list.size(); ++local) {
            const double* src = acc.data() + local * stride;
            double* dst = screen.data() + static_cast<std::size_t>(list[local]) * stride;
            for (int s = 0; s < stride; ++s) dst[s] += src[s];
        }
    }

    RenderGradients out;
    out.gaussians.resize(map.size());
    for (auto& g : out.gaussians) g.semantic = VecX::Zero(sdim);
    const Eigen::Matrix3d rot_t = pose.rotation_matrix().transpose();
    const auto gaussians = map.gaussians();
    for (std::size_t k = 0; k < projected.size(); ++k) {
        const auto& pg = projected[k];
        const double* s = screen.data() + k * stride;
        const Vec3& pc = pg.camera_point;
        const double z = pc.z();
        const double inv_z = 1.0 / z;
        const double radius = gaussians[pg.source_index].radius;

        Vec3 dl_dpc;
        dl_dpc.x() = s[kSlotCenter + 0] * intr.focal_x * inv_z;
        dl_dpc.y() = s[kSlotCenter + 1] * intr.focal_y * inv_z;
        dl_dpc.z() = -s[kSlotCenter + 0] * intr.focal_x * pc.x() * inv_z * inv_z -
                     s[kSlotCenter + 1] * intr.focal_y * pc.y() * inv_z * inv_z -
                     s[kSlotRadius] * intr.focal_x * radius * inv_z * inv_z + s[kSlotDepth];

        auto& gg = out.gaussians[pg.source_index];
        gg.position = rot_t * dl_dpc;
        gg.radius = s[kSlotRadius] * intr.focal_x * inv_z;
        gg.opacity = s[kSlotOpacity];
        gg.color = {s[kSlotColor + 0], s[kSlotColor + 1], s[kSlotColor + 2]};
        for (int c = 0; c < sdim; ++c) gg.semantic[c] = s[kSlotSemantic + c];

        out.pose.head<3>() += pc.cross(dl_dpc);
        out.pose.tail<3>() += dl_dpc;
    }
    return out;
}

ImageF completed_semantics(const RenderedFrame& frame) {
    ImageF out = frame.semantic;
    for (int v = 0; v < frame.height(); ++v) {
        for (int u = 0; u < frame.width(); ++u) out(u, v, 0) += 1.0 - frame.silhouette(u, v);
    }
    return out;
}

}  // namespace semsplat
