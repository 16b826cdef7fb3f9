#include "semsplat/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "semsplat/semantic_graph.hpp"
#include "semsplat/splat_renderer.hpp"

namespace semsplat {

std::vector<Vec3> back_project(const Observation& obs, const Pose& pose, const CameraIntrinsics& intr) {
    const Pose to_world = pose.inverse();
    std::vector<Vec3> points;
    for (int v = 0; v < obs.depth.height(); ++v) {
        for (int u = 0; u < obs.depth.width(); ++u) {
            const double d = obs.depth(u, v);
            if (!(d > 0.0)) continue;
            const Vec3 cam((u - intr.principal_x) / intr.focal_x * d, (v - intr.principal_y) / intr.focal_y * d, d);
            points.push_back(transform_point(to_world, cam));
        }
    }
    return points;
}

Keyframe make_keyframe(const Observation& obs, const Pose& pose, const CameraIntrinsics& intr) {
    return {obs.frame_index, pose, obs, back_project(obs, pose, intr)};
}

void MappingConfig::validate() const {
    if (top_k < 1) throw InvalidArgument("mapping.top_k must be >= 1");
    if (refine_iterations < 0) throw InvalidArgument("mapping.refine_iterations must be >= 0");
    if (!(densify_silhouette_threshold > 0.0 && densify_silhouette_threshold < 1.0)) {
        throw InvalidArgument("mapping.densify_silhouette_threshold must lie in (0,1)");
    }
    if (!(densify_depth_error_factor > 0.0)) throw InvalidArgument("mapping.densify_depth_error_factor must be positive");
    if (densify_stride < 1) throw InvalidArgument("mapping.densify_stride must be >= 1");
    if (!(sc_weight >= 0.0)) throw InvalidArgument("mapping.sc_weight must be >= 0");
    if (!(overlap_voxel > 0.0)) throw InvalidArgument("mapping.overlap_voxel must be positive");
    if (!(silhouette_gate >= 0.0 && silhouette_gate < 1.0)) throw InvalidArgument("mapping.silhouette_gate must lie in [0,1)");
    if (!(prune_opacity >= 0.0 && prune_opacity < 1.0)) throw InvalidArgument("mapping.prune_opacity must lie in [0,1)");
    if (weights.rgb < 0.0 || weights.depth < 0.0 || weights.semantic < 0.0) {
        throw InvalidArgument("mapping loss weights must be non-negative");
    }
    const auto& lr = learning_rates;
    if (!(lr.position > 0.0 && lr.radius > 0.0 && lr.opacity > 0.0 && lr.color > 0.0 && lr.semantic > 0.0)) {
        throw InvalidArgument("mapping learning rates must be positive");
    }
}

namespace {

struct VoxelKey {
    std::int64_t x, y, z;
    bool operator==(const VoxelKey&) const = default;
};

struct VoxelHash {
    std::size_t operator()(const VoxelKey& k) const noexcept {
        std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
        h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
        h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
        return static_cast<std::size_t>(h);
    }
};

VoxelKey voxel_of(const Vec3& p, double voxel) {
    return {static_cast<std::int64_t>(std::floor(p.x() / voxel)), static_cast<std::int64_t>(std::floor(p.y() / voxel)),
            static_cast<std::int64_t>(std::floor(p.z() / voxel))};
}

}  // namespace

double overlap(const Keyframe& current, const Keyframe& candidate, double voxel) {
    if (!(voxel > 0.0)) throw InvalidArgument("voxel size must be positive");
    if (current.point_cloud.empty()) throw InvalidArgument("current keyframe has an empty point cloud");
    std::unordered_set<VoxelKey, VoxelHash> occupied;
    occupied.reserve(candidate.point_cloud.size());
    for (const auto& p : candidate.point_cloud) occupied.insert(voxel_of(p, voxel));
    std::size_t hits = 0;
    for (const auto& p : current.point_cloud) hits += occupied.count(voxel_of(p, voxel));
    return static_cast<double>(hits) / static_cast<double>(current.point_cloud.size());
}

std::vector<Keyframe> select_keyframes(const Keyframe& current, const std::vector<Keyframe>& history,
                                       const MappingConfig& cfg) {
    std::vector<Keyframe> selected{current};
    if (history.empty() || current.point_cloud.empty()) return selected;
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < history.size(); ++i) ranked.emplace_back(overlap(current, history[i], cfg.overlap_voxel), i);
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        const int fa = history[a.second].frame_index;
        const int fb = history[b.second].frame_index;
        if (fa != fb) return fa > fb;
        return a.second > b.second;
    });
    const std::size_t take = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(cfg.top_k));
    for (std::size_t k = 0; k < take; ++k) selected.push_back(history[ranked[k].second]);
    return selected;
}

std::size_t densify(GaussianMap& map, const Observation& obs, const Pose& pose, const CameraIntrinsics& intr,
                    const MappingConfig& cfg) {
    obs.validate(intr);
    const int width = intr.width;
    const int height = intr.height;
    ImageF silhouette(width, height, 1);
    ImageF depth_error(width, height, 1);
    std::vector<double> errors;
    if (!map.empty()) {
        const RenderedFrame rf = render(map, pose, intr);
        silhouette = rf.silhouette;
        for (int v = 0; v < height; ++v) {
            for (int u = 0; u < width; ++u) {
                if (!(obs.depth(u, v) > 0.0)) continue;
                depth_error(u, v) = std::abs(rf.depth(u, v) - obs.depth(u, v));
                errors.push_back(depth_error(u, v));
            }
        }
    }
    double error_limit = std::numeric_limits<double>::infinity();
    if (!errors.empty()) {
        const auto mid = errors.begin() + static_cast<std::ptrdiff_t>(errors.size() / 2);
        std::nth_element(errors.begin(), mid, errors.end());
        error_limit = cfg.densify_depth_error_factor * *mid;
    }

    const Pose to_world = pose.inverse();
    const int sdim = map.semantic_dim();
    std::size_t added = 0;
    for (int v = 0; v < height; v += cfg.densify_stride) {
        for (int u = 0; u < width; u += cfg.densify_stride) {
            const double d = obs.depth(u, v);
            if (!(d > kNearPlane)) continue;
            if (!(silhouette(u, v) < cfg.densify_silhouette_threshold || depth_error(u, v) > error_limit)) continue;
            Gaussian g;
            const Vec3 cam((u - intr.principal_x) / intr.focal_x * d, (v - intr.principal_y) / intr.focal_y * d, d);
            g.position = transform_point(to_world, cam);
            g.radius = d / intr.focal_x;
            g.opacity = 0.5;
            for (int c = 0; c < 3; ++c) g.color[c] = std::clamp(obs.rgb(u, v, c), 0.0, 1.0);
            g.semantic = one_hot(obs.semantic(u, v), sdim);
            map.add(std::move(g), obs.frame_index);
            ++added;
        }
    }
    return added;
}

double compose_objective(double total, double consistency, double sc_weight) { return total + sc_weight * consistency; }

namespace {

/// Per-Gaussian parameter block: position, radius, opacity, colour, semantics.
constexpr int kFixedParams = 8;

VecX pack(const GaussianMap& map) {
    const int block = kFixedParams + map.semantic_dim();
    VecX p(static_cast<Eigen::Index>(map.size()) * block);
    for (std::size_t i = 0; i < map.size(); ++i) {
        const Gaussian& g = map[i];
        auto b = p.segment(static_cast<Eigen::Index>(i) * block, block);
        b.segment<3>(0) = g.position;
        b[3] = g.radius;
        b[4] = g.opacity;
        b.segment<3>(5) = g.color;
        b.tail(map.semantic_dim()) = g.semantic;
    }
    return p;
}

VecX pack_gradients(const RenderGradients& grads, int sdim) {
    const int block = kFixedParams + sdim;
    VecX p(static_cast<Eigen::Index>(grads.gaussians.size()) * block);
    for (std::size_t i = 0; i < grads.gaussians.size(); ++i) {
        const auto& g = grads.gaussians[i];
        auto b = p.segment(static_cast<Eigen::Index>(i) * block, block);
        b.segment<3>(0) = g.position;
        b[3] = g.radius;
        b[4] = g.opacity;
        b.segment<3>(5) = g.color;
        b.tail(sdim) = g.semantic;
    }
    return p;
}

/// Writes `p` into `map`, enforcing the Gaussian invariants.
void unpack(const VecX& p, GaussianMap& map) {
    const int sdim = map.semantic_dim();
    const int block = kFixedParams + sdim;
    auto gaussians = map.mutable_gaussians();
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        Gaussian& g = gaussians[i];
        const auto b = p.segment(static_cast<Eigen::Index>(i) * block, block);
        g.position = b.segment<3>(0);
        g.radius = std::max(b[3], 1e-6);
        g.opacity = std::clamp(b[4], 0.0, 1.0);
        for (int c = 0; c < 3; ++c) g.color[c] = std::clamp(b[5 + c], 0.0, 1.0);
        g.semantic = b.tail(sdim);
        project_to_simplex(g.semantic);
    }
}

VecX learning_rate_vector(std::size_t count, int sdim, const MappingLearningRates& lr) {
    const int block = kFixedParams + sdim;
    VecX block_lr(block);
    block_lr.segment<3>(0).setConstant(lr.position);
    block_lr[3] = lr.radius;
    block_lr[4] = lr.opacity;
    block_lr.segment<3>(5).setConstant(lr.color);
    block_lr.tail(sdim).setConstant(lr.semantic);
    return block_lr.replicate(static_cast<Eigen::Index>(count), 1);
}

ObjectiveTerms evaluate(const GaussianMap& map, const std::vector<Keyframe>& keyframes,
                        const std::vector<SemanticTarget>& sc_frames, const CameraIntrinsics& intr,
                        const MappingConfig& cfg, VecX* gradient) {
    ObjectiveTerms terms;
    // A zero gate keeps every pixel, including uncovered ones, so the loss stays continuous.
    const double gate = cfg.silhouette_gate > 0.0 ? cfg.silhouette_gate : -1.0;
    if (gradient) gradient->setZero(static_cast<Eigen::Index>(map.size()) * (kFixedParams + map.semantic_dim()));
    for (const auto& kf : keyframes) {
        const RenderedFrame rf = render(map, kf.pose, intr);
        RenderWeights w;
        terms.total += frame_loss(rf, kf.observation, cfg.weights, gate, gradient ? &w : nullptr).total;
        if (gradient) *gradient += pack_gradients(render_backward(map, kf.pose, intr, rf, w), map.semantic_dim());
    }
    if (cfg.sc_weight > 0.0) {
        for (const auto& sc : sc_frames) {
            const RenderedFrame rf = render(map, sc.pose, intr);
            RenderWeights w;
            ImageF* grad_sem = nullptr;
            if (gradient) {
                w.semantic = ImageF(rf.width(), rf.height(), rf.semantic_dim());
                grad_sem = &w.semantic;
            }
            terms.consistency += frame_consistency_loss(completed_semantics(rf), sc.labels, grad_sem, cfg.sc_weight);
            if (gradient) {
                w.silhouette = ImageF(rf.width(), rf.height(), 1);
                for (int v = 0; v < rf.height(); ++v) {
                    for (int u = 0; u < rf.width(); ++u) w.silhouette(u, v) = -w.semantic(u, v, 0);
                }
            }
            if (gradient) *gradient += pack_gradients(render_backward(map, sc.pose, intr, rf, w), map.semantic_dim());
        }
    }
    terms.objective = compose_objective(terms.total, terms.consistency, cfg.sc_weight);
    return terms;
}

}  // namespace

ObjectiveTerms evaluate_objective(const GaussianMap& map, const std::vector<Keyframe>& keyframes,
                                  const std::vector<SemanticTarget>& sc_frames, const CameraIntrinsics& intr,
                                  const MappingConfig& cfg) {
    cfg.validate();
    return evaluate(map, keyframes, sc_frames, intr, cfg, nullptr);
}

RefineResult refine_map(GaussianMap& map, const std::vector<Keyframe>& keyframes,
                        const std::vector<SemanticTarget>& sc_frames, const CameraIntrinsics& intr,
                        const MappingConfig& cfg) {
    cfg.validate();
    if (keyframes.empty()) throw InvalidArgument("refine_map needs at least one keyframe");

    RefineResult result;
    VecX gradient;
    ObjectiveTerms terms = evaluate(map, keyframes, sc_frames, intr, cfg, &gradient);
    result.initial_objective = result.final_objective = terms.objective;
    result.loss_history.push_back(terms.objective);

    if (!map.empty()) {
        constexpr double kBeta1 = 0.9;
        constexpr double kBeta2 = 0.999;
        constexpr double kEps = 1e-12;
        const VecX lr = learning_rate_vector(map.size(), map.semantic_dim(), cfg.learning_rates);
        VecX params = pack(map);
        VecX m = VecX::Zero(params.size());
        VecX v = VecX::Zero(params.size());
        int adam_t = 0;
        double scale = 1.0;
        bool restarted = false;
        GaussianMap candidate = map;

        while (result.iterations < cfg.refine_iterations && terms.objective > 0.0 && !gradient.isZero(0.0)) {
            ++adam_t;
            m = kBeta1 * m + (1.0 - kBeta1) * gradient;
            v = kBeta2 * v + (1.0 - kBeta2) * gradient.cwiseProduct(gradient);
            const VecX m_hat = m / (1.0 - std::pow(kBeta1, adam_t));
            const VecX v_hat = v / (1.0 - std::pow(kBeta2, adam_t));
            const VecX direction = lr.cwiseProduct(m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + kEps).matrix()));

            bool accepted = false;
            while (result.iterations < cfg.refine_iterations) {
                ++result.iterations;
                unpack(params - scale * direction, candidate);
                VecX cand_gradient;
                const ObjectiveTerms cand = evaluate(candidate, keyframes, sc_frames, intr, cfg, &cand_gradient);
                if (cand.objective <= terms.objective) {
                    params = pack(candidate);
                    unpack(params, map);
                    terms = cand;
                    gradient = std::move(cand_gradient);
                    result.loss_history.push_back(terms.objective);
                    scale = std::min(1.0, 2.0 * scale);
                    accepted = true;
                    break;
                }
                scale *= 0.5;
                if (scale < 1e-6) break;
            }
            if (accepted) {
                restarted = false;
                continue;
            }
            if (restarted || result.iterations >= cfg.refine_iterations) break;
            restarted = true;
            m.setZero();
            v.setZero();
            adam_t = 0;
            scale = 1.0;
        }
    }
    result.final_objective = terms.objective;

    std::vector<bool> keep(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) keep[i] = map[i].opacity >= cfg.prune_opacity;
    result.pruned = map.retain(keep);
    return result;
}

}  // namespace semsplat
