#include "semsplat/tracker.hpp"

#include <cmath>
#include <string>

namespace semsplat {

namespace {

double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

LossTerms frame_loss(const RenderedFrame& rendered, const Observation& observed, const LossWeights& weights,
                     double gate, RenderWeights* grad, double grad_scale) {
    const int width = rendered.width();
    const int height = rendered.height();
    const int sdim = rendered.semantic_dim();
    if (observed.rgb.width() != width || observed.rgb.height() != height || !observed.depth.same_extent(observed.rgb) ||
        !observed.semantic.same_extent(observed.rgb)) {
        throw InvalidArgument("observation resolution " + std::to_string(observed.rgb.width()) + "x" +
                              std::to_string(observed.rgb.height()) + " does not match render " +
                              std::to_string(width) + "x" + std::to_string(height));
    }
    if (grad) {
        if (grad->color.empty()) grad->color = ImageF(width, height, 3);
        if (grad->depth.empty()) grad->depth = ImageF(width, height, 1);
        if (grad->semantic.empty()) grad->semantic = ImageF(width, height, sdim);
        if (grad->silhouette.empty()) grad->silhouette = ImageF(width, height, 1);
    }

    LossTerms terms;
    for (int v = 0; v < height; ++v) {
        for (int u = 0; u < width; ++u) {
            if (!(rendered.silhouette(u, v) > gate)) continue;
            ++terms.gated_pixels;

            const double obs_depth = observed.depth(u, v);
            if (obs_depth > 0.0) {
                const double r = rendered.depth(u, v) - obs_depth;
                terms.depth += std::abs(r);
                if (grad) grad->depth(u, v) += grad_scale * weights.depth * sign(r);
            }
            for (int c = 0; c < 3; ++c) {
                const double r = rendered.color(u, v, c) - observed.rgb(u, v, c);
                terms.rgb += std::abs(r);
                if (grad) grad->color(u, v, c) += grad_scale * weights.rgb * sign(r);
            }
            if (weights.semantic != 0.0) {
                const int label = observed.semantic(u, v);
                if (label >= sdim) {
                    throw InvalidArgument("observed label " + std::to_string(label) + " exceeds semantic_dim " +
                                          std::to_string(sdim));
                }
                // Uncovered mass 1 - s counts as background.
                for (int c = 0; c < sdim; ++c) {
                    const double bg = c == 0 ? 1.0 - rendered.silhouette(u, v) : 0.0;
                    const double r = rendered.semantic(u, v, c) + bg - (c == label ? 1.0 : 0.0);
                    terms.semantic += std::abs(r);
                    if (!grad) continue;
                    grad->semantic(u, v, c) += grad_scale * weights.semantic * sign(r);
                    if (c == 0) grad->silhouette(u, v) -= grad_scale * weights.semantic * sign(r);
                }
            }
        }
    }
    terms.total = weights.depth * terms.depth + weights.rgb * terms.rgb + weights.semantic * terms.semantic;
    return terms;
}

double tracking_loss(const RenderedFrame& rendered, const Observation& observed, const LossWeights& weights,
                     double gate) {
    return frame_loss(rendered, observed, weights, gate).total;
}

void TrackingConfig::validate() const {
    if (max_iterations < 1) throw InvalidArgument("tracking.max_iterations must be >= 1");
    if (!(weights.rgb > 0.0) || !(weights.depth > 0.0) || weights.semantic < 0.0) {
        throw InvalidArgument("tracking loss weights must be positive");
    }
    if (!(silhouette_gate > 0.0 && silhouette_gate < 1.0)) {
        throw InvalidArgument("tracking.silhouette_gate must lie in (0,1)");
    }
    if (!(rotation_step > 0.0) || !(translation_step > 0.0)) throw InvalidArgument("tracking step sizes must be positive");
}

TrackResult track_frame(const GaussianMap& map, const Pose& init_pose, const Observation& obs,
                        const CameraIntrinsics& intr, const TrackingConfig& cfg) {
    cfg.validate();
    if (map.empty()) throw InvalidState("cannot track against an empty map");

    TrackResult result;
    result.pose = init_pose;

    RenderedFrame frame = render(map, init_pose, intr);
    RenderWeights weights;
    LossTerms terms = frame_loss(frame, obs, cfg.weights, cfg.silhouette_gate, &weights);
    result.initial_loss = result.final_loss = terms.total;
    result.loss_history.push_back(terms.total);
    if (terms.gated_pixels == 0) {
        result.degenerate = true;
        return result;
    }

    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-12;
    Vec6 lr;
    lr << Vec3::Constant(cfg.rotation_step), Vec3::Constant(cfg.translation_step);
    Vec6 m = Vec6::Zero();
    Vec6 v = Vec6::Zero();
    int adam_t = 0;
    double scale = 1.0;
    bool converged = false;
    bool restarted = false;

    while (!converged && result.iterations < cfg.max_iterations && terms.total > 0.0) {
        const Vec6 g = render_backward(map, result.pose, intr, frame, weights).pose;
        if (g.isZero(0.0)) break;
        ++adam_t;
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
        const Vec6 m_hat = m / (1.0 - std::pow(kBeta1, adam_t));
        const Vec6 v_hat = v / (1.0 - std::pow(kBeta2, adam_t));
        const Vec6 direction = lr.cwiseProduct(m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + kEps).matrix()));

        bool accepted = false;
        while (result.iterations < cfg.max_iterations) {
            ++result.iterations;
            const Pose candidate = result.pose.retract(-scale * direction);
            RenderedFrame cand_frame = render(map, candidate, intr);
            RenderWeights cand_weights;
            const LossTerms cand = frame_loss(cand_frame, obs, cfg.weights, cfg.silhouette_gate, &cand_weights);
            if (cand.total <= terms.total && cand.gated_pixels > 0) {
                const double decrease = terms.total - cand.total;
                result.pose = candidate;
                frame = std::move(cand_frame);
                weights = std::move(cand_weights);
                terms = cand;
                result.loss_history.push_back(terms.total);
                scale = std::min(1.0, 2.0 * scale);
                accepted = true;
                converged = decrease < cfg.convergence_tol;
                break;
            }
            scale *= 0.5;
            if (scale < 1e-6) break;
        }
        if (accepted) {
            restarted = false;
            continue;
        }
        // A failed line search restarts the moment estimates once before giving up.
        if (restarted) break;
        restarted = true;
        m.setZero();
        v.setZero();
        adam_t = 0;
        scale = 1.0;
    }
    result.final_loss = terms.total;
    return result;
}

Pose constant_velocity_init(const Pose& prev, const Pose& prev_prev) {
    const Pose velocity = prev * prev_prev.inverse();
    return velocity * prev;
}

}  // namespace semsplat
