#pragma once

// Central-difference gradients of sum(weights * render outputs), used to check
// render_backward. Perturbations go straight through mutable_gaussians() so the
// semantic vector can leave the simplex, matching the unconstrained partials.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "semsplat/splat_renderer.hpp"

namespace semsplat::oracle {

inline double weighted_output(const RenderedFrame& f, const RenderWeights& w) {
    double sum = 0.0;
    auto dot = [&](const ImageF& a, const ImageF& b) {
        if (b.empty()) return;
        for (std::size_t i = 0; i < a.data().size(); ++i) sum += a.data()[i] * b.data()[i];
    };
    dot(f.color, w.color);
    dot(f.depth, w.depth);
    dot(f.semantic, w.semantic);
    dot(f.silhouette, w.silhouette);
    return sum;
}

struct GradientEntry {
    std::string name;
    double analytic;
    double numeric;
};

/// Every partial derivative, analytic next to its central difference.
inline std::vector<GradientEntry> compare_gradients(const GaussianMap& map, const Pose& pose,
                                                    const CameraIntrinsics& intr, const RenderWeights& w,
                                                    double step = 1e-5) {
    const RenderedFrame frame = render(map, pose, intr);
    const RenderGradients grads = render_backward(map, pose, intr, frame, w);

    std::vector<GradientEntry> out;
    auto loss_with = [&](const std::function<void(Gaussian&)>& edit, std::size_t index) {
        GaussianMap copy = map;
        edit(copy.mutable_gaussians()[index]);
        return weighted_output(render(copy, pose, intr), w);
    };
    auto central = [&](std::size_t index, const std::function<double&(Gaussian&)>& field) {
        const double plus = loss_with([&](Gaussian& g) { field(g) += step; }, index);
        const double minus = loss_with([&](Gaussian& g) { field(g) -= step; }, index);
        return (plus - minus) / (2.0 * step);
    };

    for (std::size_t i = 0; i < map.size(); ++i) {
        const auto& g = grads.gaussians[i];
        const std::string tag = "g" + std::to_string(i) + ".";
        for (int k = 0; k < 3; ++k) {
            out.push_back({tag + "position" + std::to_string(k), g.position[k],
                           central(i, [k](Gaussian& x) -> double& { return x.position[k]; })});
        }
        out.push_back({tag + "radius", g.radius, central(i, [](Gaussian& x) -> double& { return x.radius; })});
        out.push_back({tag + "opacity", g.opacity, central(i, [](Gaussian& x) -> double& { return x.opacity; })});
        for (int k = 0; k < 3; ++k) {
            out.push_back({tag + "color" + std::to_string(k), g.color[k],
                           central(i, [k](Gaussian& x) -> double& { return x.color[k]; })});
        }
        for (int k = 0; k < map.semantic_dim(); ++k) {
            out.push_back({tag + "semantic" + std::to_string(k), g.semantic[k],
                           central(i, [k](Gaussian& x) -> double& { return x.semantic[k]; })});
        }
    }
    for (int k = 0; k < 6; ++k) {
        Vec6 d = Vec6::Zero();
        d[k] = step;
        const double plus = weighted_output(render(map, pose.retract(d), intr), w);
        const double minus = weighted_output(render(map, pose.retract(-d), intr), w);
        out.push_back({"pose" + std::to_string(k), grads.pose[k], (plus - minus) / (2.0 * step)});
    }
    return out;
}

inline bool gradient_matches(const GradientEntry& e, double rel = 1e-4, double abs_tol = 1e-7) {
    const double scale = std::max(std::abs(e.analytic), std::abs(e.numeric));
    return std::abs(e.analytic - e.numeric) <= std::max(rel * scale, abs_tol);
}

}  // namespace semsplat::oracle
