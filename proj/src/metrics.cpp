#include "semsplat/metrics.hpp"

#include <cmath>
#include <string>

#include <Eigen/SVD>

namespace semsplat {

RigidAlignment align_points(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    if (from.size() != to.size()) {
        throw InvalidArgument("cannot align " + std::to_string(from.size()) + " points onto " + std::to_string(to.size()));
    }
    if (from.empty()) throw InvalidArgument("cannot align empty point sets");
    Vec3 cf = Vec3::Zero(), ct = Vec3::Zero();
    for (std::size_t i = 0; i < from.size(); ++i) {
        cf += from[i];
        ct += to[i];
    }
    cf /= static_cast<double>(from.size());
    ct /= static_cast<double>(to.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t i = 0; i < from.size(); ++i) cov += (from[i] - cf) * (to[i] - ct).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    RigidAlignment out;
    out.rotation = svd.matrixV() * d * svd.matrixU().transpose();
    out.translation = ct - out.rotation * cf;
    return out;
}

std::vector<double> ate_residuals(const std::vector<Pose>& estimated, const std::vector<Pose>& ground_truth) {
    if (estimated.size() != ground_truth.size()) {
        throw InvalidArgument("trajectory lengths differ: estimated " + std::to_string(estimated.size()) +
                              ", ground truth " + std::to_string(ground_truth.size()));
    }
    if (estimated.size() < 2) throw InvalidArgument("ATE needs at least two poses");
    std::vector<Vec3> est, gt;
    for (std::size_t i = 0; i < estimated.size(); ++i) {
        est.push_back(estimated[i].camera_center());
        gt.push_back(ground_truth[i].camera_center());
    }
    const RigidAlignment a = align_points(est, gt);
    std::vector<double> residuals;
    for (std::size_t i = 0; i < est.size(); ++i) residuals.push_back((a.rotation * est[i] + a.translation - gt[i]).norm());
    return residuals;
}

double ate_rmse(const std::vector<Pose>& estimated, const std::vector<Pose>& ground_truth) {
    double sum = 0.0;
    const auto residuals = ate_residuals(estimated, ground_truth);
    for (double r : residuals) sum += r * r;
    return std::sqrt(sum / static_cast<double>(residuals.size()));
}

double psnr(const ImageF& a, const ImageF& b, double max_value) {
    if (!a.same_shape(b)) throw InvalidArgument("psnr inputs differ in shape");
    if (!(max_value > 0.0)) throw InvalidArgument("psnr max_value must be positive");
    if (a.empty()) throw UndefinedMetric("psnr of empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(a.data().size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(max_value * max_value / mse));
}

double ssim(const ImageF& a, const ImageF& b) {
    constexpr int kWindow = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (!a.same_shape(b)) throw InvalidArgument("ssim inputs differ in shape");
    if (a.width() < kWindow || a.height() < kWindow) {
        throw InvalidArgument("ssim needs images of at least 11x11 pixels");
    }
    double kernel[kWindow][kWindow];
    double norm = 0.0;
    for (int y = 0; y < kWindow; ++y) {
        for (int x = 0; x < kWindow; ++x) {
            const double dx = x - kWindow / 2, dy = y - kWindow / 2;
            kernel[y][x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            norm += kernel[y][x];
        }
    }
    for (auto& row : kernel)
        for (double& w : row) w /= norm;

    double total = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < a.channels(); ++c) {
        for (int v0 = 0; v0 + kWindow <= a.height(); ++v0) {
            for (int u0 = 0; u0 + kWindow <= a.width(); ++u0) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int y = 0; y < kWindow; ++y) {
                    for (int x = 0; x < kWindow; ++x) {
                        const double w = kernel[y][x];
                        const double pa = a(u0 + x, v0 + y, c), pb = b(u0 + x, v0 + y, c);
                        ma += w * pa;
                        mb += w * pb;
                        saa += w * pa * pa;
                        sbb += w * pb * pb;
                        sab += w * pa * pb;
                    }
                }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

double depth_l1(const ImageF& rendered, const ImageF& observed) {
    if (!rendered.same_shape(observed)) throw InvalidArgument("depth images differ in shape");
    double sum = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < observed.data().size(); ++i) {
        if (!(observed.data()[i] > 0.0)) continue;
        sum += std::abs(rendered.data()[i] - observed.data()[i]);
        ++valid;
    }
    if (valid == 0) throw UndefinedMetric("depth L1 undefined: no valid observed depth");
    return sum / static_cast<double>(valid);
}

double seg_l1(const LabelImage& rendered, const LabelImage& reference) {
    if (!rendered.same_shape(reference)) throw InvalidArgument("label images differ in shape");
    if (rendered.empty()) throw UndefinedMetric("seg L1 undefined on empty images");
    std::size_t differ = 0;
    for (std::size_t i = 0; i < rendered.data().size(); ++i) differ += rendered.data()[i] != reference.data()[i];
    return 2.0 * static_cast<double>(differ) / static_cast<double>(rendered.data().size());
}

LabelImage semantic_labels(const ImageF& semantic, const ImageF& silhouette) {
    if (!semantic.same_extent(silhouette)) throw InvalidArgument("semantic and silhouette images differ in size");
    LabelImage out(semantic.width(), semantic.height(), 1);
    for (int v = 0; v < semantic.height(); ++v) {
        for (int u = 0; u < semantic.width(); ++u) {
            int best = 0;
            double best_value = semantic(u, v, 0) + (1.0 - silhouette(u, v));
            for (int c = 1; c < semantic.channels(); ++c) {
                if (semantic(u, v, c) > best_value) {
                    best_value = semantic(u, v, c);
                    best = c;
                }
            }
            out(u, v) = static_cast<std::uint16_t>(best);
        }
    }
    return out;
}

MetricsReport evaluate_sequence(const SequenceBundle& bundle, const std::vector<Pose>& trajectory,
                                const std::vector<FrameRender>& renders) {
    const std::size_t n = bundle.frames.size();
    if (trajectory.size() != n) {
        throw InvalidArgument("trajectory has " + std::to_string(trajectory.size()) + " poses but the bundle has " +
                              std::to_string(n) + " frames");
    }
    if (renders.size() != n) {
        throw InvalidArgument("found " + std::to_string(renders.size()) + " renders for " + std::to_string(n) + " frames");
    }
    MetricsReport report;
    report.per_frame.resize(n);
    if (bundle.gt_poses && n >= 2) {
        const auto residuals = ate_residuals(trajectory, *bundle.gt_poses);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            report.per_frame[i].ate = residuals[i];
            sum += residuals[i] * residuals[i];
        }
        report.ate_rmse = std::sqrt(sum / static_cast<double>(n));
    }
    double depth_sum = 0.0;
    std::size_t depth_frames = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& obs = bundle.frames[i];
        const auto& r = renders[i];
        if (!r.rgb.same_shape(obs.rgb) || !r.depth.same_shape(obs.depth) || !r.labels.same_shape(obs.semantic)) {
            throw InvalidArgument("render " + std::to_string(i) + " does not match the frame resolution");
        }
        auto& fm = report.per_frame[i];
        fm.psnr = psnr(r.rgb, obs.rgb);
        fm.ssim = ssim(r.rgb, obs.rgb);
        try {
            fm.depth_l1 = depth_l1(r.depth, obs.depth);
            depth_sum += *fm.depth_l1;
            ++depth_frames;
        } catch (const UndefinedMetric&) {
        }
        fm.seg_l1 = seg_l1(r.labels, bundle.gt_semantics ? (*bundle.gt_semantics)[i] : obs.semantic);
        report.psnr += fm.psnr;
        report.ssim += fm.ssim;
        report.seg_l1 += fm.seg_l1;
    }
    if (n > 0) {
        report.psnr /= static_cast<double>(n);
        report.ssim /= static_cast<double>(n);
        report.seg_l1 /= static_cast<double>(n);
    }
    if (depth_frames > 0) report.depth_l1 = depth_sum / static_cast<double>(depth_frames);
    return report;
}

}  // namespace semsplat
