#include "semsplat/scene_model.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

namespace semsplat {

namespace {

std::uint64_t next_map_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

void validate_gaussian(const Gaussian& g, int semantic_dim) {
    if (!(g.radius > 0.0) || !std::isfinite(g.radius)) {
        throw InvalidArgument("gaussian radius must be positive, got " + std::to_string(g.radius));
    }
    if (!(g.opacity >= 0.0 && g.opacity <= 1.0)) {
        throw InvalidArgument("gaussian opacity must lie in [0,1], got " + std::to_string(g.opacity));
    }
    for (int c = 0; c < 3; ++c) {
        if (!(g.color[c] >= 0.0 && g.color[c] <= 1.0)) {
            throw InvalidArgument("gaussian color channels must lie in [0,1]");
        }
    }
    if (!g.position.allFinite()) throw InvalidArgument("gaussian position must be finite");
    if (g.semantic.size() != semantic_dim) {
        throw InvalidArgument("gaussian semantic vector has " + std::to_string(g.semantic.size()) +
                              " entries, map expects " + std::to_string(semantic_dim));
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < g.semantic.size(); ++i) {
        const double s = g.semantic[i];
        if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("semantic entries must lie in [0,1]");
        sum += s;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw InvalidArgument("semantic vector must sum to 1, got " + std::to_string(sum));
    }
}

VecX one_hot(int label, int semantic_dim) {
    VecX v = VecX::Zero(semantic_dim);
    const int slot = (label >= 0 && label < semantic_dim) ? label : semantic_dim - 1;
    v[slot] = 1.0;
    return v;
}

void project_to_simplex(VecX& v) {
    v = v.cwiseMax(0.0);
    const double sum = v.sum();
    if (sum > 0.0) {
        v /= sum;
    } else {
        v.setConstant(1.0 / static_cast<double>(v.size()));
    }
}

void CameraIntrinsics::validate() const {
    if (!(focal_x > 0.0) || !(focal_y > 0.0)) throw InvalidArgument("focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidArgument("image size must be positive");
    if (!(principal_x >= 0.0 && principal_x < width && principal_y >= 0.0 && principal_y < height)) {
        throw InvalidArgument("principal point must lie inside the image");
    }
}

Pose Pose::from(const Eigen::Quaterniond& q, const Vec3& t) {
    Pose p;
    p.rotation = q.normalized();
    p.translation = t;
    return p;
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = forward.cross(up).normalized();
    const Vec3 down = forward.cross(right);
    Eigen::Matrix3d r;
    r.row(0) = right.transpose();
    r.row(1) = down.transpose();
    r.row(2) = forward.transpose();
    return from(Eigen::Quaterniond(r), -r * eye);
}

Pose Pose::inverse() const {
    const Eigen::Quaterniond qi = rotation.conjugate();
    return from(qi, -(qi * translation));
}

Pose Pose::operator*(const Pose& other) const {
    return from(rotation * other.rotation, rotation * other.translation + translation);
}

Vec3 Pose::camera_center() const { return -(rotation.conjugate() * translation); }

Pose Pose::retract(const Vec6& delta) const {
    const Vec3 omega = delta.head<3>();
    const double angle = omega.norm();
    Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
    if (angle > 0.0) dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega / angle));
    return from(dq * rotation, dq * translation + delta.tail<3>());
}

Vec3 transform_point(const Pose& pose, const Vec3& point) {
    return pose.rotation * point + pose.translation;
}

double rotation_error_deg(const Pose& a, const Pose& b) {
    const double d = std::abs(a.rotation.dot(b.rotation));
    return 2.0 * std::acos(std::min(1.0, d)) * 180.0 / std::numbers::pi;
}

double translation_error(const Pose& a, const Pose& b) {
    return (a.camera_center() - b.camera_center()).norm();
}

void Observation::validate(const CameraIntrinsics& intr) const {
    if (rgb.width() != intr.width || rgb.height() != intr.height || rgb.channels() != 3) {
        throw InvalidArgument("observation rgb does not match intrinsics resolution");
    }
    if (!depth.same_extent(rgb) || depth.channels() != 1) {
        throw InvalidArgument("observation depth does not match rgb resolution");
    }
    if (!semantic.same_extent(rgb)) throw InvalidArgument("observation semantic does not match rgb resolution");
    for (double d : depth.data()) {
        if (!(d >= 0.0)) throw InvalidArgument("observation depth must be >= 0");
    }
}

GaussianMap::GaussianMap(int semantic_dim) : semantic_dim_(semantic_dim), id_(next_map_id()) {
    if (semantic_dim < 1) {
        throw InvalidArgument("semantic_dim must be >= 1, got " + std::to_string(semantic_dim));
    }
}

GaussianMap::GaussianMap(const GaussianMap& other)
    : semantic_dim_(other.semantic_dim_),
      gaussians_(other.gaussians_),
      creation_frame_(other.creation_frame_),
      id_(next_map_id()) {}

GaussianMap& GaussianMap::operator=(const GaussianMap& other) {
    if (this != &other) {
        semantic_dim_ = other.semantic_dim_;
        gaussians_ = other.gaussians_;
        creation_frame_ = other.creation_frame_;
        ++version_;
    }
    return *this;
}

void GaussianMap::add(Gaussian g, int creation_frame) {
    validate_gaussian(g, semantic_dim_);
    gaussians_.push_back(std::move(g));
    creation_frame_.push_back(creation_frame);
    ++version_;
}

std::span<Gaussian> GaussianMap::mutable_gaussians() {
    ++version_;
    return gaussians_;
}

std::size_t GaussianMap::retain(const std::vector<bool>& keep) {
    if (keep.size() != gaussians_.size()) throw InvalidArgument("retain mask size mismatch");
    std::size_t out = 0;
    for (std::size_t i = 0; i < gaussians_.size(); ++i) {
        if (!keep[i]) continue;
        if (out != i) {
            gaussians_[out] = std::move(gaussians_[i]);
            creation_frame_[out] = creation_frame_[i];
        }
        ++out;
    }
    const std::size_t removed = gaussians_.size() - out;
    gaussians_.resize(out);
    creation_frame_.resize(out);
    ++version_;
    return removed;
}

GaussianMap new_map(int semantic_dim) { return GaussianMap(semantic_dim); }

}  // namespace semsplat
