#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "semsplat/image.hpp"

namespace semsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;

/// Near plane in world units. Anything at or closer than this is culled.
inline constexpr double kNearPlane = 0.01;

/// Isotropic 3D Gaussian splat with an S-channel semantic distribution.
struct Gaussian {
    Vec3 position = Vec3::Zero();
    double radius = 0.01;
    double opacity = 0.5;
    Vec3 color = Vec3::Zero();
    VecX semantic;
};

/// Throws InvalidArgument if `g` violates the Gaussian invariants for `semantic_dim` channels.
void validate_gaussian(const Gaussian& g, int semantic_dim);

/// One-hot semantic vector for `label`; labels outside [0, dim) go to the novel slot dim-1.
VecX one_hot(int label, int semantic_dim);

/// Clamp to [0, inf) and renormalise onto the probability simplex. An all-zero input
/// becomes uniform.
void project_to_simplex(VecX& v);

struct CameraIntrinsics {
    double focal_x = 1.0;
    double focal_y = 1.0;
    double principal_x = 0.0;
    double principal_y = 0.0;
    int width = 1;
    int height = 1;

    void validate() const;
    bool operator==(const CameraIntrinsics&) const = default;
};

/// Rigid world-to-camera transform: x_cam = rotation * x_world + translation.
struct Pose {
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }
    /// Normalises the quaternion so the pose is valid.
    static Pose from(const Eigen::Quaterniond& q, const Vec3& t);
    /// Camera placed at `eye` looking at `target`; camera y points away from `up`.
    static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up);

    Pose inverse() const;
    /// (a * b)(x) == a(b(x)).
    Pose operator*(const Pose& other) const;
    Vec3 camera_center() const;
    Eigen::Matrix3d rotation_matrix() const { return rotation.toRotationMatrix(); }

    /// Left-composed tangent update: the rotation part (first three entries) is an
    /// axis-angle increment, the last three a translation added in the camera frame.
    Pose retract(const Vec6& delta) const;

    bool operator==(const Pose& other) const {
        return rotation.coeffs() == other.rotation.coeffs() && translation == other.translation;
    }
};

Vec3 transform_point(const Pose& pose, const Vec3& point);

/// Rotation angle in degrees between two poses' orientations.
double rotation_error_deg(const Pose& a, const Pose& b);
/// Distance between the two camera centres.
double translation_error(const Pose& a, const Pose& b);

/// Per-frame sensor input. Depth 0 marks an invalid pixel; label 0 is background.
struct Observation {
    ImageF rgb;           // H x W x 3, [0, 1]
    ImageF depth;         // H x W
    LabelImage semantic;  // H x W
    int frame_index = 0;
    double timestamp = 0.0;

    void validate(const CameraIntrinsics& intr) const;
};

/// Ordered Gaussian container. Every mutation bumps `version()` so renders
/// can detect that they were produced from an older map.
class GaussianMap {
public:
    explicit GaussianMap(int semantic_dim);
    GaussianMap(const GaussianMap& other);
    GaussianMap& operator=(const GaussianMap& other);
    GaussianMap(GaussianMap&&) noexcept = default;
    GaussianMap& operator=(GaussianMap&&) noexcept = default;

    int semantic_dim() const noexcept { return semantic_dim_; }
    std::size_t size() const noexcept { return gaussians_.size(); }
    bool empty() const noexcept { return gaussians_.empty(); }

    std::span<const Gaussian> gaussians() const noexcept { return gaussians_; }
    const Gaussian& operator[](std::size_t i) const { return gaussians_[i]; }
    std::span<const int> creation_frames() const noexcept { return creation_frame_; }

    /// Validates `g` and appends it.
    void add(Gaussian g, int creation_frame);
    std::span<Gaussian> mutable_gaussians();
    /// Removes Gaussians whose `keep` flag is false; returns the removed count.
    std::size_t retain(const std::vector<bool>& keep);

    std::uint64_t id() const noexcept { return id_; }
    std::uint64_t version() const noexcept { return version_; }

private:
    int semantic_dim_;
    std::vector<Gaussian> gaussians_;
    std::vector<int> creation_frame_;
    std::uint64_t id_;
    std::uint64_t version_ = 0;
};

GaussianMap new_map(int semantic_dim);

}  // namespace semsplat
