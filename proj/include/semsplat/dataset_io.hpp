#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semsplat/image.hpp"
#include "semsplat/mask_rle.hpp"
#include "semsplat/scene_model.hpp"

namespace semsplat {

/// One segmented region of a frame with its open-vocabulary embedding.
struct FeatureRecord {
    int frame_index = 0;
    int mask_id = 0;
    int label = 0;
    std::vector<double> embedding;
    RleMask mask;
};

struct LabelEntry {
    int id = 0;
    std::string name;
    bool operator==(const LabelEntry&) const = default;
};

struct SequenceBundle {
    CameraIntrinsics intrinsics;
    std::vector<Observation> frames;
    std::optional<std::vector<Pose>> gt_poses;
    std::vector<std::vector<FeatureRecord>> feature_records;  // one list per frame
    std::vector<LabelEntry> label_vocab;
    int semantic_dim = 1;
    int feature_dim = 0;
    /// Uncorrupted reference labels, present for synthetic sequences.
    std::optional<std::vector<LabelImage>> gt_semantics;
    /// Loaded from a sequence without semantics; semantic loss weights must be zero.
    bool geometric_only = false;

    void validate() const;
};

/// Camera orbit around the origin: the eye sits at (radius cos a, height, radius sin a).
struct OrbitConfig {
    double radius = 1.2;
    double height = 0.35;
    double degrees_per_frame = 0.5;
    double start_degrees = 0.0;
};

struct SynthConfig {
    std::uint64_t seed = 42;
    int gaussian_count = 50;
    OrbitConfig trajectory;
    int frame_count = 20;
    int width = 64;
    int height = 64;
    int class_count = 6;
    double label_flip_rate = 0.0;
    double feature_noise = 0.02;
    int feature_dim = 16;
    /// Focal length in units of the image width.
    double focal_scale = 1.0;
    /// Pixels whose rendered silhouette reaches this get a depth and a class label;
    /// the rest are invalid depth and background. Depth is the silhouette-normalised
    /// composite, i.e. the expected surface depth.
    double coverage_threshold = 0.1;
    /// Masks smaller than this many pixels produce no feature record.
    int min_mask_pixels = 4;

    void validate() const;
};

struct SyntheticData {
    SequenceBundle bundle;
    GaussianMap gt_map;
    /// Ground-truth class of every feature record, parallel to bundle.feature_records.
    std::vector<std::vector<int>> gt_mask_labels;
};

/// Semantic channel count used for `class_count` object classes: background slot 0,
/// classes 1..class_count, and the novel slot at the end.
int semantic_dim_for_classes(int class_count);

/// Samples a ground-truth map, renders every frame along the orbit, emits per-instance
/// feature records and flips record labels at `label_flip_rate`. Deterministic per seed.
SyntheticData generate_synthetic(const SynthConfig& cfg);

/// Writes the bundle directory layout (manifest.json, rgb/, depth/, sem/, poses.txt,
/// features/, and sem_gt/ when reference labels exist).
void save_bundle(const SequenceBundle& bundle, const std::filesystem::path& dir);

/// Reads a bundle directory, or a TUM-RGBD style directory with associations.txt
/// (geometric-only). Throws LoadError naming the offending file.
SequenceBundle load_bundle(const std::filesystem::path& dir);

/// H x W x S one-hot image; label 0 (background) maps to channel 0.
ImageF one_hot_encode(const LabelImage& labels, int semantic_dim);

/// TUM trajectory lines `timestamp tx ty tz qx qy qz qw` holding camera-to-world poses.
/// The in-memory poses are world-to-camera and are inverted on the way in and out.
void write_tum_trajectory(const std::filesystem::path& path, const std::vector<double>& timestamps,
                          const std::vector<Pose>& poses);
struct TimedPose {
    double timestamp = 0.0;
    Pose pose;
};
std::vector<TimedPose> read_tum_trajectory(const std::filesystem::path& path);

}  // namespace semsplat
