#include "semsplat/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "semsplat/image_io.hpp"
#include "semsplat/splat_renderer.hpp"

namespace semsplat {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string frame_name(int index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06d.%s", index, ext);
    return buf;
}

}  // namespace

void SequenceBundle::validate() const {
    intrinsics.validate();
    if (semantic_dim < 1) throw InvalidArgument("bundle semantic_dim must be >= 1");
    if (gt_poses && gt_poses->size() != frames.size()) {
        throw InvalidArgument("bundle has " + std::to_string(frames.size()) + " frames but " +
                              std::to_string(gt_poses->size()) + " ground-truth poses");
    }
    if (feature_records.size() != frames.size()) {
        throw InvalidArgument("bundle has " + std::to_string(frames.size()) + " frames but " +
                              std::to_string(feature_records.size()) + " feature lists");
    }
    if (gt_semantics && gt_semantics->size() != frames.size()) {
        throw InvalidArgument("bundle reference label count does not match the frame count");
    }
    std::set<int> vocab;
    for (const auto& e : label_vocab) vocab.insert(e.id);
    for (const auto& obs : frames) {
        obs.validate(intrinsics);
        for (auto label : obs.semantic.data()) {
            if (!vocab.count(label)) {
                throw InvalidArgument("frame " + std::to_string(obs.frame_index) + " uses label " +
                                      std::to_string(label) + " missing from the label vocabulary");
            }
        }
    }
    for (const auto& records : feature_records) {
        for (const auto& r : records) {
            if (static_cast<int>(r.embedding.size()) != feature_dim) {
                throw InvalidArgument("feature record embedding dimension does not match feature_dim");
            }
            if (r.mask.width != intrinsics.width || r.mask.height != intrinsics.height) {
                throw InvalidArgument("feature record mask does not match the frame size");
            }
            r.mask.validate();
        }
    }
}

void SynthConfig::validate() const {
    if (gaussian_count < 1) throw InvalidArgument("synth.gaussian_count must be >= 1");
    if (frame_count < 1) throw InvalidArgument("synth.frame_count must be >= 1");
    if (width < 1 || height < 1) throw InvalidArgument("synth resolution must be positive");
    if (class_count < 1) throw InvalidArgument("synth.class_count must be >= 1");
    if (!(label_flip_rate >= 0.0 && label_flip_rate <= 1.0)) throw InvalidArgument("synth.label_flip_rate must lie in [0,1]");
    if (!(feature_noise >= 0.0)) throw InvalidArgument("synth.feature_noise must be >= 0");
    if (feature_dim < 1) throw InvalidArgument("synth.feature_dim must be >= 1");
    if (!(trajectory.radius > 0.0)) throw InvalidArgument("degenerate trajectory: orbit radius must be positive");
    if (!(focal_scale > 0.0)) throw InvalidArgument("synth.focal_scale must be positive");
    if (!(coverage_threshold > 0.0 && coverage_threshold < 1.0)) {
        throw InvalidArgument("synth.coverage_threshold must lie in (0,1)");
    }
}

int semantic_dim_for_classes(int class_count) { return class_count + 2; }

SyntheticData generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    const int classes = cfg.class_count;
    const int sdim = semantic_dim_for_classes(classes);
    const int fdim = cfg.feature_dim;

    SyntheticData out{SequenceBundle{}, GaussianMap(sdim), {}};
    SequenceBundle& bundle = out.bundle;
    const double focal = cfg.focal_scale * cfg.width;
    bundle.intrinsics = {focal, focal, (cfg.width - 1) / 2.0, (cfg.height - 1) / 2.0, cfg.width, cfg.height};
    bundle.semantic_dim = sdim;
    bundle.feature_dim = fdim;
    bundle.label_vocab.push_back({0, "background"});
    for (int k = 1; k <= classes; ++k) bundle.label_vocab.push_back({k, "class_" + std::to_string(k)});
    bundle.label_vocab.push_back({sdim - 1, "novel"});

    std::vector<Vec3> palette(classes + 1, Vec3::Zero());
    for (int k = 1; k <= classes; ++k) palette[k] = Vec3(uniform(0.15, 0.85), uniform(0.15, 0.85), uniform(0.15, 0.85));

    std::vector<int> class_of(cfg.gaussian_count);
    for (int i = 0; i < cfg.gaussian_count; ++i) {
        Gaussian g;
        g.position = Vec3(uniform(-0.5, 0.5), uniform(-0.5, 0.5), uniform(-0.5, 0.5));
        g.radius = uniform(0.02, 0.08);
        g.opacity = uniform(0.6, 0.95);
        const int k = 1 + static_cast<int>(unit(rng) * classes) % classes;
        class_of[i] = k;
        for (int c = 0; c < 3; ++c) g.color[c] = std::clamp(palette[k][c] + uniform(-0.1, 0.1), 0.0, 1.0);
        g.semantic = one_hot(k, sdim);
        out.gt_map.add(std::move(g), -1);
    }

    // Class anchors: Gram-Schmidt orthonormalised while the dimension allows it.
    std::vector<VecX> anchors(classes + 1);
    for (int k = 1; k <= classes; ++k) {
        VecX a(fdim);
        for (int d = 0; d < fdim; ++d) a[d] = normal(rng);
        if (k <= fdim) {
            for (int j = 1; j < k; ++j) a -= a.dot(anchors[j]) * anchors[j];
        }
        anchors[k] = a.normalized();
    }

    const auto& intr = bundle.intrinsics;
    bundle.gt_poses.emplace();
    bundle.gt_semantics.emplace();
    const double noise_sigma = cfg.feature_noise / std::sqrt(static_cast<double>(fdim));
    for (int f = 0; f < cfg.frame_count; ++f) {
        const double angle = (cfg.trajectory.start_degrees + f * cfg.trajectory.degrees_per_frame) * std::numbers::pi / 180.0;
        const Vec3 eye(cfg.trajectory.radius * std::cos(angle), cfg.trajectory.height,
                       cfg.trajectory.radius * std::sin(angle));
        const Pose pose = Pose::look_at(eye, Vec3::Zero(), Vec3(0, 1, 0));
        bundle.gt_poses->push_back(pose);

        const RenderedFrame rf = render(out.gt_map, pose, intr);
        Observation obs;
        obs.frame_index = f;
        obs.timestamp = f / 30.0;
        obs.rgb = ImageF(cfg.width, cfg.height, 3);
        obs.depth = ImageF(cfg.width, cfg.height, 1);
        LabelImage gt_labels(cfg.width, cfg.height, 1);
        Image<int> dominant(cfg.width, cfg.height, 1, -1);

        for (int v = 0; v < cfg.height; ++v) {
            for (int u = 0; u < cfg.width; ++u) {
                for (int c = 0; c < 3; ++c) obs.rgb(u, v, c) = std::round(std::clamp(rf.color(u, v, c), 0.0, 1.0) * 255.0) / 255.0;
                const double s = rf.silhouette(u, v);
                if (s < cfg.coverage_threshold) continue;
                obs.depth(u, v) = static_cast<float>(rf.depth(u, v) / s);
                double best = -1.0, t = 1.0;
                for (const auto& c : rf.contributors(u, v)) {
                    const double a = c.weight * t;
                    if (a > best) {
                        best = a;
                        dominant(u, v) = static_cast<int>(rf.projected()[c.projected].source_index);
                    }
                    t *= 1.0 - c.weight;
                }
                gt_labels(u, v) = static_cast<std::uint16_t>(class_of[dominant(u, v)]);
            }
        }

        obs.semantic = gt_labels;
        std::vector<FeatureRecord> records;
        std::vector<int> record_gt;
        for (int i = 0; i < cfg.gaussian_count; ++i) {
            Image<std::uint8_t> mask(cfg.width, cfg.height, 1);
            int count = 0;
            for (std::size_t p = 0; p < mask.data().size(); ++p) {
                if (dominant.data()[p] == i) {
                    mask.data()[p] = 1;
                    ++count;
                }
            }
            if (count < cfg.min_mask_pixels) continue;
            FeatureRecord rec;
            rec.frame_index = f;
            rec.mask_id = i;
            rec.label = class_of[i];
            VecX e = anchors[class_of[i]];
            for (int d = 0; d < fdim; ++d) e[d] += noise_sigma * normal(rng);
            e.normalize();
            rec.embedding.assign(e.data(), e.data() + fdim);
            rec.mask = RleMask::encode(mask);
            records.push_back(std::move(rec));
            record_gt.push_back(class_of[i]);
        }
        for (auto& rec : records) {
            if (classes < 2 || !(unit(rng) < cfg.label_flip_rate)) continue;
            const int shift = 1 + static_cast<int>(unit(rng) * (classes - 1)) % (classes - 1);
            rec.label = 1 + (rec.label - 1 + shift) % classes;
            rec.mask.for_each_pixel([&](int u, int v) { obs.semantic(u, v) = static_cast<std::uint16_t>(rec.label); });
        }

        bundle.frames.push_back(std::move(obs));
        bundle.feature_records.push_back(std::move(records));
        bundle.gt_semantics->push_back(std::move(gt_labels));
        out.gt_mask_labels.push_back(std::move(record_gt));
    }
    return out;
}

ImageF one_hot_encode(const LabelImage& labels, int semantic_dim) {
    if (semantic_dim < 1) throw InvalidArgument("semantic_dim must be >= 1");
    ImageF out(labels.width(), labels.height(), semantic_dim);
    for (int v = 0; v < labels.height(); ++v) {
        for (int u = 0; u < labels.width(); ++u) {
            const int label = labels(u, v);
            if (label >= semantic_dim) {
                throw InvalidArgument("label " + std::to_string(label) + " out of range for " +
                                      std::to_string(semantic_dim) + " channels");
            }
            out(u, v, label) = 1.0;
        }
    }
    return out;
}

void write_tum_trajectory(const fs::path& path, const std::vector<double>& timestamps, const std::vector<Pose>& poses) {
    if (timestamps.size() != poses.size()) throw InvalidArgument("timestamp and pose counts differ");
    std::ofstream out(path);
    if (!out) throw LoadError(path.string(), "cannot open file for writing");
    out << std::fixed;
    for (std::size_t i = 0; i < poses.size(); ++i) {
        const Pose c2w = poses[i].inverse();
        const auto& q = c2w.rotation;
        out << std::setprecision(6) << timestamps[i] << std::setprecision(9) << ' ' << c2w.translation.x() << ' '
            << c2w.translation.y() << ' ' << c2w.translation.z() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z()
            << ' ' << q.w() << '\n';
    }
}

std::vector<TimedPose> read_tum_trajectory(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError(path.string(), "cannot open trajectory");
    std::vector<TimedPose> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double ts, tx, ty, tz, qx, qy, qz, qw;
        if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
            throw LoadError(path.string(), "malformed pose on line " + std::to_string(line_no));
        }
        const Pose c2w = Pose::from(Eigen::Quaterniond(qw, qx, qy, qz), Vec3(tx, ty, tz));
        out.push_back({ts, c2w.inverse()});
    }
    return out;
}

void save_bundle(const SequenceBundle& bundle, const fs::path& dir) {
    bundle.validate();
    for (const char* sub : {"rgb", "depth", "sem", "features"}) fs::create_directories(dir / sub);
    if (bundle.gt_semantics) fs::create_directories(dir / "sem_gt");

    const auto& intr = bundle.intrinsics;
    json manifest;
    manifest["format"] = "semsplat-bundle";
    manifest["version"] = 1;
    manifest["frame_count"] = bundle.frames.size();
    manifest["intrinsics"] = {{"fx", intr.focal_x}, {"fy", intr.focal_y}, {"cx", intr.principal_x},
                              {"cy", intr.principal_y}, {"width", intr.width}, {"height", intr.height}};
    manifest["semantic_dim"] = bundle.semantic_dim;
    manifest["feature_dim"] = bundle.feature_dim;
    json vocab = json::array();
    for (const auto& e : bundle.label_vocab) vocab.push_back({{"id", e.id}, {"name", e.name}});
    manifest["label_vocab"] = vocab;
    manifest["has_gt_poses"] = bundle.gt_poses.has_value();
    manifest["has_gt_semantics"] = bundle.gt_semantics.has_value();
    manifest["geometric_only"] = bundle.geometric_only;
    json stamps = json::array();
    for (const auto& f : bundle.frames) stamps.push_back(f.timestamp);
    manifest["timestamps"] = stamps;
    std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';

    for (std::size_t i = 0; i < bundle.frames.size(); ++i) {
        const int idx = static_cast<int>(i);
        const auto& obs = bundle.frames[i];
        write_png_rgb8(dir / "rgb" / frame_name(idx, "png"), obs.rgb);
        write_pfm(dir / "depth" / frame_name(idx, "pfm"), obs.depth);
        write_png_gray16(dir / "sem" / frame_name(idx, "png"), obs.semantic);
        if (bundle.gt_semantics) write_png_gray16(dir / "sem_gt" / frame_name(idx, "png"), (*bundle.gt_semantics)[i]);

        json records = json::array();
        for (const auto& r : bundle.feature_records[i]) {
            records.push_back({{"mask_id", r.mask_id}, {"label", r.label}, {"embedding", r.embedding}, {"rle", r.mask.runs}});
        }
        std::ofstream(dir / "features" / frame_name(idx, "json")) << records.dump() << '\n';
    }

    if (bundle.gt_poses) {
        std::vector<double> stamps_v;
        for (const auto& f : bundle.frames) stamps_v.push_back(f.timestamp);
        write_tum_trajectory(dir / "poses.txt", stamps_v, *bundle.gt_poses);
    }
}

namespace {

fs::path require_file(const fs::path& path, std::size_t frame_count) {
    if (!fs::exists(path)) {
        throw LoadError(path.string(), "missing file (manifest frame_count=" + std::to_string(frame_count) + ")");
    }
    return path;
}

SequenceBundle load_tum_directory(const fs::path& dir) {
    SequenceBundle bundle;
    bundle.geometric_only = true;
    bundle.semantic_dim = 1;
    bundle.label_vocab = {{0, "background"}};

    double fx = 525.0, fy = 525.0, cx = 319.5, cy = 239.5;
    if (fs::exists(dir / "calibration.txt")) {
        std::ifstream calib(dir / "calibration.txt");
        if (!(calib >> fx >> fy >> cx >> cy)) throw LoadError((dir / "calibration.txt").string(), "expected 'fx fy cx cy'");
    }

    std::ifstream assoc(dir / "associations.txt");
    std::string line;
    int line_no = 0;
    while (std::getline(assoc, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        double t_rgb, t_depth;
        std::string rgb_path, depth_path;
        if (!(ss >> t_rgb >> rgb_path >> t_depth >> depth_path)) {
            throw LoadError((dir / "associations.txt").string(), "malformed line " + std::to_string(line_no));
        }
        Observation obs;
        obs.frame_index = static_cast<int>(bundle.frames.size());
        obs.timestamp = t_rgb;
        obs.rgb = read_png_rgb8(dir / rgb_path);
        const auto raw = read_png_gray16(dir / depth_path);
        if (!raw.same_extent(obs.rgb)) throw LoadError((dir / depth_path).string(), "depth size differs from rgb");
        obs.depth = ImageF(raw.width(), raw.height(), 1);
        for (std::size_t p = 0; p < raw.data().size(); ++p) obs.depth.data()[p] = raw.data()[p] / 5000.0;
        obs.semantic = LabelImage(raw.width(), raw.height(), 1);
        bundle.frames.push_back(std::move(obs));
    }
    if (bundle.frames.empty()) throw LoadError((dir / "associations.txt").string(), "no frames listed");
    bundle.intrinsics = {fx, fy, cx, cy, bundle.frames[0].rgb.width(), bundle.frames[0].rgb.height()};
    bundle.feature_records.assign(bundle.frames.size(), {});

    if (fs::exists(dir / "groundtruth.txt")) {
        const auto gt = read_tum_trajectory(dir / "groundtruth.txt");
        std::vector<Pose> matched;
        for (const auto& obs : bundle.frames) {
            auto best = std::min_element(gt.begin(), gt.end(), [&](const TimedPose& a, const TimedPose& b) {
                return std::abs(a.timestamp - obs.timestamp) < std::abs(b.timestamp - obs.timestamp);
            });
            if (best == gt.end() || std::abs(best->timestamp - obs.timestamp) > 0.02) break;
            matched.push_back(best->pose);
        }
        if (matched.size() == bundle.frames.size()) bundle.gt_poses = std::move(matched);
    }
    bundle.validate();
    return bundle;
}

}  // namespace

SequenceBundle load_bundle(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        if (fs::exists(dir / "associations.txt")) return load_tum_directory(dir);
        throw LoadError(manifest_path.string(), "missing manifest");
    }

    json manifest;
    try {
        std::ifstream(manifest_path) >> manifest;
    } catch (const json::exception& e) {
        throw LoadError(manifest_path.string(), std::string("invalid JSON: ") + e.what());
    }

    SequenceBundle bundle;
    std::size_t frame_count = 0;
    std::vector<double> timestamps;
    try {
        frame_count = manifest.at("frame_count").get<std::size_t>();
        const auto& in = manifest.at("intrinsics");
        bundle.intrinsics = {in.at("fx").get<double>(), in.at("fy").get<double>(), in.at("cx").get<double>(),
                             in.at("cy").get<double>(), in.at("width").get<int>(), in.at("height").get<int>()};
        bundle.semantic_dim = manifest.at("semantic_dim").get<int>();
        bundle.feature_dim = manifest.at("feature_dim").get<int>();
        for (const auto& e : manifest.at("label_vocab")) {
            bundle.label_vocab.push_back({e.at("id").get<int>(), e.at("name").get<std::string>()});
        }
        bundle.geometric_only = manifest.value("geometric_only", false);
        timestamps = manifest.value("timestamps", std::vector<double>{});
        if (!timestamps.empty() && timestamps.size() != frame_count) {
            throw LoadError(manifest_path.string(), "timestamps length does not match frame_count");
        }
        if (manifest.at("has_gt_semantics").get<bool>()) bundle.gt_semantics.emplace();
        if (manifest.at("has_gt_poses").get<bool>()) bundle.gt_poses.emplace();
    } catch (const json::exception& e) {
        throw LoadError(manifest_path.string(), std::string("bad manifest field: ") + e.what());
    }

    const auto& intr = bundle.intrinsics;
    for (std::size_t i = 0; i < frame_count; ++i) {
        const int idx = static_cast<int>(i);
        Observation obs;
        obs.frame_index = idx;
        obs.timestamp = timestamps.empty() ? idx / 30.0 : timestamps[i];
        obs.rgb = read_png_rgb8(require_file(dir / "rgb" / frame_name(idx, "png"), frame_count));
        const fs::path depth_path = require_file(dir / "depth" / frame_name(idx, "pfm"), frame_count);
        obs.depth = read_pfm(depth_path);
        if (obs.depth.channels() != 1) throw LoadError(depth_path.string(), "depth PFM must have one channel");
        const fs::path sem_path = require_file(dir / "sem" / frame_name(idx, "png"), frame_count);
        obs.semantic = read_png_gray16(sem_path);
        if (obs.rgb.width() != intr.width || obs.rgb.height() != intr.height || !obs.depth.same_extent(obs.rgb) ||
            !obs.semantic.same_extent(obs.rgb)) {
            throw LoadError(dir.string(), "frame " + std::to_string(idx) + " images do not match the manifest resolution");
        }
        if (bundle.gt_semantics) {
            bundle.gt_semantics->push_back(read_png_gray16(require_file(dir / "sem_gt" / frame_name(idx, "png"), frame_count)));
        }

        const fs::path feat_path = require_file(dir / "features" / frame_name(idx, "json"), frame_count);
        std::vector<FeatureRecord> records;
        try {
            json arr;
            std::ifstream(feat_path) >> arr;
            for (const auto& r : arr) {
                FeatureRecord rec;
                rec.frame_index = idx;
                rec.mask_id = r.at("mask_id").get<int>();
                rec.label = r.at("label").get<int>();
                rec.embedding = r.at("embedding").get<std::vector<double>>();
                rec.mask = {intr.width, intr.height, r.at("rle").get<std::vector<std::uint32_t>>()};
                if (static_cast<int>(rec.embedding.size()) != bundle.feature_dim) {
                    throw LoadError(feat_path.string(), "embedding has " + std::to_string(rec.embedding.size()) +
                                                            " entries, manifest feature_dim is " +
                                                            std::to_string(bundle.feature_dim));
                }
                try {
                    rec.mask.validate();
                } catch (const InvalidArgument& e) {
                    throw LoadError(feat_path.string(), std::string("corrupt RLE for mask ") +
                                                            std::to_string(rec.mask_id) + ": " + e.what());
                }
                records.push_back(std::move(rec));
            }
        } catch (const json::exception& e) {
            throw LoadError(feat_path.string(), std::string("invalid feature file: ") + e.what());
        }
        bundle.frames.push_back(std::move(obs));
        bundle.feature_records.push_back(std::move(records));
    }

    if (bundle.gt_poses) {
        const fs::path poses_path = require_file(dir / "poses.txt", frame_count);
        for (const auto& tp : read_tum_trajectory(poses_path)) bundle.gt_poses->push_back(tp.pose);
        if (bundle.gt_poses->size() != frame_count) {
            throw LoadError(poses_path.string(), "has " + std::to_string(bundle.gt_poses->size()) +
                                                     " poses, manifest frame_count is " + std::to_string(frame_count));
        }
    }
    try {
        bundle.validate();
    } catch (const InvalidArgument& e) {
        throw LoadError(dir.string(), e.what());
    }
    return bundle;
}

}  // namespace semsplat
