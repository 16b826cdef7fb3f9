// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "oracles/finite_difference.hpp"
#include "oracles/naive_renderer.hpp"
#include "semsplat/dataset_io.hpp"
#include "semsplat/mapper.hpp"
#include "semsplat/metrics.hpp"
#include "semsplat/semantic_graph.hpp"
#include "semsplat/slam_pipeline.hpp"
#include "semsplat/splat_renderer.hpp"
#include "semsplat/tracker.hpp"
#include "test_scenes.hpp"

#ifndef SEMSPLAT_CLI_PATH
#error "SEMSPLAT_CLI_PATH must name the semsplat executable"
#endif

using namespace semsplat;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects sub-results; the first failures are kept for the report line.
class Checker {
public:
    void require(bool ok, const std::string& what) {
        if (ok) return;
        pass_ = false;
        if (failures_++ < 3) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    void note(const std::string& text) { info_ += (info_.empty() ? "" : ", ") + text; }
    Outcome outcome() const {
        std::string d = info_;
        if (!pass_) {
            d += (d.empty() ? "" : "; ") + std::string("failed: ") + notes_;
            if (failures_ > 3) d += " (+" + std::to_string(failures_ - 3) + " more)";
        }
        return {pass_, d};
    }

private:
    bool pass_ = true;
    int failures_ = 0;
    std::string notes_, info_;
};

std::string fmt(double x, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << x;
    return s.str();
}

fs::path scratch_root() {
    return fs::temp_directory_path() / ("semsplat_acceptance_" + std::to_string(::getpid()));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SEMSPLAT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

// 1
Outcome gradients() {
    Checker c;
    std::size_t checked = 0;
    double worst = 0.0;
    for (unsigned seed = 1; seed <= 20; ++seed) {
        const int n = 1 + static_cast<int>(seed % 10);
        const auto scene = testing::random_scene(1000 + seed, {.gaussians = n});
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> sym(-1.0, 1.0);
        RenderWeights w = RenderWeights::zeros(16, 16, 4);
        for (auto* img : {&w.color, &w.depth, &w.semantic, &w.silhouette}) {
            for (double& x : img->data()) x = sym(rng);
        }
        for (const auto& e : oracle::compare_gradients(scene.map, scene.pose, scene.intr, w)) {
            ++checked;
            const double scale = std::max({std::abs(e.analytic), std::abs(e.numeric), 1e-3});
            worst = std::max(worst, std::abs(e.analytic - e.numeric) / scale);
            c.require(oracle::gradient_matches(e), "scene " + std::to_string(seed) + " " + e.name + " analytic " +
                                                       fmt(e.analytic, 10) + " numeric " + fmt(e.numeric, 10));
        }
    }
    c.note(std::to_string(checked) + " partials");
    c.note("worst scaled error " + fmt(worst, 3));
    return c.outcome();
}

std::vector<testing::Scene> oracle_scenes() {
    std::vector<testing::Scene> out;
    for (unsigned seed = 1; seed <= 10; ++seed) {
        out.push_back(testing::random_scene(2000 + seed, {.gaussians = 10, .width = 48, .height = 40,
                                                          .min_radius_px = 1.5, .max_radius_px = 10.0,
                                                          .max_opacity = 0.95}));
    }
    return out;
}

// 2
Outcome naive_equivalence() {
    Checker c;
    double worst = 0.0;
    for (const auto& s : oracle_scenes()) {
        const auto frame = render(s.map, s.pose, s.intr);
        const auto ref = oracle::naive_render(s.map, s.pose, s.intr);
        for (int v = 0; v < ref.height; ++v) {
            for (int u = 0; u < ref.width; ++u) {
                const std::size_t p = static_cast<std::size_t>(v) * ref.width + u;
                for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(frame.color(u, v, k) - ref.color[p * 3 + k]));
                worst = std::max(worst, std::abs(frame.depth(u, v) - ref.depth[p]));
                worst = std::max(worst, std::abs(frame.silhouette(u, v) - ref.silhouette_product[p]));
                for (int k = 0; k < ref.sdim; ++k) {
                    worst = std::max(worst, std::abs(frame.semantic(u, v, k) - ref.semantic[p * ref.sdim + k]));
                }
            }
        }
    }
    c.require(worst <= 1e-6, "max difference " + fmt(worst, 3));
    c.note("max difference " + fmt(worst, 3));
    return c.outcome();
}

// 3
Outcome silhouette_conservation() {
    Checker c;
    double worst = 0.0;
    std::size_t pixels = 0;
    auto scenes = oracle_scenes();
    for (unsigned seed = 1; seed <= 20; ++seed) scenes.push_back(testing::random_scene(1000 + seed, {.gaussians = 10}));
    for (const auto& s : scenes) {
        const auto frame = render(s.map, s.pose, s.intr);
        const auto ref = oracle::naive_render(s.map, s.pose, s.intr);
        for (int v = 0; v < s.intr.height; ++v) {
            for (int u = 0; u < s.intr.width; ++u) {
                // Sum of f_i T_i over the renderer's own contributor list.
                double sum = 0.0, t = 1.0;
                for (const auto& k : frame.contributors(u, v)) {
                    sum += k.weight * t;
                    t *= 1.0 - k.weight;
                }
                const std::size_t p = static_cast<std::size_t>(v) * s.intr.width + u;
                worst = std::max({worst, std::abs(sum - frame.silhouette(u, v)),
                                  std::abs(ref.silhouette_sum[p] - ref.silhouette_product[p])});
                ++pixels;
            }
        }
    }
    c.require(worst <= 1e-6, "max difference " + fmt(worst, 3));
    c.note(std::to_string(pixels) + " pixels, max difference " + fmt(worst, 3));
    return c.outcome();
}

Pose perturb(const Pose& p, double deg, double dist, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
    Pose out = Pose::from(Eigen::Quaterniond(Eigen::AngleAxisd(deg * kDeg, axis)), Vec3::Zero()) * p;
    const Vec3 centre = out.camera_center() + dist * dir;
    out.translation = -(out.rotation * centre);
    return out;
}

// 4
Outcome pose_recovery() {
    Checker c;
    const SyntheticData d = generate_synthetic(SynthConfig{});
    const TrackingConfig cfg;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_rot = 0.0, worst_trans = 0.0;
    for (std::size_t f = 0; f < d.bundle.frames.size(); ++f) {
        const Pose& truth = (*d.bundle.gt_poses)[f];
        const Pose init = perturb(truth, 2.0 * unit(rng), 0.05 * unit(rng), rng);
        const TrackResult r = track_frame(d.gt_map, init, d.bundle.frames[f], d.bundle.intrinsics, cfg);
        const double rot = rotation_error_deg(r.pose, truth);
        const double trans = translation_error(r.pose, truth);
        worst_rot = std::max(worst_rot, rot);
        worst_trans = std::max(worst_trans, trans);
        c.require(rot <= 0.05 && trans <= 1e-3,
                  "frame " + std::to_string(f) + " " + fmt(rot, 3) + " deg / " + fmt(trans, 3));
    }
    c.note("worst " + fmt(worst_rot, 3) + " deg / " + fmt(worst_trans, 3));

    const RunResult run = run_sequence(d.bundle, PipelineConfig{});
    const double ate = run.metrics.ate_rmse.value_or(INFINITY);
    c.require(ate < 1e-2, "sequence ATE " + fmt(ate, 3));
    c.note("sequence ATE " + fmt(ate, 3));
    return c.outcome();
}

RleMask box_mask(int u0, int v0, int u1, int v1) {
    Image<std::uint8_t> m(8, 8, 1);
    for (int v = v0; v < v1; ++v) {
        for (int u = u0; u < u1; ++u) m(u, v) = 1;
    }
    return RleMask::encode(m);
}

// 5
Outcome clustering() {
    Checker c;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> frame_d(0, 5), label_d(1, 3), anchor_d(0, 2), size_d(1, 8);
    std::normal_distribution<double> noise(0.0, 0.25);
    for (int instance = 0; instance < 200; ++instance) {
        const int n = size_d(rng);
        std::vector<MaskNode> nodes;
        for (int i = 0; i < n; ++i) {
            VecX f = VecX::Zero(3);
            f[anchor_d(rng)] = 1.0;
            for (int k = 0; k < 3; ++k) f[k] += noise(rng);
            if (f.norm() < 1e-9) f[0] = 1.0;
            nodes.push_back(MaskNode::create(frame_d(rng), i, label_d(rng), f, box_mask(1, 1, 4, 4)));
        }
        const auto g = build_graph(nodes, 0.8, 3);

        std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const auto &a = g.nodes[i], &b = g.nodes[j];
                adj[i][j] = i != j && a.frame_index != b.frame_index && std::abs(a.frame_index - b.frame_index) <= 3 &&
                            a.feature.dot(b.feature) >= 0.8;
            }
        }
        std::vector<double> score(n, 1.0);
        for (int i = 0; i < n; ++i) {
            int deg = 0, same = 0;
            for (int j = 0; j < n; ++j) {
                if (!adj[i][j]) continue;
                ++deg;
                same += g.nodes[i].label == g.nodes[j].label;
            }
            if (deg > 0) score[i] = static_cast<double>(same) / deg;
        }
        std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
        for (int i = 0; i < n; ++i) {
            reach[i][i] = true;
            for (int j = 0; j < n; ++j) {
                if (adj[i][j] && score[i] > 2.0 / 3.0 && score[j] > 2.0 / 3.0) reach[i][j] = true;
            }
        }
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) reach[i][j] = reach[i][j] || (reach[i][k] && reach[k][j]);
            }
        }
        const auto r = cluster(g);
        bool same = true;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) same = same && (r.cluster_of[i] == r.cluster_of[j]) == reach[i][j];
        }
        c.require(same, "instance " + std::to_string(instance));
    }
    c.note("200 instances");

    // A cabinet seen in five frames, labelled differently in one of them.
    std::vector<MaskNode> cabinet;
    for (int f = 1; f <= 5; ++f) {
        VecX feat(3);
        feat << 1.0, 0.01 * f, 0.0;
        cabinet.push_back(MaskNode::create(f, 0, f == 2 ? 5 : 3, feat, box_mask(2, 2, 5, 5)));
    }
    const double s = consistency_score(build_graph(cabinet), 0);
    c.require(s == 0.75, "cabinet score " + fmt(s, 17));
    c.note("cabinet score " + fmt(s));
    return c.outcome();
}

// 6
Outcome label_restoration() {
    Checker c;
    int flipped_total = 0, restored_total = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SynthConfig sc;
        sc.seed = seed;
        sc.label_flip_rate = 0.2;
        sc.feature_noise = 0.02;
        const SyntheticData d = generate_synthetic(sc);
        std::vector<MaskNode> nodes;
        std::map<int, LabelImage> frames;
        for (std::size_t f = 0; f < d.bundle.frames.size(); ++f) {
            frames[static_cast<int>(f)] = d.bundle.frames[f].semantic;
            for (const auto& rec : d.bundle.feature_records[f]) nodes.push_back(MaskNode::from_record(rec));
        }
        const auto g = build_graph(nodes, 0.8, 8);
        const auto updated = relabel_frames(cluster(g), g, frames);
        int flipped = 0, restored = 0;
        for (std::size_t f = 0; f < d.bundle.frames.size(); ++f) {
            for (std::size_t m = 0; m < d.bundle.feature_records[f].size(); ++m) {
                const auto& rec = d.bundle.feature_records[f][m];
                const int truth = d.gt_mask_labels[f][m];
                if (rec.label == truth) continue;
                ++flipped;
                bool ok = true;
                rec.mask.for_each_pixel([&](int u, int v) { ok = ok && updated.at(static_cast<int>(f))(u, v) == truth; });
                restored += ok;
            }
        }
        const double rate = flipped ? static_cast<double>(restored) / flipped : 1.0;
        c.require(rate >= 0.95, "seed " + std::to_string(seed) + " " + fmt(rate, 3));
        flipped_total += flipped;
        restored_total += restored;
    }
    c.require(flipped_total > 0, "no flipped masks");
    c.note(std::to_string(restored_total) + "/" + std::to_string(flipped_total) + " flipped masks restored");
    return c.outcome();
}

// 7
Outcome ablation() {
    Checker c;
    std::string ates, segs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SynthConfig sc;
        sc.seed = seed;
        sc.label_flip_rate = 0.2;
        const SequenceBundle bundle = generate_synthetic(sc).bundle;
        MetricsReport m[3];
        for (int v = 0; v < 3; ++v) {
            PipelineConfig pc;
            pc.semantic_enabled = v > 0;
            pc.consistency_enabled = v > 1;
            m[v] = run_sequence(bundle, pc).metrics;
        }
        const std::string tag = "seed " + std::to_string(seed);
        c.require(m[2].seg_l1 < m[1].seg_l1,
                  tag + " seg_l1 " + fmt(m[2].seg_l1) + " vs " + fmt(m[1].seg_l1));
        c.require(*m[1].ate_rmse <= *m[0].ate_rmse,
                  tag + " ATE seg " + fmt(*m[1].ate_rmse, 3) + " vs no-seg " + fmt(*m[0].ate_rmse, 3));
        segs += (segs.empty() ? "" : " ") + fmt(m[1].seg_l1, 3) + ">" + fmt(m[2].seg_l1, 3);
        ates += (ates.empty() ? "" : " ") + fmt(*m[0].ate_rmse, 2) + "/" + fmt(*m[1].ate_rmse, 2);
    }
    c.note("seg_l1 seg>seg+cons " + segs);
    c.note("ATE no-seg/seg " + ates);

    // The ablate command on seed 1.
    const fs::path root = scratch_root() / "ablate";
    fs::remove_all(root);
    const std::string bundle = (root / "bundle").string();
    const bool ran = run_cli("generate --set synth.seed=1 --set synth.label_flip_rate=0.2 --out " + bundle) == 0 &&
                     run_cli("ablate --bundle " + bundle + " --out " + (root / "ablate").string()) == 0;
    c.require(ran, "ablate command failed");
    if (ran) {
        const auto j = nlohmann::json::parse(slurp(root / "ablate" / "ablation.json"));
        const std::string table = slurp(root / "ablate" / "ablation.txt");
        const double seg = j["seg"]["seg_l1"], cons = j["seg+consistency"]["seg_l1"];
        const double ate_seg = j["seg"]["ate_rmse"], ate_none = j["no-seg"]["ate_rmse"];
        c.require(table.find("seg+consistency") != std::string::npos, "table rows missing");
        c.require(cons < seg, "ablate seg_l1 " + fmt(cons) + " vs " + fmt(seg));
        c.require(ate_seg <= ate_none, "ablate ATE " + fmt(ate_seg, 3) + " vs " + fmt(ate_none, 3));
    }
    fs::remove_all(root);
    return c.outcome();
}

// 8
Outcome metric_checks() {
    Checker c;
    ImageF a(10, 10, 1), b(10, 10, 1);
    b(3, 4) = 1.0;
    c.require(psnr(a, b) == 20.0, "psnr " + fmt(psnr(a, b), 17));

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ImageF img(24, 20, 3);
    for (auto& x : img.data()) x = unit(rng);
    c.require(ssim(img, img) == 1.0, "ssim(a, a) " + fmt(ssim(img, img), 17));

    std::normal_distribution<double> n(0.0, 1.0);
    auto random_pose = [&](double spread) {
        return Pose::from(Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)), spread * Vec3(n(rng), n(rng), n(rng)));
    };
    std::vector<Pose> gt, est;
    for (int i = 0; i < 12; ++i) {
        gt.push_back(random_pose(1.0));
        est.push_back(gt.back());
        est.back().translation += 0.05 * Vec3(n(rng), n(rng), n(rng));
    }
    const double base = ate_rmse(est, gt);
    double drift = 0.0;
    for (int k = 0; k < 50; ++k) {
        const Pose t = random_pose(5.0);
        std::vector<Pose> moved;
        for (const auto& p : est) moved.push_back(p * t);
        drift = std::max(drift, std::abs(ate_rmse(moved, gt) - base));
    }
    c.require(drift <= 1e-9, "ATE drift " + fmt(drift, 3));

    LabelImage ref(16, 12, 1), pred(16, 12, 1);
    std::uniform_int_distribution<int> lab(0, 4);
    for (auto& x : ref.data()) x = static_cast<std::uint16_t>(lab(rng));
    for (auto& x : pred.data()) x = static_cast<std::uint16_t>(lab(rng));
    int differ = 0;
    for (std::size_t i = 0; i < ref.data().size(); ++i) differ += ref.data()[i] != pred.data()[i];
    const double expected = 2.0 * differ / static_cast<double>(ref.data().size());
    c.require(std::abs(seg_l1(pred, ref) - expected) <= 1e-12, "seg_l1 " + fmt(seg_l1(pred, ref)));
    c.note("ATE drift " + fmt(drift, 3));
    return c.outcome();
}

// 9
Outcome determinism() {
    Checker c;
    const fs::path root = scratch_root() / "determinism";
    fs::remove_all(root);
    for (const char* name : {"a", "b"}) {
        const std::string bundle = (root / name / "bundle").string();
        const std::string out = (root / name / "run").string();
        c.require(run_cli("generate --set synth.seed=42 --out " + bundle) == 0, std::string("generate ") + name);
        c.require(run_cli("run --bundle " + bundle + " --out " + out) == 0, std::string("run ") + name);
        c.require(run_cli("eval --bundle " + bundle + " --result " + out) == 0, std::string("eval ") + name);
    }
    for (const char* file : {"trajectory.txt", "metrics.json"}) {
        const std::string x = slurp(root / "a" / "run" / file), y = slurp(root / "b" / "run" / file);
        c.require(!x.empty() && x == y, std::string(file) + " differs");
    }
    c.note("trajectory.txt and metrics.json compared");
    fs::remove_all(root);
    return c.outcome();
}

// 10
Outcome loss_arithmetic() {
    Checker c;
    RenderedFrame rf;
    rf.color = ImageF(1, 1, 3);
    rf.depth = ImageF(1, 1, 1, 3.0);
    rf.semantic = ImageF(1, 1, 3);
    rf.silhouette = ImageF(1, 1, 1, 1.0);
    rf.color(0, 0, 1) = 0.75;
    rf.color(0, 0, 2) = 0.5;
    rf.semantic(0, 0, 0) = 0.5;
    rf.semantic(0, 0, 1) = 0.5;
    Observation obs;
    obs.rgb = ImageF(1, 1, 3);
    obs.rgb(0, 0, 1) = 0.25;
    obs.rgb(0, 0, 2) = 1.0;
    obs.depth = ImageF(1, 1, 1, 2.0);
    obs.semantic = LabelImage(1, 1, 1, 1);
    // Unit residual sums for depth, colour and semantics under weights 1, 0.5 and 1.5.
    const double lt = tracking_loss(rf, obs);
    c.require(lt == 3.0, "tracking loss " + fmt(lt, 17));
    const double lopt = compose_objective(2.0, 1.5);
    c.require(lopt == 5.0, "objective " + fmt(lopt, 17));
    c.note("L_t " + fmt(lt) + ", L_opt " + fmt(lopt));
    return c.outcome();
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double budget_s;  // 0 for no limit
    };
    const std::vector<Criterion> criteria = {
        {"gradient correctness", gradients, 30.0},
        {"renderer oracle equivalence", naive_equivalence, 10.0},
        {"compositing conservation", silhouette_conservation, 0.0},
        {"pose recovery", pose_recovery, 60.0},
        {"clustering oracle", clustering, 0.0},
        {"label restoration", label_restoration, 30.0},
        {"ablation ordering", ablation, 0.0},
        {"metric correctness", metric_checks, 0.0},
        {"determinism", determinism, 0.0},
        {"loss arithmetic", loss_arithmetic, 0.0},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (criteria[i].budget_s > 0.0 && secs > criteria[i].budget_s) {
            o.pass = false;
            o.detail += "; over the " + fmt(criteria[i].budget_s) + " s budget";
        }
        failed += !o.pass;
        std::printf("%s %2zu %s (%.1f s) %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, secs,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    fs::remove_all(scratch_root());
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
