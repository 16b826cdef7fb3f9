#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>

#include <unistd.h>

#include "semsplat/dataset_io.hpp"
#include "semsplat/image_io.hpp"

using namespace semsplat;
namespace fs = std::filesystem;

namespace {

SynthConfig small_config(std::uint64_t seed = 42) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.frame_count = 4;
    cfg.width = 32;
    cfg.height = 24;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every file under `dir` keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return out;
}

fs::path scratch(const std::string& name) {
    return fs::temp_directory_path() / ("semsplat_" + name + "_" + std::to_string(::getpid()));
}

}  // namespace

TEST_CASE("synthetic generator basics") {
    const SyntheticData d = generate_synthetic(small_config());
    const auto& b = d.bundle;
    CHECK(b.frames.size() == 4);
    CHECK(b.gt_poses->size() == 4);
    CHECK(b.feature_records.size() == 4);
    CHECK(b.semantic_dim == semantic_dim_for_classes(6));
    CHECK(semantic_dim_for_classes(6) == 8);
    CHECK(d.gt_map.size() == 50);
    CHECK_NOTHROW(b.validate());
    for (const auto& g : d.gt_map.gaussians()) {
        CHECK(g.radius >= 0.02);
        CHECK(g.radius <= 0.08);
        CHECK(g.opacity >= 0.6);
        CHECK(g.opacity <= 0.95);
        CHECK(g.position.cwiseAbs().maxCoeff() <= 0.5);
    }
    for (const auto& obs : b.frames) {
        for (std::size_t p = 0; p < obs.depth.pixel_count(); ++p) {
            // Depth and class labels share the coverage rule.
            CHECK((obs.depth.data()[p] > 0.0) == ((*b.gt_semantics)[obs.frame_index].data()[p] != 0));
        }
    }
    CHECK_THROWS_AS(generate_synthetic([] { auto c = small_config(); c.trajectory.radius = 0.0; return c; }()),
                    InvalidArgument);
}

TEST_CASE("label flipping") {
    SUBCASE("rate 0 keeps every label") {
        const SyntheticData d = generate_synthetic(small_config());
        for (std::size_t f = 0; f < d.bundle.feature_records.size(); ++f) {
            for (std::size_t i = 0; i < d.bundle.feature_records[f].size(); ++i) {
                CHECK(d.bundle.feature_records[f][i].label == d.gt_mask_labels[f][i]);
            }
            CHECK(d.bundle.frames[f].semantic == (*d.bundle.gt_semantics)[f]);
        }
    }
    SUBCASE("rate 1 with two classes flips every label") {
        SynthConfig cfg = small_config();
        cfg.class_count = 2;
        cfg.label_flip_rate = 1.0;
        const SyntheticData d = generate_synthetic(cfg);
        std::size_t checked = 0;
        for (std::size_t f = 0; f < d.bundle.feature_records.size(); ++f) {
            for (std::size_t i = 0; i < d.bundle.feature_records[f].size(); ++i) {
                const auto& rec = d.bundle.feature_records[f][i];
                CHECK(rec.label == 3 - d.gt_mask_labels[f][i]);
                rec.mask.for_each_pixel([&](int u, int v) { CHECK(d.bundle.frames[f].semantic(u, v) == rec.label); });
                ++checked;
            }
        }
        CHECK(checked > 0);
    }
}

TEST_CASE("feature embeddings separate classes at tau 0.8") {
    const SyntheticData d = generate_synthetic(small_config(3));
    std::vector<std::pair<const FeatureRecord*, int>> recs;
    for (std::size_t f = 0; f < d.bundle.feature_records.size(); ++f) {
        for (std::size_t i = 0; i < d.bundle.feature_records[f].size(); ++i) {
            recs.emplace_back(&d.bundle.feature_records[f][i], d.gt_mask_labels[f][i]);
        }
    }
    REQUIRE(recs.size() > 10);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> pick(0, recs.size() - 1);
    int same = 0, different = 0;
    for (int k = 0; k < 10000; ++k) {
        const auto& [a, la] = recs[pick(rng)];
        const auto& [b, lb] = recs[pick(rng)];
        double dot = 0.0;
        for (std::size_t i = 0; i < a->embedding.size(); ++i) dot += a->embedding[i] * b->embedding[i];
        if (la == lb) {
            ++same;
            CHECK(dot >= 0.8);
        } else {
            ++different;
            CHECK(dot < 0.8);
        }
    }
    CHECK(same > 0);
    CHECK(different > 0);
}

TEST_CASE("bundle save and load") {
    const fs::path root = scratch("io");
    fs::remove_all(root);
    const SyntheticData d = generate_synthetic(small_config());

    SUBCASE("round trip") {
        save_bundle(d.bundle, root / "a");
        const SequenceBundle b = load_bundle(root / "a");
        CHECK(b.intrinsics == d.bundle.intrinsics);
        CHECK(b.semantic_dim == d.bundle.semantic_dim);
        CHECK(b.feature_dim == d.bundle.feature_dim);
        CHECK(b.label_vocab == d.bundle.label_vocab);
        REQUIRE(b.frames.size() == d.bundle.frames.size());
        for (std::size_t f = 0; f < b.frames.size(); ++f) {
            const auto& x = b.frames[f];
            const auto& y = d.bundle.frames[f];
            CHECK(x.frame_index == y.frame_index);
            CHECK(x.timestamp == doctest::Approx(y.timestamp).epsilon(1e-9));
            CHECK(x.semantic == y.semantic);
            CHECK(x.depth == y.depth);  // generated depth is already float-exact
            for (std::size_t p = 0; p < x.rgb.data().size(); ++p) CHECK(std::abs(x.rgb.data()[p] - y.rgb.data()[p]) < 1e-6);
            CHECK((*b.gt_semantics)[f] == (*d.bundle.gt_semantics)[f]);
            REQUIRE(b.feature_records[f].size() == d.bundle.feature_records[f].size());
            for (std::size_t i = 0; i < b.feature_records[f].size(); ++i) {
                const auto& r = b.feature_records[f][i];
                const auto& s = d.bundle.feature_records[f][i];
                CHECK(r.label == s.label);
                CHECK(r.mask == s.mask);
                CHECK(r.embedding == s.embedding);
            }
            CHECK(translation_error((*b.gt_poses)[f], (*d.bundle.gt_poses)[f]) < 1e-6);
            CHECK(rotation_error_deg((*b.gt_poses)[f], (*d.bundle.gt_poses)[f]) < 1e-4);
        }
    }
    SUBCASE("same seed writes identical bytes") {
        save_bundle(d.bundle, root / "a");
        save_bundle(generate_synthetic(small_config()).bundle, root / "b");
        CHECK(tree(root / "a") == tree(root / "b"));
    }
    SUBCASE("empty directory has no manifest") {
        fs::create_directories(root / "empty");
        try {
            load_bundle(root / "empty");
            FAIL("expected a load error");
        } catch (const LoadError& e) {
            CHECK(std::string(e.what()).find("manifest") != std::string::npos);
        }
    }
    SUBCASE("a missing depth file is reported") {
        save_bundle(d.bundle, root / "a");
        fs::remove(root / "a" / "depth" / "000003.pfm");
        try {
            load_bundle(root / "a");
            FAIL("expected a load error");
        } catch (const LoadError& e) {
            CHECK(e.path().find("000003.pfm") != std::string::npos);
            CHECK(std::string(e.what()).find("frame_count=4") != std::string::npos);
        }
    }
    SUBCASE("corrupt run lengths are reported") {
        save_bundle(d.bundle, root / "a");
        // Runs cover 8 pixels of a 32 x 24 frame.
        std::ofstream(root / "a" / "features" / "000001.json")
            << R"([{"mask_id": 0, "label": 1, "embedding": [1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0], "rle": [5, 3]}])";
        CHECK_THROWS_AS(load_bundle(root / "a"), LoadError);
    }
    fs::remove_all(root);
}

TEST_CASE("one_hot_encode") {
    LabelImage labels(2, 1, 1);
    labels(0, 0) = 3;
    const ImageF h = one_hot_encode(labels, 6);
    CHECK(h.channels() == 6);
    for (int c = 0; c < 6; ++c) {
        CHECK(h(0, 0, c) == (c == 3 ? 1.0 : 0.0));
        CHECK(h(1, 0, c) == (c == 0 ? 1.0 : 0.0));
    }
    labels(1, 0) = 6;
    CHECK_THROWS_AS(one_hot_encode(labels, 6), InvalidArgument);
}

TEST_CASE("TUM trajectory files hold camera-to-world poses") {
    const fs::path path = scratch("traj.txt");
    const Pose p = Pose::look_at(Vec3(1, 2, 3), Vec3::Zero(), Vec3::UnitY());
    write_tum_trajectory(path, {0.5, 1.0}, {Pose::identity(), p});
    const auto back = read_tum_trajectory(path);
    REQUIRE(back.size() == 2);
    CHECK(back[1].timestamp == 1.0);
    CHECK(translation_error(back[1].pose, p) < 1e-9);
    CHECK(rotation_error_deg(back[1].pose, p) < 1e-7);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::istringstream fields(line);
    double t, x, y, z;
    fields >> t >> x >> y >> z;
    CHECK((Vec3(x, y, z) - Vec3(1, 2, 3)).norm() < 1e-9);

    CHECK_THROWS_AS(write_tum_trajectory(path, {0.0}, {}), InvalidArgument);
    std::ofstream(path) << "0 1 2\n";
    CHECK_THROWS_AS(read_tum_trajectory(path), LoadError);
    fs::remove(path);
}

TEST_CASE("image and mask files round trip") {
    const fs::path dir = scratch("img");
    fs::create_directories(dir);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    ImageF rgb(5, 3, 3);
    for (auto& x : rgb.data()) x = std::round(unit(rng) * 255.0) / 255.0;
    write_png_rgb8(dir / "c.png", rgb);
    CHECK(read_png_rgb8(dir / "c.png") == rgb);

    Image<std::uint16_t> labels(5, 3, 1);
    for (auto& x : labels.data()) x = static_cast<std::uint16_t>(unit(rng) * 60000);
    write_png_gray16(dir / "l.png", labels);
    CHECK(read_png_gray16(dir / "l.png") == labels);

    ImageF depth(5, 3, 1);
    for (auto& x : depth.data()) x = static_cast<float>(unit(rng) * 4.0);
    write_pfm(dir / "d.pfm", depth);
    CHECK(read_pfm(dir / "d.pfm") == depth);
    CHECK_THROWS_AS(read_pfm(dir / "missing.pfm"), LoadError);

    Image<std::uint8_t> m(7, 4, 1);
    for (auto& x : m.data()) x = unit(rng) < 0.4;
    const RleMask rle = RleMask::encode(m);
    CHECK(rle.decode() == m);
    RleMask bad = rle;
    bad.runs.push_back(3);
    CHECK_THROWS_AS(bad.decode(), InvalidArgument);
    fs::remove_all(dir);
}
