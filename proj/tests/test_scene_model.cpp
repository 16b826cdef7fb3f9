#include <doctest.h>

#include <cmath>
#include <numbers>

#include "semsplat/scene_model.hpp"

using namespace semsplat;

TEST_CASE("new_map validates the semantic dimension") {
    CHECK(new_map(8).semantic_dim() == 8);
    CHECK(new_map(8).empty());
    CHECK(new_map(1).semantic_dim() == 1);
    CHECK_THROWS_AS(new_map(0), InvalidArgument);
}

TEST_CASE("transform_point on known poses") {
    const Vec3 p(1, 2, 3);
    CHECK((transform_point(Pose::identity(), p) - p).norm() == 0.0);

    const Pose shift = Pose::from(Eigen::Quaterniond::Identity(), Vec3(1, 0, 0));
    CHECK((transform_point(shift, Vec3(-1, 0, 2)) - Vec3(0, 0, 2)).norm() < 1e-15);

    const Pose rot = Pose::from(Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ())), Vec3::Zero());
    CHECK((transform_point(rot, Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm() < 1e-15);
}

TEST_CASE("pose composition, inverse and retract") {
    const Pose a = Pose::from(Eigen::Quaterniond(Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized())), Vec3(0.1, -0.2, 0.5));
    const Pose b = Pose::from(Eigen::Quaterniond(Eigen::AngleAxisd(-0.7, Vec3(0, 1, 1).normalized())), Vec3(1, 0, 2));
    const Vec3 x(0.3, 0.4, -1.2);
    CHECK((transform_point(a * b, x) - transform_point(a, transform_point(b, x))).norm() < 1e-12);
    CHECK((transform_point(a.inverse(), transform_point(a, x)) - x).norm() < 1e-12);
    CHECK((transform_point(a, a.camera_center())).norm() < 1e-12);

    SUBCASE("retract with zero delta is the identity") {
        const Pose r = a.retract(Vec6::Zero());
        CHECK(rotation_error_deg(r, a) < 1e-9);
        CHECK((r.translation - a.translation).norm() < 1e-15);
    }
    SUBCASE("retract left-composes a camera-frame increment") {
        Vec6 d;
        d << 0.01, -0.02, 0.03, 0.1, 0.2, -0.1;
        const Pose step = Pose::from(Eigen::Quaterniond(Eigen::AngleAxisd(d.head<3>().norm(), d.head<3>().normalized())),
                                     d.tail<3>());
        const Pose expected = step * a;
        const Pose r = a.retract(d);
        CHECK((transform_point(r, x) - transform_point(expected, x)).norm() < 1e-12);
    }
}

TEST_CASE("pose error measures") {
    const Pose a = Pose::identity();
    const Pose b = Pose::from(Eigen::Quaterniond(Eigen::AngleAxisd(2.0 * std::numbers::pi / 180.0, Vec3::UnitY())),
                              Vec3::Zero());
    CHECK(rotation_error_deg(a, b) == doctest::Approx(2.0).epsilon(1e-12));
    const Pose c = Pose::from(Eigen::Quaterniond::Identity(), Vec3(0, 0.05, 0));
    CHECK(translation_error(a, c) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("look_at places the target on the optical axis") {
    const Vec3 eye(1.2, 0.35, 0.0);
    const Pose p = Pose::look_at(eye, Vec3::Zero(), Vec3::UnitY());
    const Vec3 t = transform_point(p, Vec3::Zero());
    CHECK(std::abs(t.x()) < 1e-12);
    CHECK(std::abs(t.y()) < 1e-12);
    CHECK(t.z() == doctest::Approx(eye.norm()));
    CHECK((p.camera_center() - eye).norm() < 1e-12);
}

TEST_CASE("one_hot and project_to_simplex") {
    const VecX h = one_hot(3, 6);
    CHECK(h.sum() == 1.0);
    CHECK(h[3] == 1.0);
    CHECK(one_hot(9, 6)[5] == 1.0);

    VecX v(3);
    v << -1.0, 1.0, 3.0;
    project_to_simplex(v);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == doctest::Approx(0.25));
    CHECK(v[2] == doctest::Approx(0.75));

    VecX z = VecX::Zero(4);
    project_to_simplex(z);
    for (int i = 0; i < 4; ++i) CHECK(z[i] == doctest::Approx(0.25));
}

TEST_CASE("GaussianMap validation and bookkeeping") {
    GaussianMap map(3);
    Gaussian g;
    g.semantic = one_hot(1, 3);
    map.add(g, 4);
    CHECK(map.size() == 1);
    CHECK(map.creation_frames()[0] == 4);

    const auto v0 = map.version();
    map.add(g, 5);
    CHECK(map.version() > v0);

    SUBCASE("invalid Gaussians are rejected") {
        Gaussian bad = g;
        bad.semantic = one_hot(0, 2);
        CHECK_THROWS_AS(map.add(bad, 0), InvalidArgument);
        bad = g;
        bad.radius = 0.0;
        CHECK_THROWS_AS(map.add(bad, 0), InvalidArgument);
        bad = g;
        bad.opacity = 1.5;
        CHECK_THROWS_AS(map.add(bad, 0), InvalidArgument);
    }
    SUBCASE("retain removes flagged entries in order") {
        CHECK(map.retain({false, true}) == 1);
        CHECK(map.size() == 1);
        CHECK(map.creation_frames()[0] == 5);
    }
    SUBCASE("copies get their own identity") {
        const GaussianMap copy = map;
        CHECK(copy.size() == map.size());
        CHECK(copy.id() != map.id());
    }
}
