#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "splatseg/scene.hpp"

using namespace splatseg;

namespace {

bool same_cloud(const GaussianCloud<double>& a, const GaussianCloud<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::memcmp(&a.gaussians[i], &b.gaussians[i], sizeof(Gaussian<double>)) != 0) return false;
    }
    return a.referring.data == b.referring.data;
}

// Independent 3x3 helpers for the covariance oracle.
using M3 = std::array<double, 9>;

M3 matmul3(const M3& a, const M3& b) {
    M3 out{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            for (int k = 0; k < 3; ++k) out[r * 3 + c] += a[r * 3 + k] * b[k * 3 + c];
    return out;
}

M3 transpose3(const M3& a) {
    return {a[0], a[3], a[6], a[1], a[4], a[7], a[2], a[5], a[8]};
}

}  // namespace

TEST_CASE("generate_scene bookkeeping and determinism") {
    SceneSpec spec;
    spec.objects = 2;
    spec.gaussians_per_object = 50;
    auto scene = generate_scene<double>(spec, 123);
    CHECK(scene.cloud.size() == 100);
    std::map<int, int> counts;
    for (const auto& g : scene.cloud.gaussians) counts[g.object_id]++;
    CHECK(counts.size() == 2);
    CHECK(counts[0] == 50);
    CHECK(counts[1] == 50);
    CHECK(scene.cloud.referring.rows == 100);
    CHECK(scene.cloud.referring.cols == 16);

    auto again = generate_scene<double>(spec, 123);
    CHECK(same_cloud(scene.cloud, again.cloud));
    auto other = generate_scene<double>(spec, 124);
    CHECK_FALSE(same_cloud(scene.cloud, other.cloud));
}

TEST_CASE("generate_scene honors pairwise separation") {
    SceneSpec spec;
    spec.objects = 8;
    spec.gaussians_per_object = 10;
    auto scene = generate_scene<double>(spec, 77);
    REQUIRE(scene.objects.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = i + 1; j < 8; ++j) {
            double d2 = 0;
            for (int k = 0; k < 3; ++k) {
                double d = scene.objects[i].centroid[k] - scene.objects[j].centroid[k];
                d2 += d * d;
            }
            CHECK(std::sqrt(d2) >= spec.min_separation);
        }
    }
}

TEST_CASE("generate_scene rejects infeasible layouts") {
    SceneSpec spec;
    spec.objects = 8;
    spec.gaussians_per_object = 5;
    spec.layout_radius = 0.2;
    spec.min_separation = 2.0;
    CHECK_THROWS_AS((void)generate_scene<double>(spec, 1), std::runtime_error);
}

TEST_CASE("generate_scene duplicate attribute pairs share tags") {
    SceneSpec spec;
    spec.objects = 6;
    spec.gaussians_per_object = 5;
    spec.duplicate_attribute_pairs = 2;
    auto scene = generate_scene<double>(spec, 9);
    CHECK(scene.objects[0].color_tag == scene.objects[1].color_tag);
    CHECK(scene.objects[0].shape_tag == scene.objects[1].shape_tag);
    CHECK(scene.objects[0].size_tag == scene.objects[1].size_tag);
    CHECK(scene.objects[2].color_tag == scene.objects[3].color_tag);
    // Pair (4, 5) is unconstrained: just require valid tags.
    CHECK_FALSE(scene.objects[4].color_tag.empty());
}

TEST_CASE("generate_cameras zero jitter puts azimuths on the exact grid") {
    CameraSpec spec;
    spec.count = 4;
    spec.jitter = 0.0;
    spec.train_fraction = 0.8;
    auto cams = generate_cameras<double>(spec, 5);
    REQUIRE(cams.size() == 4);
    const double expected[4] = {0.0, M_PI / 2, M_PI, 3 * M_PI / 2};
    for (int i = 0; i < 4; ++i) {
        // Recover the camera position from t = -R p.
        const auto& R9 = cams[i].rotation;
        const auto& t = cams[i].translation;
        std::array<double, 3> p{};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) p[c] += -R9[r * 3 + c] * t[r];
        double az = std::atan2(p[1], p[0]);
        if (az < -1e-9) az += 2 * M_PI;
        CHECK(az == doctest::Approx(expected[i]).epsilon(1e-9));
    }
}

TEST_CASE("generate_cameras rotations orthonormal, look-at centered, split counts") {
    CameraSpec spec;
    spec.count = 20;
    auto cams = generate_cameras<double>(spec, 11);
    int train = 0, novel = 0;
    for (const auto& cam : cams) {
        const auto& m = cam.rotation;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0;
                for (int k = 0; k < 3; ++k) acc += m[r * 3 + k] * m[c * 3 + k];
                CHECK(std::abs(acc - (r == c ? 1.0 : 0.0)) <= 1e-9);
            }
        }
        auto p = cam.to_camera({spec.look_at[0], spec.look_at[1], spec.look_at[2]});
        CHECK(p[2] > 0.0);
        double px = cam.fx * p[0] / p[2] + cam.cx;
        double py = cam.fy * p[1] / p[2] + cam.cy;
        CHECK(px == doctest::Approx(cam.cx).epsilon(1e-6));
        CHECK(py == doctest::Approx(cam.cy).epsilon(1e-6));
        CHECK(px >= 0.0);
        CHECK(px < cam.width);
        (cam.split == CameraSplit::train ? train : novel)++;
    }
    CHECK(train == 16);
    CHECK(novel == 4);
}

TEST_CASE("project_gaussian on-axis center and behind-camera culling") {
    Camera<double> cam = make_lookat_camera<double>({3, 0, 1}, {0, 0, 0}, 80.0, 80.0, 64, 64);
    Gaussian<double> g;
    g.mu = {0, 0, 0};  // the look-at point lies on the optical axis
    g.scale = {0.1, 0.1, 0.1};
    auto s = project_gaussian(g, cam);
    REQUIRE(s.has_value());
    CHECK(s->center[0] == doctest::Approx(cam.cx).epsilon(1e-9));
    CHECK(s->center[1] == doctest::Approx(cam.cy).epsilon(1e-9));
    CHECK(s->depth == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));

    Gaussian<double> behind;
    behind.mu = {6.0, 0, 2.0};  // past the camera, opposite the view direction
    behind.scale = {0.1, 0.1, 0.1};
    CHECK_FALSE(project_gaussian(behind, cam).has_value());
}

TEST_CASE("project_gaussian covariance matches naive matrix oracle") {
    Rng rng(21, "proj-test");
    for (int trial = 0; trial < 25; ++trial) {
        Gaussian<double> g;
        g.mu = {rng.uniform_in(-1, 1), rng.uniform_in(-1, 1), rng.uniform_in(-1, 1)};
        g.scale = {rng.uniform_in(0.02, 0.4), rng.uniform_in(0.02, 0.4), rng.uniform_in(0.02, 0.4)};
        double q0 = rng.normal(), q1 = rng.normal(), q2 = rng.normal(), q3 = rng.normal();
        double qn = std::sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3);
        g.rot = {q0 / qn, q1 / qn, q2 / qn, q3 / qn};

        Camera<double> cam = make_lookat_camera<double>(
            {rng.uniform_in(2.0, 4.0), rng.uniform_in(-1, 1), rng.uniform_in(1.0, 2.5)},
            {0, 0, 0}, 90.0, 90.0, 64, 64);
        auto s = project_gaussian(g, cam);
        if (!s) continue;

        // Oracle: independent quaternion->matrix, Sigma = R S S R^T, then
        // full 3x3/2x3 products done naively.
        double w = g.rot[0], x = g.rot[1], y = g.rot[2], z = g.rot[3];
        M3 Rq = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                 2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                 2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)};
        M3 S = {g.scale[0], 0, 0, 0, g.scale[1], 0, 0, 0, g.scale[2]};
        M3 sigma = matmul3(matmul3(Rq, S), transpose3(matmul3(Rq, S)));

        auto t = cam.to_camera(g.mu);
        M3 Jfull = {cam.fx / t[2], 0, -cam.fx * t[0] / (t[2] * t[2]),
                    0, cam.fy / t[2], -cam.fy * t[1] / (t[2] * t[2]),
                    0, 0, 0};
        M3 W3;
        for (int i = 0; i < 9; ++i) W3[i] = cam.rotation[i];
        M3 JW = matmul3(Jfull, W3);
        M3 cov_full = matmul3(matmul3(JW, sigma), transpose3(JW));

        CHECK(s->cov2d[0] == doctest::Approx(cov_full[0] + kCovDilation).epsilon(1e-10));
        CHECK(s->cov2d[1] == doctest::Approx(cov_full[1]).epsilon(1e-10));
        CHECK(s->cov2d[2] == doctest::Approx(cov_full[4] + kCovDilation).epsilon(1e-10));

        // Positive definite after dilation.
        CHECK(s->cov2d[0] > 0.0);
        CHECK(s->cov2d[0] * s->cov2d[2] - s->cov2d[1] * s->cov2d[1] > 0.0);
    }
}

TEST_CASE("depth_sort ordering, stability, reference oracle") {
    std::vector<Splat2D<double>> splats(3);
    splats[0].depth = 3;
    splats[1].depth = 1;
    splats[2].depth = 2;
    for (std::size_t i = 0; i < 3; ++i) splats[i].source = i;
    auto order = depth_sort(splats);
    CHECK(order == std::vector<std::size_t>{1, 2, 0});

    std::vector<Splat2D<double>> ties(4);
    for (std::size_t i = 0; i < 4; ++i) {
        ties[i].depth = 5.0;
        ties[i].source = i;
    }
    CHECK(depth_sort(ties) == std::vector<std::size_t>{0, 1, 2, 3});

    Rng rng(31, "sort-test");
    std::vector<Splat2D<double>> many(1000);
    for (std::size_t i = 0; i < many.size(); ++i) {
        many[i].depth = rng.uniform_in(0.0, 10.0);
        many[i].source = i;
    }
    auto got = depth_sort(many);
    // Reference comparison sort over index pairs.
    std::vector<std::size_t> want(many.size());
    for (std::size_t i = 0; i < want.size(); ++i) want[i] = i;
    std::sort(want.begin(), want.end(), [&](std::size_t a, std::size_t b) {
        return many[a].depth != many[b].depth ? many[a].depth < many[b].depth
                                              : many[a].source < many[b].source;
    });
    CHECK(got == want);

    // Permutation property: no element lost or duplicated.
    std::vector<bool> seen(many.size(), false);
    for (auto i : got) {
        CHECK_FALSE(seen[i]);
        seen[i] = true;
    }
}

TEST_CASE("splat_weight center value, clamp, cutoff, inverse oracle") {
    Splat2D<double> s;
    s.center = {10.0, 10.0};
    s.cov2d = {1.0, 0.0, 1.0};
    CHECK(splat_weight(s, 0.5, {10.0, 10.0}) == 0.5);
    CHECK(splat_weight(s, 1.0, {10.0, 10.0}) == kAlphaClamp);
    // Far away: below cutoff -> exactly zero.
    CHECK(splat_weight(s, 0.9, {40.0, 40.0}) == 0.0);

    Rng rng(41, "weight-test");
    for (int trial = 0; trial < 50; ++trial) {
        Splat2D<double> t;
        t.center = {rng.uniform_in(0, 32), rng.uniform_in(0, 32)};
        const double a = rng.uniform_in(0.5, 4.0);
        const double c = rng.uniform_in(0.5, 4.0);
        const double b = rng.uniform_in(-0.4, 0.4) * std::sqrt(a * c);
        t.cov2d = {a, b, c};
        const double op = rng.uniform_in(0.1, 0.95);
        std::array<double, 2> v = {t.center[0] + rng.uniform_in(-3, 3),
                                   t.center[1] + rng.uniform_in(-3, 3)};
        // Direct 2x2 inverse oracle.
        const double det = a * c - b * b;
        const double inv00 = c / det, inv01 = -b / det, inv11 = a / det;
        const double dx = v[0] - t.center[0], dy = v[1] - t.center[1];
        const double q = dx * (inv00 * dx + inv01 * dy) + dy * (inv01 * dx + inv11 * dy);
        double alpha = op * std::exp(-0.5 * q);
        if (alpha > kAlphaClamp) alpha = kAlphaClamp;
        if (alpha < kAlphaCutoff) alpha = 0.0;
        CHECK(splat_weight(t, op, v) == doctest::Approx(alpha).epsilon(1e-12));
    }
}

TEST_CASE("projection then weight at projected center returns opacity pre-clamp") {
    Rng rng(51, "center-test");
    for (int trial = 0; trial < 20; ++trial) {
        Gaussian<double> g;
        g.mu = {rng.uniform_in(-0.5, 0.5), rng.uniform_in(-0.5, 0.5), rng.uniform_in(-0.3, 0.3)};
        g.scale = {rng.uniform_in(0.05, 0.2), rng.uniform_in(0.05, 0.2), rng.uniform_in(0.05, 0.2)};
        g.rot = {1, 0, 0, 0};
        g.opacity = rng.uniform_in(0.05, 0.95);
        Camera<double> cam = make_lookat_camera<double>({2.5, 0.5, 1.5}, {0, 0, 0}, 85.0, 85.0, 64, 64);
        auto s = project_gaussian(g, cam);
        REQUIRE(s.has_value());
        CHECK(splat_weight(s.value(), g.opacity, s->center) == g.opacity);
    }
}

TEST_CASE("remove_object drops gaussians and referring rows together") {
    SceneSpec spec;
    spec.objects = 3;
    spec.gaussians_per_object = 4;
    auto scene = generate_scene<double>(spec, 3);
    for (std::size_t i = 0; i < scene.cloud.size(); ++i) {
        scene.cloud.referring.at(i, 0) = static_cast<double>(i);
    }
    auto reduced = remove_object(scene.cloud, 1);
    CHECK(reduced.size() == 8);
    for (std::size_t i = 0; i < reduced.size(); ++i) {
        CHECK(reduced.gaussians[i].object_id != 1);
        // Referring row still matches the gaussian it belonged to.
        bool found = false;
        for (std::size_t j = 0; j < scene.cloud.size(); ++j) {
            if (scene.cloud.referring.at(j, 0) == reduced.referring.at(i, 0)) {
                CHECK(scene.cloud.gaussians[j].object_id == reduced.gaussians[i].object_id);
                found = true;
                break;
            }
        }
        CHECK(found);
    }
}
