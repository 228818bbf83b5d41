#pragma once

// Scene representation: 3D Gaussians with frozen geometry plus trainable
// per-Gaussian referring features, pinhole cameras on a jittered orbit, and
// perspective projection of Gaussians to 2D splats (EWA-style covariance
// transport with a fixed pixel-space dilation).

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "splatseg/numkit.hpp"

namespace splatseg {

inline constexpr std::int32_t kBackgroundId = -1;
inline constexpr double kNearPlane = 0.01;
inline constexpr double kCovDilation = 0.3;
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kAlphaCutoff = 1.0 / 255.0;

template <typename R>
using Vec3 = std::array<R, 3>;

template <typename R>
inline Vec3<R> sub3(const Vec3<R>& a, const Vec3<R>& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

template <typename R>
inline Vec3<R> cross3(const Vec3<R>& a, const Vec3<R>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

template <typename R>
inline R dot3(const Vec3<R>& a, const Vec3<R>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <typename R>
inline R norm3(const Vec3<R>& a) {
    return std::sqrt(dot3(a, a));
}

template <typename R>
inline Vec3<R> normalize3(const Vec3<R>& a) {
    R n = norm3(a);
    return {a[0] / n, a[1] / n, a[2] / n};
}

template <typename R>
struct Gaussian {
    Vec3<R> mu{};                   // world position
    Vec3<R> scale{};                // positive axis scales
    std::array<R, 4> rot{1, 0, 0, 0};  // unit quaternion (w, x, y, z)
    R opacity = R(1);
    Vec3<R> color{};
    std::int32_t object_id = kBackgroundId;
};

/// Frozen geometry plus the trainable N x d_r referring feature matrix.
template <typename R>
struct GaussianCloud {
    std::vector<Gaussian<R>> gaussians;
    Tensor2<R> referring;  // rows = gaussian count

    std::size_t size() const { return gaussians.size(); }
};

struct ObjectInfo {
    std::int32_t id = 0;
    std::array<double, 3> centroid{};
    std::string color_tag;
    std::string shape_tag;
    std::string size_tag;
    double radius = 0.0;
};

enum class CameraSplit { train, novel };

template <typename R>
struct Camera {
    R fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    std::array<R, 9> rotation{};  // row-major world-to-camera
    Vec3<R> translation{};
    CameraSplit split = CameraSplit::train;

    Vec3<R> to_camera(const Vec3<R>& p) const {
        const auto& m = rotation;
        return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2] + translation[0],
                m[3] * p[0] + m[4] * p[1] + m[5] * p[2] + translation[1],
                m[6] * p[0] + m[7] * p[1] + m[8] * p[2] + translation[2]};
    }
};

/// Camera at `pos` looking at `target`, world +z up, CV axes (x right,
/// y down, z forward).
template <typename R>
inline Camera<R> make_lookat_camera(const Vec3<R>& pos, const Vec3<R>& target, R fx, R fy,
                                    int width, int height) {
    Camera<R> cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = R(width) / R(2);
    cam.cy = R(height) / R(2);
    cam.width = width;
    cam.height = height;
    Vec3<R> fwd = normalize3(sub3(target, pos));
    Vec3<R> up{R(0), R(0), R(1)};
    Vec3<R> right = normalize3(cross3(fwd, up));
    Vec3<R> down = cross3(fwd, right);
    cam.rotation = {right[0], right[1], right[2], down[0], down[1], down[2], fwd[0], fwd[1], fwd[2]};
    // t = -R * pos
    Vec3<R> rp = {cam.rotation[0] * pos[0] + cam.rotation[1] * pos[1] + cam.rotation[2] * pos[2],
                  cam.rotation[3] * pos[0] + cam.rotation[4] * pos[1] + cam.rotation[5] * pos[2],
                  cam.rotation[6] * pos[0] + cam.rotation[7] * pos[1] + cam.rotation[8] * pos[2]};
    cam.translation = {-rp[0], -rp[1], -rp[2]};
    return cam;
}

template <typename R>
struct Splat2D {
    std::array<R, 2> center{};  // pixel coordinates
    std::array<R, 3> cov2d{};   // (a, b, c) of symmetric [[a, b], [b, c]]
    R depth = 0;
    std::size_t source = 0;
};

template <typename R>
inline std::array<R, 9> quat_to_rot(const std::array<R, 4>& q) {
    R w = q[0], x = q[1], y = q[2], z = q[3];
    const R n = std::sqrt(w * w + x * x + y * y + z * z);
    w /= n;
    x /= n;
    y /= n;
    z /= n;
    return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
            2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

/// 3D covariance from scale/rotation: Sigma = Rq diag(scale^2) Rq^T.
template <typename R>
inline std::array<R, 9> gaussian_cov3d(const Gaussian<R>& g) {
    auto m = quat_to_rot(g.rot);
    std::array<R, 3> s2 = {g.scale[0] * g.scale[0], g.scale[1] * g.scale[1], g.scale[2] * g.scale[2]};
    // (Rq * diag(s2)) * Rq^T
    std::array<R, 9> out{};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            R acc = 0;
            for (int k = 0; k < 3; ++k) acc += m[r * 3 + k] * s2[k] * m[c * 3 + k];
            out[r * 3 + c] = acc;
        }
    }
    return out;
}

/// Perspective projection of one Gaussian. Returns nullopt when the
/// camera-space depth is at or behind the near plane. The 2D covariance is
/// J W Sigma W^T J^T plus kCovDilation on the diagonal.
template <typename R>
inline std::optional<Splat2D<R>> project_gaussian(const Gaussian<R>& g, const Camera<R>& cam,
                                                  std::size_t source = 0) {
    Vec3<R> t = cam.to_camera(g.mu);
    if (!(t[2] > R(kNearPlane))) return std::nullopt;
    Splat2D<R> s;
    s.source = source;
    s.depth = t[2];
    s.center = {cam.fx * t[0] / t[2] + cam.cx, cam.fy * t[1] / t[2] + cam.cy};

    const R iz = R(1) / t[2];
    const R iz2 = iz * iz;
    // Perspective Jacobian rows.
    const std::array<R, 3> j0 = {cam.fx * iz, 0, -cam.fx * t[0] * iz2};
    const std::array<R, 3> j1 = {0, cam.fy * iz, -cam.fy * t[1] * iz2};
    // M = J * W (2x3)
    const auto& w = cam.rotation;
    std::array<R, 3> m0{}, m1{};
    for (int c = 0; c < 3; ++c) {
        m0[c] = j0[0] * w[0 + c] + j0[1] * w[3 + c] + j0[2] * w[6 + c];
        m1[c] = j1[0] * w[0 + c] + j1[1] * w[3 + c] + j1[2] * w[6 + c];
    }
    const auto cov3 = gaussian_cov3d(g);
    // cov2d = M Sigma M^T
    std::array<R, 3> sm0{}, sm1{};
    for (int r = 0; r < 3; ++r) {
        sm0[r] = cov3[r * 3 + 0] * m0[0] + cov3[r * 3 + 1] * m0[1] + cov3[r * 3 + 2] * m0[2];
        sm1[r] = cov3[r * 3 + 0] * m1[0] + cov3[r * 3 + 1] * m1[1] + cov3[r * 3 + 2] * m1[2];
    }
    const R a = m0[0] * sm0[0] + m0[1] * sm0[1] + m0[2] * sm0[2] + R(kCovDilation);
    const R b = m1[0] * sm0[0] + m1[1] * sm0[1] + m1[2] * sm0[2];
    const R c = m1[0] * sm1[0] + m1[1] * sm1[1] + m1[2] * sm1[2] + R(kCovDilation);
    s.cov2d = {a, b, c};
    return s;
}

/// Stable ascending depth order; ties keep ascending source index.
template <typename R>
inline std::vector<std::size_t> depth_sort(const std::vector<Splat2D<R>>& splats) {
    for (const auto& s : splats) {
        if (!std::isfinite(static_cast<double>(s.depth))) {
            throw std::invalid_argument("depth_sort: non-finite depth");
        }
    }
    std::vector<std::size_t> order(splats.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (splats[l].depth != splats[r].depth) return splats[l].depth < splats[r].depth;
        return splats[l].source < splats[r].source;
    });
    return order;
}

/// Alpha contribution of a splat at pixel position v: opacity times the 2D
/// Gaussian falloff, clamped to kAlphaClamp; values below kAlphaCutoff are
/// zeroed so backward stays sparse.
template <typename R>
inline R splat_weight(const Splat2D<R>& s, R opacity, const std::array<R, 2>& v) {
    const R dx = v[0] - s.center[0];
    const R dy = v[1] - s.center[1];
    const R a = s.cov2d[0], b = s.cov2d[1], c = s.cov2d[2];
    const R det = a * c - b * b;
    // Quadratic form d^T cov2d^{-1} d.
    const R q = (c * dx * dx - R(2) * b * dx * dy + a * dy * dy) / det;
    if (q < R(0)) return R(0);
    R alpha = opacity * std::exp(R(-0.5) * q);
    if (alpha > R(kAlphaClamp)) alpha = R(kAlphaClamp);
    if (alpha < R(kAlphaCutoff)) return R(0);
    return alpha;
}

// ---------------------------------------------------------------------------
// Synthetic scene generation
// ---------------------------------------------------------------------------

struct SceneSpec {
    std::size_t objects = 2;
    std::size_t gaussians_per_object = 50;
    double object_scale_factor = 0.5;  // per-gaussian scale relative to object radius
    std::size_t background_gaussians = 0;
    double layout_radius = 0.68;    // object centroids inside this disc
    double z_low = -0.06, z_high = 0.06;
    double min_separation = 0.44;
    std::size_t referring_dim = 16;
    // Number of leading object pairs forced to share (color, shape, size),
    // so those objects are describable only through spatial relations.
    std::size_t duplicate_attribute_pairs = 0;
};

inline const std::vector<std::pair<std::string, std::array<double, 3>>>& object_palette() {
    static const std::vector<std::pair<std::string, std::array<double, 3>>> p = {
        {"red", {0.92, 0.15, 0.15}},   {"green", {0.15, 0.8, 0.2}},
        {"blue", {0.2, 0.3, 0.95}},    {"yellow", {0.95, 0.9, 0.15}},
        {"purple", {0.65, 0.2, 0.85}}, {"orange", {0.95, 0.55, 0.1}},
        {"cyan", {0.15, 0.85, 0.85}},  {"white", {0.93, 0.93, 0.93}},
    };
    return p;
}

inline const std::vector<std::string>& object_shapes() {
    static const std::vector<std::string> s = {"sphere", "cube",    "disc", "rod",
                                               "pyramid", "torus", "slab", "cross"};
    return s;
}

template <typename R>
struct Scene {
    GaussianCloud<R> cloud;
    std::vector<ObjectInfo> objects;
};

namespace detail {

template <typename R>
inline Gaussian<R> sample_object_gaussian(Rng& rng, const ObjectInfo& info,
                                          const std::array<double, 3>& base_color,
                                          double scale_factor = 0.5) {
    Gaussian<R> g;
    const double rho = info.radius;
    std::array<double, 3> off{};
    if (info.shape_tag == "sphere") {
        double n0 = rng.normal(), n1 = rng.normal(), n2 = rng.normal();
        double n = std::sqrt(n0 * n0 + n1 * n1 + n2 * n2);
        if (n < 1e-12) n = 1.0;
        const double r = rho * std::cbrt(rng.uniform());
        off = {r * n0 / n, r * n1 / n, r * n2 / n};
    } else if (info.shape_tag == "cube") {
        off = {rng.uniform_in(-rho, rho), rng.uniform_in(-rho, rho), rng.uniform_in(-rho, rho)};
    } else if (info.shape_tag == "disc") {
        const double ang = rng.uniform_in(0.0, 6.283185307179586);
        const double r = rho * std::sqrt(rng.uniform());
        off = {r * std::cos(ang), r * std::sin(ang), rng.uniform_in(-0.18 * rho, 0.18 * rho)};
    } else if (info.shape_tag == "rod") {  // elongated along world x
        off = {rng.uniform_in(-1.8 * rho, 1.8 * rho), rng.uniform_in(-0.4 * rho, 0.4 * rho),
               rng.uniform_in(-0.4 * rho, 0.4 * rho)};
    } else if (info.shape_tag == "pyramid") {
        const double h = rng.uniform();  // 0 = base, 1 = apex
        const double r = rho * (1.0 - 0.8 * h) * std::sqrt(rng.uniform());
        const double ang = rng.uniform_in(0.0, 6.283185307179586);
        off = {r * std::cos(ang), r * std::sin(ang), (h - 0.4) * 1.5 * rho};
    } else if (info.shape_tag == "torus") {
        const double ang = rng.uniform_in(0.0, 6.283185307179586);
        const double ring = 0.8 * rho;
        off = {ring * std::cos(ang) + rng.uniform_in(-0.25 * rho, 0.25 * rho),
               ring * std::sin(ang) + rng.uniform_in(-0.25 * rho, 0.25 * rho),
               rng.uniform_in(-0.25 * rho, 0.25 * rho)};
    } else if (info.shape_tag == "slab") {
        off = {rng.uniform_in(-1.3 * rho, 1.3 * rho), rng.uniform_in(-1.3 * rho, 1.3 * rho),
               rng.uniform_in(-0.22 * rho, 0.22 * rho)};
    } else {  // cross: two perpendicular bars
        const bool along_x = rng.uniform() < 0.5;
        const double major = rng.uniform_in(-1.6 * rho, 1.6 * rho);
        const double minor = rng.uniform_in(-0.35 * rho, 0.35 * rho);
        off = {along_x ? major : minor, along_x ? minor : major,
               rng.uniform_in(-0.35 * rho, 0.35 * rho)};
    }
    for (int k = 0; k < 3; ++k) g.mu[k] = R(info.centroid[k] + off[k]);

    const double base_scale = scale_factor * rho;
    for (int k = 0; k < 3; ++k) g.scale[k] = R(base_scale * rng.uniform_in(0.75, 1.3));
    if (info.shape_tag == "disc") g.scale[2] *= R(0.35);

    double q0 = rng.normal(), q1 = rng.normal(), q2 = rng.normal(), q3 = rng.normal();
    double qn = std::sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3);
    if (qn < 1e-12) {
        q0 = 1.0;
        qn = 1.0;
    }
    g.rot = {R(q0 / qn), R(q1 / qn), R(q2 / qn), R(q3 / qn)};
    g.opacity = R(rng.uniform_in(0.7, 0.95));
    for (int k = 0; k < 3; ++k) {
        g.color[k] = R(std::clamp(base_color[k] + rng.uniform_in(-0.07, 0.07), 0.0, 1.0));
    }
    g.object_id = info.id;
    return g;
}

}  // namespace detail

/// Deterministic synthetic scene: each object is a compact Gaussian cluster
/// with color/shape/size tags; optional gray floor slab as background.
/// Throws when the layout cannot satisfy the separation constraint.
template <typename R>
inline Scene<R> generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    if (spec.objects < 1 || spec.gaussians_per_object < 1) {
        throw std::invalid_argument("generate_scene: counts must be >= 1");
    }
    Rng rng(seed, "scene");
    Scene<R> scene;

    const auto& palette = object_palette();
    const auto& shapes = object_shapes();

    // Attributes: colors are unique across objects (duplicate pairs share
    // their whole triple), shapes cycle through a shuffled deck. Accidental
    // color collisions would poison the per-token training signal.
    std::vector<std::size_t> color_deck(palette.size());
    std::vector<std::size_t> shape_deck(shapes.size());
    for (std::size_t i = 0; i < color_deck.size(); ++i) color_deck[i] = i;
    for (std::size_t i = 0; i < shape_deck.size(); ++i) shape_deck[i] = i;
    for (std::size_t i = color_deck.size(); i > 1; --i) std::swap(color_deck[i - 1], color_deck[rng.index(i)]);
    for (std::size_t i = shape_deck.size(); i > 1; --i) std::swap(shape_deck[i - 1], shape_deck[rng.index(i)]);

    std::vector<ObjectInfo> objects(spec.objects);
    std::size_t color_idx = 0, shape_idx = 0;
    for (std::size_t i = 0; i < spec.objects; ++i) {
        ObjectInfo& info = objects[i];
        info.id = static_cast<std::int32_t>(i);
        const bool duplicate_of_prev = (i % 2 == 1) && (i / 2 < spec.duplicate_attribute_pairs);
        if (duplicate_of_prev) {
            info.color_tag = objects[i - 1].color_tag;
            info.shape_tag = objects[i - 1].shape_tag;
            info.size_tag = objects[i - 1].size_tag;
            info.radius = objects[i - 1].radius;
        } else {
            if (color_idx >= color_deck.size()) {
                throw std::invalid_argument("generate_scene: too many objects for palette");
            }
            info.color_tag = palette[color_deck[color_idx++]].first;
            info.shape_tag = shapes[shape_deck[shape_idx++ % shape_deck.size()]];
            const bool small = rng.uniform() < 0.5;
            info.size_tag = small ? "small" : "large";
            info.radius = small ? 0.19 : 0.26;
        }
    }

    // Centroid placement with pairwise separation: bounded rejection with
    // whole-layout restarts (greedy placement can paint itself into a
    // corner even when a valid layout exists).
    bool layout_done = false;
    for (int restart = 0; restart < 50 && !layout_done; ++restart) {
        layout_done = true;
        for (std::size_t i = 0; i < spec.objects; ++i) {
            bool placed = false;
            for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                const double ang = rng.uniform_in(0.0, 6.283185307179586);
                const double r = spec.layout_radius * std::sqrt(rng.uniform());
                std::array<double, 3> c = {r * std::cos(ang), r * std::sin(ang),
                                           rng.uniform_in(spec.z_low, spec.z_high)};
                bool ok = true;
                for (std::size_t j = 0; j < i; ++j) {
                    const double dx = c[0] - objects[j].centroid[0];
                    const double dy = c[1] - objects[j].centroid[1];
                    const double dz = c[2] - objects[j].centroid[2];
                    if (std::sqrt(dx * dx + dy * dy + dz * dz) < spec.min_separation) {
                        ok = false;
                        break;
                    }
                }
                if (ok) {
                    objects[i].centroid = c;
                    placed = true;
                }
            }
            if (!placed) {
                layout_done = false;
                break;
            }
        }
    }
    if (!layout_done) {
        throw std::runtime_error("generate_scene: infeasible layout, cannot place " +
                                 std::to_string(spec.objects) + " objects with separation " +
                                 std::to_string(spec.min_separation) + " inside radius " +
                                 std::to_string(spec.layout_radius));
    }

    for (const auto& info : objects) {
        const auto* color = &palette[0].second;
        for (const auto& [name, rgb] : palette) {
            if (name == info.color_tag) color = &rgb;
        }
        for (std::size_t k = 0; k < spec.gaussians_per_object; ++k) {
            scene.cloud.gaussians.push_back(
                detail::sample_object_gaussian<R>(rng, info, *color, spec.object_scale_factor));
        }
    }

    // Background: flat gray slab under the objects. It extends far enough
    // that object silhouettes stay backed by floor coverage from the lowest
    // camera elevation.
    if (spec.background_gaussians > 0) {
        const double bg_radius = spec.layout_radius + 1.6;
        const double z_floor = spec.z_low - 0.28;
        for (std::size_t k = 0; k < spec.background_gaussians; ++k) {
            Gaussian<R> g;
            const double ang = rng.uniform_in(0.0, 6.283185307179586);
            const double r = bg_radius * std::sqrt(rng.uniform());
            g.mu = {R(r * std::cos(ang)), R(r * std::sin(ang)),
                    R(z_floor + rng.uniform_in(-0.02, 0.02))};
            const double s = 0.13 * rng.uniform_in(0.85, 1.25);
            g.scale = {R(s), R(s), R(s * 0.25)};
            g.rot = {R(1), R(0), R(0), R(0)};
            g.opacity = R(rng.uniform_in(0.85, 0.97));
            const double gray = 0.5 + rng.uniform_in(-0.05, 0.05);
            g.color = {R(gray), R(gray), R(gray)};
            g.object_id = kBackgroundId;
            scene.cloud.gaussians.push_back(g);
        }
    }

    scene.cloud.referring = Tensor2<R>(scene.cloud.gaussians.size(), spec.referring_dim, R(0));
    scene.objects = std::move(objects);
    return scene;
}

struct CameraSpec {
    std::size_t count = 20;
    double orbit_radius = 3.0;
    double elevation_low = 0.45, elevation_high = 0.85;  // radians
    std::array<double, 3> look_at{0.0, 0.0, 0.0};
    double jitter = 0.35;  // fraction of the azimuth step
    double focal = 100.0;
    int width = 64, height = 64;
    double train_fraction = 0.8;
};

/// Cameras on a jittered orbit facing the look-at point; an evenly spaced
/// subset is tagged novel (held out from training). Zero jitter gives exact
/// azimuths 2*pi*i/n at the mid elevation.
template <typename R>
inline std::vector<Camera<R>> generate_cameras(const CameraSpec& spec, std::uint64_t seed) {
    if (spec.count < 2) throw std::invalid_argument("generate_cameras: need at least 2 cameras");
    Rng rng(seed, "cameras");
    std::vector<Camera<R>> cams;
    const std::size_t n = spec.count;
    const std::size_t train_count =
        static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n) + 0.5));
    const std::size_t novel_count = n - train_count;
    const double mid_elev = 0.5 * (spec.elevation_low + spec.elevation_high);
    for (std::size_t i = 0; i < n; ++i) {
        double azimuth = 6.283185307179586 * static_cast<double>(i) / static_cast<double>(n);
        double elev = mid_elev;
        if (spec.jitter > 0.0) {
            azimuth += spec.jitter * (6.283185307179586 / static_cast<double>(n)) *
                       rng.uniform_in(-0.5, 0.5);
            elev = rng.uniform_in(spec.elevation_low, spec.elevation_high);
        }
        Vec3<R> pos = {R(spec.look_at[0] + spec.orbit_radius * std::cos(elev) * std::cos(azimuth)),
                       R(spec.look_at[1] + spec.orbit_radius * std::cos(elev) * std::sin(azimuth)),
                       R(spec.look_at[2] + spec.orbit_radius * std::sin(elev))};
        Vec3<R> target = {R(spec.look_at[0]), R(spec.look_at[1]), R(spec.look_at[2])};
        auto cam = make_lookat_camera<R>(pos, target, R(spec.focal), R(spec.focal), spec.width,
                                         spec.height);
        // Mark i novel when the evenly spaced quota advances at i.
        const auto quota_before = (i * novel_count) / n;
        const auto quota_after = ((i + 1) * novel_count) / n;
        cam.split = quota_after > quota_before ? CameraSplit::novel : CameraSplit::train;
        cams.push_back(cam);
    }
    return cams;
}

/// Probe scene for occlusion evaluation: object 0 (target) is fully hidden
/// behind object 1 (an opaque slab) in the designated view, and visible from
/// most other orbit positions. Object 2 gives the grammar a relation anchor.
template <typename R>
struct OcclusionProbe {
    Scene<R> scene;
    std::vector<Camera<R>> cameras;
    std::size_t designated_view = 0;  // index into cameras; tagged novel
    std::int32_t target_object = 0;
    std::int32_t blocker_object = 1;
};

template <typename R>
inline OcclusionProbe<R> generate_occlusion_probe(std::uint64_t seed, std::size_t gaussians_per_object,
                                                  std::size_t background_gaussians,
                                                  std::size_t referring_dim, const CameraSpec& cam_spec) {
    Rng rng(seed, "scene");
    OcclusionProbe<R> probe;
    auto& objects = probe.scene.objects;
    objects.resize(3);

    objects[0] = {0, {0.0, 0.0, 0.0}, "red", "sphere", "small", 0.13};
    // Designated view sits at azimuth 0, mid elevation; the blocker slab is
    // centered on that line of sight in front of the target.
    const double elev = 0.5 * (cam_spec.elevation_low + cam_spec.elevation_high);
    const std::array<double, 3> dir = {std::cos(elev), 0.0, std::sin(elev)};  // target -> camera
    objects[1] = {1, {0.52 * dir[0], 0.52 * dir[1], 0.52 * dir[2]}, "white", "disc", "large", 0.3};
    objects[2] = {2, {-0.62, 0.45, 0.0}, "blue", "cube", "small", 0.13};

    const auto& palette = object_palette();
    for (const auto& info : objects) {
        const auto* color = &palette[0].second;
        for (const auto& [name, rgb] : palette) {
            if (name == info.color_tag) color = &rgb;
        }
        const std::size_t count = info.id == 1 ? gaussians_per_object * 2 : gaussians_per_object;
        for (std::size_t k = 0; k < count; ++k) {
            auto g = detail::sample_object_gaussian<R>(rng, info, *color);
            if (info.id == 1) {
                // Flatten the slab along the view direction and boost opacity
                // so composited transmittance through it is near zero.
                g.opacity = R(rng.uniform_in(0.9, 0.97));
            }
            probe.scene.cloud.gaussians.push_back(g);
        }
    }
    if (background_gaussians > 0) {
        SceneSpec bg_spec;
        bg_spec.layout_radius = 0.85;
        for (std::size_t k = 0; k < background_gaussians; ++k) {
            Gaussian<R> g;
            const double ang = rng.uniform_in(0.0, 6.283185307179586);
            const double r = (bg_spec.layout_radius + 1.6) * std::sqrt(rng.uniform());
            g.mu = {R(r * std::cos(ang)), R(r * std::sin(ang)), R(-0.4 + rng.uniform_in(-0.02, 0.02))};
            const double s = 0.13 * rng.uniform_in(0.85, 1.25);
            g.scale = {R(s), R(s), R(s * 0.25)};
            g.opacity = R(rng.uniform_in(0.8, 0.95));
            const double gray = 0.5 + rng.uniform_in(-0.05, 0.05);
            g.color = {R(gray), R(gray), R(gray)};
            g.object_id = kBackgroundId;
            probe.scene.cloud.gaussians.push_back(g);
        }
    }
    probe.scene.cloud.referring = Tensor2<R>(probe.scene.cloud.gaussians.size(), referring_dim, R(0));

    // Cameras: index 0 is the designated blocked view (azimuth 0, mid
    // elevation, tagged novel); the rest follow the usual jittered orbit.
    CameraSpec orbit = cam_spec;
    probe.cameras = generate_cameras<R>(orbit, seed);
    Vec3<R> pos = {R(cam_spec.orbit_radius * std::cos(elev)), R(0),
                   R(cam_spec.orbit_radius * std::sin(elev))};
    auto designated = make_lookat_camera<R>(pos, Vec3<R>{R(0), R(0), R(0)}, R(cam_spec.focal),
                                            R(cam_spec.focal), cam_spec.width, cam_spec.height);
    designated.split = CameraSplit::novel;
    probe.cameras[0] = designated;
    probe.designated_view = 0;
    return probe;
}

/// Cloud with one object's Gaussians (and their referring rows) removed.
template <typename R>
inline GaussianCloud<R> remove_object(const GaussianCloud<R>& cloud, std::int32_t object_id) {
    GaussianCloud<R> out;
    const std::size_t d = cloud.referring.cols;
    std::vector<std::span<const R>> keep_rows;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (cloud.gaussians[i].object_id == object_id) continue;
        out.gaussians.push_back(cloud.gaussians[i]);
        keep_rows.push_back(cloud.referring.row(i));
    }
    out.referring = Tensor2<R>(out.gaussians.size(), d);
    for (std::size_t i = 0; i < keep_rows.size(); ++i) {
        std::copy(keep_rows[i].begin(), keep_rows[i].end(), out.referring.row(i).begin());
    }
    return out;
}

}  // namespace splatseg
