#include "motionflow/synth.hpp"

#include <algorithm>
#include <cmath>

#include "motionflow/errors.hpp"

namespace motionflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Deterministic 64-bit generator; the sequence is part of the output contract,
// so it is pinned here rather than delegated to the standard library.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double gaussian() {
        // Box-Muller; the log argument is kept away from zero.
        const double u1 = std::max(uniform(), 1e-12);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }
};

// Smooth band-limited texture: a fixed sum of sinusoids with seeded
// wavelengths in [6, 48] px. Values stay in [0, 1] by construction.
struct Texture {
    static constexpr int kWaves = 6;
    double fx[kWaves], fy[kWaves], phase[kWaves];

    explicit Texture(std::uint64_t seed) {
        SplitMix64 rng(seed);
        for (int k = 0; k < kWaves; ++k) {
            const double angle = rng.uniform() * 2.0 * kPi;
            const double wavelength = 6.0 * std::pow(8.0, rng.uniform());
            const double freq = 2.0 * kPi / wavelength;
            fx[k] = freq * std::cos(angle);
            fy[k] = freq * std::sin(angle);
            phase[k] = rng.uniform() * 2.0 * kPi;
        }
    }

    double at(double x, double y) const {
        double v = 0.5;
        for (int k = 0; k < kWaves; ++k)
            v += (0.5 / kWaves) * std::sin(fx[k] * x + fy[k] * y + phase[k]);
        return v;
    }
};

struct Pose {
    double cx, cy;     // centroid at the query time
    double cos_r, sin_r; // accumulated spin
};

double deg2rad(double d) { return d * kPi / 180.0; }

std::array<double, 2> shape_centroid(const ShapeSpec& s) {
    if (s.kind == ShapeKind::ellipse) return s.center;
    // Area centroid via the shoelace formula; falls back to the vertex mean
    // for degenerate (zero-area) polygons.
    double area2 = 0.0, cx = 0.0, cy = 0.0;
    const std::size_t n = s.vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double cross = s.vertices[j][0] * s.vertices[i][1] -
                             s.vertices[i][0] * s.vertices[j][1];
        area2 += cross;
        cx += (s.vertices[j][0] + s.vertices[i][0]) * cross;
        cy += (s.vertices[j][1] + s.vertices[i][1]) * cross;
    }
    if (std::abs(area2) < 1e-12) {
        double mx = 0.0, my = 0.0;
        for (const auto& v : s.vertices) {
            mx += v[0];
            my += v[1];
        }
        return {mx / n, my / n};
    }
    return {cx / (3.0 * area2), cy / (3.0 * area2)};
}

Pose pose_at(const ShapeSpec& s, double t) {
    const auto c = shape_centroid(s);
    const double r = deg2rad(s.spin_deg) * t;
    return {c[0] + s.velocity[0] * t, c[1] + s.velocity[1] * t, std::cos(r), std::sin(r)};
}

// Maps a scene point into the shape's material frame (centroid-relative,
// spin removed).
std::array<double, 2> to_material(const Pose& pose, double x, double y) {
    const double dx = x - pose.cx;
    const double dy = y - pose.cy;
    return {pose.cos_r * dx + pose.sin_r * dy, -pose.sin_r * dx + pose.cos_r * dy};
}

bool inside_material(const ShapeSpec& s, const std::array<double, 2>& c0, double mx, double my) {
    if (s.kind == ShapeKind::ellipse) {
        const double a = deg2rad(s.angle_deg);
        const double qx = std::cos(a) * mx + std::sin(a) * my;
        const double qy = -std::sin(a) * mx + std::cos(a) * my;
        const double rx = qx / s.radii[0];
        const double ry = qy / s.radii[1];
        return rx * rx + ry * ry <= 1.0;
    }
    bool inside = false;
    const std::size_t n = s.vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = s.vertices[i][0] - c0[0], yi = s.vertices[i][1] - c0[1];
        const double xj = s.vertices[j][0] - c0[0], yj = s.vertices[j][1] - c0[1];
        if ((yi > my) != (yj > my) && mx < (xj - xi) * (my - yi) / (yj - yi) + xi)
            inside = !inside;
    }
    return inside;
}

struct ShapeRuntime {
    const ShapeSpec* spec;
    std::array<double, 2> centroid0;
    Texture texture;

    ShapeRuntime(const ShapeSpec& s) : spec(&s), centroid0(shape_centroid(s)), texture(s.texture_seed) {}
};

struct SceneRuntime {
    const SceneSpec* spec;
    Texture background;
    std::vector<ShapeRuntime> shapes;

    explicit SceneRuntime(const SceneSpec& s) : spec(&s), background(s.background_seed) {
        shapes.reserve(s.shapes.size());
        for (const ShapeSpec& sh : s.shapes) shapes.emplace_back(sh);
    }

    // Later shapes sit on top of earlier ones.
    int top_shape(double x, double y, const std::vector<Pose>& poses) const {
        for (int i = static_cast<int>(shapes.size()) - 1; i >= 0; --i) {
            const auto m = to_material(poses[i], x, y);
            if (inside_material(*shapes[i].spec, shapes[i].centroid0, m[0], m[1])) return i;
        }
        return -1;
    }

    double sample(double x, double y, const std::vector<Pose>& poses, double t) const {
        const int s = top_shape(x, y, poses);
        if (s < 0) {
            return background.at(x - spec->background_drift[0] * t,
                                 y - spec->background_drift[1] * t);
        }
        const auto m = to_material(poses[s], x, y);
        return shapes[s].texture.at(m[0] + shapes[s].centroid0[0],
                                    m[1] + shapes[s].centroid0[1]);
    }
};

void check_spec(const SceneSpec& spec) {
    detail::require(spec.width >= 1 && spec.height >= 1, "scene: dims must be positive");
    detail::require(spec.num_frames >= 1, "scene: num_frames must be >= 1");
    detail::require(spec.noise_sigma >= 0.0, "scene: noise_sigma must be >= 0");
    detail::require(spec.interval >= 0, "scene: interval must be >= 0");
    for (const ShapeSpec& s : spec.shapes) {
        detail::require(s.class_id >= 1, "scene: shape class ids start at 1");
        if (s.kind == ShapeKind::polygon)
            detail::require(s.vertices.size() >= 3, "scene: polygon needs >= 3 vertices");
        else
            detail::require(s.radii[0] > 0.0 && s.radii[1] > 0.0,
                            "scene: ellipse radii must be positive");
    }
}

std::vector<Pose> poses_at(const SceneSpec& spec, double t) {
    std::vector<Pose> poses;
    poses.reserve(spec.shapes.size());
    for (const ShapeSpec& s : spec.shapes) poses.push_back(pose_at(s, t));
    return poses;
}

constexpr int kSupersample = 4;

}  // namespace

int scene_num_classes(const SceneSpec& spec) {
    int max_id = 0;
    for (const ShapeSpec& s : spec.shapes) max_id = std::max(max_id, s.class_id);
    return max_id + 1;
}

Frame render_at_time(const SceneSpec& spec, double t) {
    check_spec(spec);
    const SceneRuntime scene(spec);
    const std::vector<Pose> poses = poses_at(spec, t);

    Frame frame = make_frame(spec.height, spec.width, 1);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            double sum = 0.0;
            for (int sy = 0; sy < kSupersample; ++sy) {
                const double py = y + (sy + 0.5) / kSupersample - 0.5;
                for (int sx = 0; sx < kSupersample; ++sx) {
                    const double px = x + (sx + 0.5) / kSupersample - 0.5;
                    sum += scene.sample(px, py, poses, t);
                }
            }
            frame.at(y, x) = std::clamp(sum / (kSupersample * kSupersample), 0.0, 1.0);
        }
    }
    return frame;
}

LabelMask mask_at_time(const SceneSpec& spec, double t) {
    check_spec(spec);
    const SceneRuntime scene(spec);
    const std::vector<Pose> poses = poses_at(spec, t);

    LabelMask mask = make_mask(spec.height, spec.width);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const int s = scene.top_shape(x, y, poses);
            mask.at(y, x) = s < 0 ? 0 : spec.shapes[s].class_id;
        }
    }
    return mask;
}

std::pair<std::vector<Frame>, std::vector<LabelMask>> render_sequence(const SceneSpec& spec,
                                                                      std::uint64_t seed) {
    check_spec(spec);
    std::vector<Frame> frames;
    std::vector<LabelMask> masks;
    frames.reserve(spec.num_frames);
    masks.reserve(spec.num_frames);
    for (int t = 0; t < spec.num_frames; ++t) {
        Frame frame = render_at_time(spec, t);
        if (spec.noise_sigma > 0.0) {
            SplitMix64 rng(seed + 0x632BE59BD9B4E019ull * static_cast<std::uint64_t>(t + 1));
            for (double& v : frame.data)
                v = std::clamp(v + spec.noise_sigma * rng.gaussian(), 0.0, 1.0);
        }
        frames.push_back(std::move(frame));
        masks.push_back(mask_at_time(spec, t));
    }
    return {std::move(frames), std::move(masks)};
}

FlowField ground_truth_flow(const SceneSpec& spec, int t) {
    check_spec(spec);
    detail::require(t >= 0 && t + 1 < spec.num_frames,
                    "ground_truth_flow: t must index a consecutive frame pair");
    const SceneRuntime scene(spec);
    const std::vector<Pose> poses = poses_at(spec, t);

    FlowField flow = make_flow(spec.height, spec.width);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const std::size_t i = flow.index(y, x);
            const int s = scene.top_shape(x, y, poses);
            if (s < 0) {
                flow.u[i] = spec.background_drift[0];
                flow.v[i] = spec.background_drift[1];
                continue;
            }
            const ShapeSpec& sh = spec.shapes[s];
            const Pose& pose = poses[s];
            const double w = deg2rad(sh.spin_deg);
            const double cw = std::cos(w), sw = std::sin(w);
            const double dx = x - pose.cx;
            const double dy = y - pose.cy;
            flow.u[i] = sh.velocity[0] + (cw * dx - sw * dy) - dx;
            flow.v[i] = sh.velocity[1] + (sw * dx + cw * dy) - dy;
        }
    }
    return flow;
}

}  // namespace motionflow
