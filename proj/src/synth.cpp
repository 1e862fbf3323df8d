#include "fform/synth.hpp"

#include "fform/errors.hpp"
#include "fform/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace fform {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
constexpr double kFaceVisibleDot = -0.25;
constexpr double kCylinderHeadroom = 0.1;

struct Projection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

Vec2 forward_of(const Camera& cam) {
    const double n = std::hypot(cam.position.x, cam.position.y);
    return {-cam.position.x / n, -cam.position.y / n};
}

// Camera looks horizontally at the o-space center.
Projection project_point(const Camera& cam, const std::array<double, 3>& p) {
    const Vec2 fw = forward_of(cam);
    const Vec2 right{fw.y, -fw.x};
    const double rx = p[0] - cam.position.x;
    const double ry = p[1] - cam.position.y;
    const double depth = rx * fw.x + ry * fw.y;
    const double lateral = rx * right.x + ry * right.y;
    const double vertical = p[2] - cam.height;
    Projection pr;
    pr.depth = depth;
    if (depth <= 1e-3) {
        pr.u = cam.image_width / 2.0;
        pr.v = cam.image_height / 2.0;
        return pr;
    }
    pr.u = cam.image_width / 2.0 + cam.focal_px * lateral / depth;
    pr.v = cam.image_height / 2.0 - cam.focal_px * vertical / depth;
    return pr;
}

double center_depth(const Camera& cam, const Body& b) {
    const Vec2 fw = forward_of(cam);
    return (b.position.x - cam.position.x) * fw.x + (b.position.y - cam.position.y) * fw.y;
}

bool ray_blocked(const Camera& cam, const std::array<double, 3>& p, const Body& blocker) {
    const double dx = p[0] - cam.position.x;
    const double dy = p[1] - cam.position.y;
    const double fx = cam.position.x - blocker.position.x;
    const double fy = cam.position.y - blocker.position.y;
    const double a = dx * dx + dy * dy;
    const double b = 2.0 * (fx * dx + fy * dy);
    const double c = fx * fx + fy * fy - kBodyRadius * kBodyRadius;
    const double disc = b * b - 4.0 * a * c;
    if (a <= 0.0 || disc < 0.0) return false;
    const double sq = std::sqrt(disc);
    const double t0 = (-b - sq) / (2.0 * a);
    const double t1 = (-b + sq) / (2.0 * a);
    if (t0 >= 1.0 || t1 <= 0.0) return false;
    const double top = blocker.height + kCylinderHeadroom;
    auto z_at = [&](double t) { return cam.height + t * (p[2] - cam.height); };
    const double ta = std::max(t0, 0.0);
    const double tb = std::min(t1, 1.0);
    const double za = z_at(ta);
    const double zb = z_at(tb);
    // The chord inside the cylinder is a straight segment in z.
    return std::max(za, zb) >= 0.0 && std::min(za, zb) <= top;
}

std::array<double, 3> face_normal(KeypointName n, double heading) {
    const double c = std::cos(heading), s = std::sin(heading);
    const Vec2 fw{c, s};
    const Vec2 left{-s, c};
    const double c30 = std::cos(30 * kDeg), s30 = std::sin(30 * kDeg);
    switch (n) {
    case KeypointName::Nose: return {fw.x, fw.y, 0.0};
    case KeypointName::LeftEye: return {c30 * fw.x + s30 * left.x, c30 * fw.y + s30 * left.y, 0.0};
    case KeypointName::RightEye: return {c30 * fw.x - s30 * left.x, c30 * fw.y - s30 * left.y, 0.0};
    case KeypointName::LeftEar: return {left.x, left.y, 0.0};
    case KeypointName::RightEar: return {-left.x, -left.y, 0.0};
    default: return {0.0, 0.0, 0.0};
    }
}

bool is_face(KeypointName n) { return index_of(n) <= index_of(KeypointName::RightEar); }

double base_confidence(double depth) { return std::clamp(1.2 - 0.1 * depth, 0.05, 0.98); }

double clipped_normal(Rng& rng, double sigma) {
    if (sigma <= 0.0) {
        rng.normal(); // keep the stream aligned regardless of sigma
        return 0.0;
    }
    return std::clamp(rng.normal(0.0, sigma), -3.0 * sigma, 3.0 * sigma);
}

bool camera_inside_any(const Camera& cam, const std::vector<Body>& bodies) {
    return std::any_of(bodies.begin(), bodies.end(), [&](const Body& b) {
        return std::hypot(cam.position.x - b.position.x, cam.position.y - b.position.y) < kBodyRadius + 0.05;
    });
}

struct PixelRange {
    double lo = 1e300;
    double hi = -1e300;
};

PixelRange pixel_range(const Camera& cam, const Body& b) {
    PixelRange r;
    for (const auto& j : body_joints(b)) {
        const Projection p = project_point(cam, j);
        r.lo = std::min(r.lo, p.u);
        r.hi = std::max(r.hi, p.u);
    }
    return r;
}

std::string default_frame_id(const SynthConfig& cfg) {
    std::string s(to_string(cfg.formation));
    s += "_" + std::to_string(cfg.angle_deg) + "_o" + std::to_string(cfg.outliers) + "_s" + std::to_string(cfg.seed);
    return s;
}

} // namespace

FormationTemplate make_template(Formation f, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw InputError("template scale must be positive");
    FormationTemplate t;
    t.formation = f;
    const double h = scale / 2.0;
    t.o_space_radius = h;
    switch (f) {
    case Formation::FaceToFace:
        t.positions = {{-h, 0.0}, {h, 0.0}};
        t.headings = {0.0, kPi};
        break;
    case Formation::SideBySide:
        t.positions = {{-h, 0.0}, {h, 0.0}};
        t.headings = {kPi / 2, kPi / 2};
        break;
    case Formation::LShaped:
        t.positions = {{h, 0.0}, {0.0, h}};
        t.headings = {kPi, -kPi / 2};
        break;
    case Formation::Triangle:
        for (double a : {90.0, 210.0, 330.0}) {
            const Vec2 p{h * std::cos(a * kDeg), h * std::sin(a * kDeg)};
            t.positions.push_back(p);
            t.headings.push_back(std::atan2(-p.y, -p.x));
        }
        break;
    }
    return t;
}

void SynthConfig::validate() const {
    if (!is_approach_angle(angle_deg)) throw InputError("angle must be one of -90,-60,-30,0,30,60,90");
    const double dmax = std::max(distance_m, distance_max_m);
    if (!(distance_m > 0.0) || !std::isfinite(dmax)) throw InputError("camera distance must be positive");
    if (!allow_any_distance && (distance_m < 2.0 || dmax > 5.0)) {
        throw InputError("camera distance must lie in [2, 5] m unless overridden");
    }
    if (image_width <= 0 || image_height <= 0) throw InputError("image dimensions must be positive");
    if (!(noise_px >= 0.0)) throw InputError("noise sigma must be >= 0");
    if (outliers < 0) throw InputError("outlier count must be >= 0");
    if (!(scale_m > 0.0)) throw InputError("scale must be positive");
    if (!(scale_jitter >= 0.0 && scale_jitter < 0.5)) throw InputError("scale jitter must be in [0, 0.5)");
    if (position_jitter_m < 0.0 || heading_jitter_deg < 0.0 || azimuth_jitter_deg < 0.0) {
        throw InputError("jitter values must be >= 0");
    }
}

SynthConfig synth_config_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("synth config: ") + e.what());
    }
    if (!j.is_object()) throw InputError("synth config must be a JSON object");
    SynthConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "formation") c.formation = formation_from_string(v.get<std::string>());
            else if (key == "angle_deg") c.angle_deg = v.get<int>();
            else if (key == "distance_m") c.distance_m = v.get<double>();
            else if (key == "distance_max_m") c.distance_max_m = v.get<double>();
            else if (key == "allow_any_distance") c.allow_any_distance = v.get<bool>();
            else if (key == "image_width") c.image_width = v.get<int>();
            else if (key == "image_height") c.image_height = v.get<int>();
            else if (key == "noise_px") c.noise_px = v.get<double>();
            else if (key == "outliers") c.outliers = v.get<int>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "scale_m") c.scale_m = v.get<double>();
            else if (key == "scale_jitter") c.scale_jitter = v.get<double>();
            else if (key == "position_jitter_m") c.position_jitter_m = v.get<double>();
            else if (key == "heading_jitter_deg") c.heading_jitter_deg = v.get<double>();
            else if (key == "azimuth_jitter_deg") c.azimuth_jitter_deg = v.get<double>();
            else if (key == "frame_id") c.frame_id = v.get<std::string>();
            else if (key != "count") throw InputError("synth config: unknown field '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string synth_config_to_json(const SynthConfig& c) {
    nlohmann::ordered_json j = {{"formation", to_string(c.formation)},
                                {"angle_deg", c.angle_deg},
                                {"distance_m", c.distance_m},
                                {"distance_max_m", c.distance_max_m},
                                {"allow_any_distance", c.allow_any_distance},
                                {"image_width", c.image_width},
                                {"image_height", c.image_height},
                                {"noise_px", c.noise_px},
                                {"outliers", c.outliers},
                                {"seed", c.seed},
                                {"scale_m", c.scale_m},
                                {"scale_jitter", c.scale_jitter},
                                {"position_jitter_m", c.position_jitter_m},
                                {"heading_jitter_deg", c.heading_jitter_deg},
                                {"azimuth_jitter_deg", c.azimuth_jitter_deg},
                                {"frame_id", c.frame_id}};
    return j.dump(2);
}

double focal_length_px(int image_height) { return 0.55 * image_height * 3.5 / kNominalHeight; }

std::array<std::array<double, 3>, kNumKeypoints> body_joints(const Body& b) {
    const double k = b.height / kNominalHeight;
    const double c = std::cos(b.heading), s = std::sin(b.heading);
    auto at = [&](double fwd, double side, double z) -> std::array<double, 3> {
        fwd *= k;
        side *= k;
        return {b.position.x + fwd * c - side * s, b.position.y + fwd * s + side * c, z * k};
    };
    const double sh = kShoulderWidth / 2.0;
    const double hp = kHipWidth / 2.0;
    return {{
        at(0.10, 0.0, 1.58),     // nose
        at(0.07, 0.032, 1.62),   // leftEye
        at(0.07, -0.032, 1.62),  // rightEye
        at(-0.01, 0.075, 1.60),  // leftEar
        at(-0.01, -0.075, 1.60), // rightEar
        at(0.0, sh, 1.42),       // leftShoulder
        at(0.0, -sh, 1.42),      // rightShoulder
        at(0.0, sh + 0.02, 1.12),
        at(0.0, -sh - 0.02, 1.12),
        at(0.04, sh + 0.02, 0.84),
        at(0.04, -sh - 0.02, 0.84),
        at(0.0, hp, 0.95),
        at(0.0, -hp, 0.95),
        at(0.02, 0.11, 0.50),
        at(0.02, -0.11, 0.50),
        at(0.0, 0.11, 0.08),
        at(0.0, -0.11, 0.08),
    }};
}

SceneGeometry build_geometry(const SynthConfig& cfg) {
    cfg.validate();
    Rng geo(derive_seed(cfg.seed, 1));
    SceneGeometry g;
    g.formation = cfg.formation;
    g.angle_deg = cfg.angle_deg;

    // The draw is taken either way so fixed and ranged distances share the rest of the stream.
    const double u = geo.uniform();
    const double distance =
        cfg.distance_max_m > cfg.distance_m ? cfg.distance_m + (cfg.distance_max_m - cfg.distance_m) * u : cfg.distance_m;
    const double scale = cfg.scale_m * (1.0 + geo.uniform(-cfg.scale_jitter, cfg.scale_jitter));
    const FormationTemplate tpl = make_template(cfg.formation, scale);
    g.o_space_radius = tpl.o_space_radius;

    for (std::size_t m = 0; m < tpl.positions.size(); ++m) {
        Body b;
        b.position = {tpl.positions[m].x + clipped_normal(geo, cfg.position_jitter_m),
                      tpl.positions[m].y + clipped_normal(geo, cfg.position_jitter_m)};
        b.heading = tpl.headings[m] + clipped_normal(geo, cfg.heading_jitter_deg * kDeg);
        b.height = kMemberHeights[m] * (1.0 + geo.uniform(-0.02, 0.02));
        b.member = true;
        g.bodies.push_back(b);
    }

    g.camera.focal_px = focal_length_px(cfg.image_height);
    g.camera.image_width = cfg.image_width;
    g.camera.image_height = cfg.image_height;
    bool placed = false;
    for (int attempt = 0; attempt < 10 && !placed; ++attempt) {
        const double az = (cfg.angle_deg + clipped_normal(geo, cfg.azimuth_jitter_deg)) * kDeg;
        g.camera.position = {distance * std::cos(az), distance * std::sin(az)};
        placed = !camera_inside_any(g.camera, g.bodies);
    }
    if (!placed) throw PlacementError("camera falls inside a body cylinder after 10 placement attempts");

    if (cfg.outliers > 0) {
        Rng orng(derive_seed(cfg.seed, 2));
        PixelRange group;
        for (const Body& b : g.bodies) {
            const PixelRange r = pixel_range(g.camera, b);
            group.lo = std::min(group.lo, r.lo);
            group.hi = std::max(group.hi, r.hi);
        }
        const Vec2 fw = forward_of(g.camera);
        const Vec2 right{fw.y, -fw.x};
        const double rspace = 1.5 * tpl.p_space_radius();
        for (int o = 0; o < cfg.outliers; ++o) {
            bool ok = false;
            for (int attempt = 0; attempt < 500 && !ok; ++attempt) {
                const double side = orng.uniform() < 0.5 ? -1.0 : 1.0;
                const double lateral = side * orng.uniform(1.0, 2.0);
                const double depth = orng.uniform(std::max(1.5, distance - 0.5), distance + 2.0);
                Body b;
                b.position = {g.camera.position.x + depth * fw.x + lateral * right.x,
                              g.camera.position.y + depth * fw.y + lateral * right.y};
                b.heading = orng.uniform(-kPi, kPi);
                b.height = kNominalHeight * orng.uniform(0.92, 1.08);
                b.member = false;

                if (!(std::hypot(b.position.x, b.position.y) > rspace)) continue;
                if (std::any_of(g.bodies.begin(), g.bodies.end(), [&](const Body& other) {
                        const double clearance = other.member ? kOutlierClearance : 2.0 * kBodyRadius + 0.1;
                        return std::hypot(other.position.x - b.position.x, other.position.y - b.position.y) <
                               clearance;
                    })) {
                    continue;
                }
                if (std::hypot(b.position.x - g.camera.position.x, b.position.y - g.camera.position.y) <
                    kBodyRadius + 0.3) {
                    continue;
                }
                const PixelRange r = pixel_range(g.camera, b);
                const double center = 0.5 * (r.lo + r.hi);
                if (center < 0.03 * cfg.image_width || center > 0.97 * cfg.image_width) continue;
                const double px_height = g.camera.focal_px * b.height / depth;
                const double margin = 0.1 * px_height;
                if (r.hi > group.lo - margin && r.lo < group.hi + margin) continue;
                g.bodies.push_back(b);
                ok = true;
            }
            if (!ok) throw PlacementError("could not place outlier " + std::to_string(o) + " in r-space");
        }
    }
    return g;
}

Scene project_scene(const SceneGeometry& geometry, const SynthConfig& cfg) {
    const Camera& cam = geometry.camera;
    const double w = cam.image_width;
    const double h = cam.image_height;

    std::vector<PersonPose> poses;
    std::vector<GroupLabel> labels;
    for (std::size_t bi = 0; bi < geometry.bodies.size(); ++bi) {
        const Body& body = geometry.bodies[bi];
        Rng noise(derive_seed(cfg.seed, 1000 + bi));
        const auto joints = body_joints(body);
        const double own_depth = center_depth(cam, body);
        std::array<Keypoint, kNumKeypoints> kps{};
        for (std::size_t k = 0; k < kNumKeypoints; ++k) {
            const auto name = static_cast<KeypointName>(k);
            const Projection p = project_point(cam, joints[k]);
            bool visible = p.depth > 1e-3 && p.u >= 0.0 && p.u <= w - 1 && p.v >= 0.0 && p.v <= h - 1;
            if (visible && is_face(name)) {
                const auto n = face_normal(name, body.heading);
                const double dx = cam.position.x - joints[k][0];
                const double dy = cam.position.y - joints[k][1];
                const double len = std::hypot(dx, dy);
                visible = (n[0] * dx + n[1] * dy) / len > kFaceVisibleDot;
            }
            if (visible) {
                for (std::size_t oi = 0; oi < geometry.bodies.size() && visible; ++oi) {
                    if (oi == bi) continue;
                    const Body& other = geometry.bodies[oi];
                    if (center_depth(cam, other) < own_depth && ray_blocked(cam, joints[k], other)) visible = false;
                }
            }
            const double conf =
                std::clamp(base_confidence(std::max(p.depth, 0.0)) * (visible ? 1.0 : kOccludedMultiplier), 0.0, 1.0);
            const double nu = noise.normal(0.0, 1.0) * cfg.noise_px;
            const double nv = noise.normal(0.0, 1.0) * cfg.noise_px;
            kps[k] = Keypoint{name, std::clamp(p.u + nu, 0.0, w - 1), std::clamp(p.v + nv, 0.0, h - 1), conf};
        }
        poses.emplace_back("", kps);
        labels.push_back(body.member ? GroupLabel::G : GroupLabel::O);
    }

    Scene s;
    s.frame_id = cfg.frame_id.empty() ? default_frame_id(cfg) : cfg.frame_id;
    s.image_width = cam.image_width;
    s.image_height = cam.image_height;
    s.poses = std::move(poses);
    s.truth = SceneTruth{std::move(labels), geometry.formation, geometry.angle_deg};
    Scene ordered = order_left_to_right(s);
    for (std::size_t i = 0; i < ordered.poses.size(); ++i) {
        ordered.poses[i] = PersonPose("p" + std::to_string(i), ordered.poses[i].keypoints());
    }
    return ordered;
}

RenderedScene render_scene_with_geometry(const SynthConfig& cfg) {
    RenderedScene r;
    r.geometry = build_geometry(cfg);
    r.scene = project_scene(r.geometry, cfg);
    return r;
}

Scene render_scene(const SynthConfig& cfg) { return render_scene_with_geometry(cfg).scene; }

std::vector<Scene> generate_dataset(const DatasetSpec& spec, std::uint64_t shuffle_seed) {
    std::vector<Scene> out;
    for (const auto& [cfg, count] : spec) {
        if (count == 0) throw InputError("dataset counts must be positive");
        for (std::size_t j = 0; j < count; ++j) {
            SynthConfig c = cfg;
            c.seed = cfg.seed + j;
            c.frame_id.clear();
            out.push_back(render_scene(c));
        }
    }
    Rng rng(shuffle_seed);
    rng.shuffle(out);
    return out;
}

std::vector<bool> split_train_test(const std::vector<Scene>& scenes, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw InputError("train fraction must be in [0,1]");
    std::vector<bool> train(scenes.size(), true);
    std::map<int, std::vector<std::size_t>> by_formation;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        if (scenes[i].truth && scenes[i].truth->formation) {
            by_formation[static_cast<int>(*scenes[i].truth->formation)].push_back(i);
        }
    }
    Rng rng(seed);
    for (auto& [f, idx] : by_formation) {
        rng.shuffle(idx);
        const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
        for (std::size_t k = n_train; k < idx.size(); ++k) train[idx[k]] = false;
    }
    return train;
}

DatasetSpec standard_dataset_spec(std::size_t per_cell, std::uint64_t seed) {
    DatasetSpec spec;
    const std::size_t with_outlier = per_cell / 2;
    for (std::size_t fi = 0; fi < kNumFormations; ++fi) {
        for (std::size_t ai = 0; ai < kApproachAngles.size(); ++ai) {
            for (int o = 0; o < 2; ++o) {
                SynthConfig c;
                c.formation = kAllFormations[fi];
                c.angle_deg = kApproachAngles[ai];
                c.distance_m = 2.0;
                c.distance_max_m = 5.0;
                c.outliers = o;
                c.seed = derive_seed(seed, fi * 100 + ai * 2 + static_cast<std::size_t>(o)) >> 16;
                const std::size_t count = o == 1 ? with_outlier : per_cell - with_outlier;
                if (count > 0) spec.emplace_back(c, count);
            }
        }
    }
    return spec;
}

} // namespace fform
