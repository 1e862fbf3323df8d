#pragma once

#include "fform/pose.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fform {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Stick-body constants (meters) at the nominal 1.7 m height.
inline constexpr double kNominalHeight = 1.7;
inline constexpr double kShoulderWidth = 0.40;
inline constexpr double kHipWidth = 0.30;
inline constexpr double kBodyRadius = 0.25;
inline constexpr double kCameraHeight = 1.0;
inline constexpr double kOccludedMultiplier = 0.15;
/// Minimum ground distance between an outlier and any group member.
inline constexpr double kOutlierClearance = 1.2;
/// Relative heights of template slots 0, 1, 2 (fixed subjects per position).
inline constexpr std::array<double, 3> kMemberHeights = {1.70, 1.55, 1.85};

/// Ground-plane layout of one formation, o-space center at the origin.
/// Headings are radians, counter-clockwise from +x.
struct FormationTemplate {
    Formation formation = Formation::FaceToFace;
    std::vector<Vec2> positions;
    std::vector<double> headings;
    double o_space_radius = 0.0;

    double p_space_radius() const { return o_space_radius + kBodyRadius; }
};

/// Canonical geometry for `scale` (o-space diameter, meters). Throws
/// InputError for scale <= 0.
FormationTemplate make_template(Formation f, double scale);

struct SynthConfig {
    Formation formation = Formation::FaceToFace;
    int angle_deg = -90;
    /// Camera distance; if distance_max_m > distance_m it is drawn uniformly
    /// from [distance_m, distance_max_m] per scene.
    double distance_m = 3.5;
    double distance_max_m = 0.0;
    bool allow_any_distance = false;
    int image_width = 1280;
    int image_height = 720;
    double noise_px = 2.0;
    int outliers = 0;
    std::uint64_t seed = 0;
    double scale_m = 0.8;
    double scale_jitter = 0.05;       ///< relative, uniform +-
    double position_jitter_m = 0.03;  ///< gaussian sigma, clipped at 3 sigma
    double heading_jitter_deg = 5.0;  ///< gaussian sigma, clipped at 3 sigma
    double azimuth_jitter_deg = 3.0;  ///< gaussian sigma, clipped at 3 sigma
    std::string frame_id;

    /// Throws InputError (or ConfigError via the CLI) on invalid fields.
    void validate() const;
};

/// JSON object with SynthConfig field names; missing fields keep their
/// defaults, unknown ones are an InputError. A "count" key is ignored here.
SynthConfig synth_config_from_json(std::string_view text);
std::string synth_config_to_json(const SynthConfig& c);

struct Body {
    Vec2 position;
    double heading = 0.0;
    double height = kNominalHeight;
    bool member = true;
};

struct Camera {
    Vec2 position;
    double height = kCameraHeight;
    double focal_px = 0.0;
    int image_width = 0;
    int image_height = 0;
};

/// Everything needed to project a scene, plus the ground-truth metadata.
struct SceneGeometry {
    Camera camera;
    std::vector<Body> bodies; ///< members first, then outliers
    double o_space_radius = 0.0;
    Formation formation = Formation::FaceToFace;
    int angle_deg = 0;
};

/// Focal length giving a 1.7 m body at 3.5 m ~55% of the image height.
double focal_length_px(int image_height);

/// 3D joint positions (x, y, z) of a stick body, in KeypointName order.
std::array<std::array<double, 3>, kNumKeypoints> body_joints(const Body& body);

/// Samples member placement, camera and outliers for `cfg`. Throws
/// PlacementError if the camera keeps landing inside a body.
SceneGeometry build_geometry(const SynthConfig& cfg);

/// Projects bodies through the pinhole camera with occlusion-aware
/// confidences and pixel noise; poses are emitted left to right.
Scene project_scene(const SceneGeometry& geometry, const SynthConfig& cfg);

struct RenderedScene {
    Scene scene;
    SceneGeometry geometry;
};

RenderedScene render_scene_with_geometry(const SynthConfig& cfg);
Scene render_scene(const SynthConfig& cfg);

using DatasetSpec = std::vector<std::pair<SynthConfig, std::size_t>>;

/// Scene j of a config uses seed cfg.seed + j; the concatenation is then
/// shuffled with `shuffle_seed`.
std::vector<Scene> generate_dataset(const DatasetSpec& spec, std::uint64_t shuffle_seed);

/// Per-formation split: the first round(train_fraction * n) scenes of each
/// formation (after a seeded shuffle) are tagged train. Scenes without a
/// formation label are tagged train.
std::vector<bool> split_train_test(const std::vector<Scene>& scenes, double train_fraction, std::uint64_t seed);

/// The acceptance-style corpus: every formation x angle, `per_cell` scenes,
/// half of them with one outlier, camera distance uniform in [2, 5] m.
DatasetSpec standard_dataset_spec(std::size_t per_cell, std::uint64_t seed);

} // namespace fform
