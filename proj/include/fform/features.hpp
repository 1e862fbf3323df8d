#pragma once

#include "fform/pose.hpp"

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace fform {

/// Embedded in every serialized model; loading a model built against a
/// different catalog is a hard error.
inline constexpr std::string_view kFeatureCatalogVersion = "fform-catalog-1";

inline constexpr std::size_t kGroupSlots = 3;
inline constexpr std::size_t kPerKeypointDim = 2 + kNumBins;
inline constexpr std::size_t kSlotDim = kNumKeypoints * kPerKeypointDim; // 102
inline constexpr std::size_t kGroupFeatureDim = kGroupSlots * kSlotDim + kGroupSlots; // 309
inline constexpr std::size_t kAngleFeatureDim = kGroupFeatureDim + kNumFormations; // 313

/// Sentinel gap when a pose has no neighbor on that side.
inline constexpr double kNoNeighborGap = 2.0;
inline constexpr double kFacingEpsilon = 1e-6;
inline constexpr double kFacingClamp = 5.0;

/// Per-person CRF observation vector. The catalog (see node_feature_names)
/// covers the person itself and its immediate left/right neighbors.
struct NodeFeatures {
    std::vector<double> values;
};

std::size_t node_feature_dim();
std::span<const std::string_view> node_feature_names();

/// Requires `scene` already ordered left to right.
NodeFeatures node_features(const Scene& scene, std::size_t i);

/// Node features for every pose, row-major n x node_feature_dim().
std::vector<NodeFeatures> chain_features(const Scene& ordered_scene);

struct GroupFeatureVector {
    std::array<double, kGroupFeatureDim> values{};
};

struct AngleFeatureVector {
    std::array<double, kAngleFeatureDim> values{};
};

/// Up to three poses (left to right) laid out in fixed slots; unused slots
/// are zero with presence flag 0. Throws InputError for 0 or >3 poses.
GroupFeatureVector group_features(std::span<const PersonPose> poses, int image_width, int image_height);

AngleFeatureVector angle_features(const GroupFeatureVector& gfv, Formation formation);

// Pose measurements shared by the features and the rule baseline.
double shoulder_width_px(const PersonPose& pose);
double body_height_px(const PersonPose& pose);
double facing_score(const PersonPose& pose);
bool is_back_facing(const PersonPose& pose);

} // namespace fform
