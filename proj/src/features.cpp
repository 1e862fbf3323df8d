#include "fform/features.hpp"

#include "fform/errors.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace fform {

namespace {

// Items (2)-(6) of the catalog, repeated for self, left and right neighbor.
constexpr std::size_t kPoseBlockDim = 8;
constexpr double kGroundConfidence = 0.25;

constexpr std::array<std::string_view, 42> kNodeFeatureNames = {
    "bias",
    "gap_left",
    "gap_right",
    "scaled_gap_left",
    "scaled_gap_right",
    "scaled_gap_min",
    "has_left",
    "has_right",
    "log_height_ratio_left",
    "log_height_ratio_right",
    "abs_log_height_ratio_left",
    "abs_log_height_ratio_right",
    "ground_depth_ratio_left",
    "ground_depth_ratio_right",
    "abs_ground_depth_ratio_left",
    "abs_ground_depth_ratio_right",
    "facing_agreement_left",
    "facing_agreement_right",
    "self.shoulder_width",
    "self.facing",
    "self.back_facing",
    "self.mean_confidence",
    "self.bin_low",
    "self.bin_medium",
    "self.bin_high",
    "self.bin_very_high",
    "left.shoulder_width",
    "left.facing",
    "left.back_facing",
    "left.mean_confidence",
    "left.bin_low",
    "left.bin_medium",
    "left.bin_high",
    "left.bin_very_high",
    "right.shoulder_width",
    "right.facing",
    "right.back_facing",
    "right.mean_confidence",
    "right.bin_low",
    "right.bin_medium",
    "right.bin_high",
    "right.bin_very_high",
};

void append_pose_block(std::vector<double>& out, const PersonPose& p, int image_width) {
    out.push_back(shoulder_width_px(p) / image_width);
    out.push_back(facing_score(p));
    out.push_back(is_back_facing(p) ? 1.0 : 0.0);
    std::array<double, kNumBins> counts{};
    double conf_sum = 0.0;
    for (const Keypoint& k : p.keypoints()) {
        conf_sum += k.confidence;
        counts[static_cast<std::size_t>(bin_confidence(k.confidence))] += 1.0;
    }
    out.push_back(conf_sum / kNumKeypoints);
    for (double c : counts) out.push_back(c / kNumKeypoints);
}

// Foot offset below the horizon, proportional to inverse depth for a level
// camera with the principal point at the image center. Empty when neither
// ankle is confidently in frame.
std::optional<double> ground_offset(const PersonPose& p, int image_height) {
    const Keypoint& l = p[KeypointName::LeftAnkle];
    const Keypoint& r = p[KeypointName::RightAnkle];
    double y = -1.0;
    if (l.confidence >= kGroundConfidence) y = std::max(y, l.y);
    if (r.confidence >= kGroundConfidence) y = std::max(y, r.y);
    const double offset = y - 0.5 * image_height;
    if (y < 0.0 || offset < 0.02 * image_height) return std::nullopt;
    return offset;
}

double ground_depth_ratio(const PersonPose& self, const PersonPose* other, int image_height) {
    if (!other) return 0.0;
    const auto a = ground_offset(self, image_height);
    const auto b = ground_offset(*other, image_height);
    if (!a || !b) return 0.0;
    return std::log(*b / *a);
}

double normalize(double v, double extent) {
    const double half = extent / 2.0;
    return std::clamp((v - half) / half, -1.0, 1.0);
}

} // namespace

std::size_t node_feature_dim() { return kNodeFeatureNames.size(); }

std::span<const std::string_view> node_feature_names() { return kNodeFeatureNames; }

double shoulder_width_px(const PersonPose& p) {
    return std::abs(p[KeypointName::LeftShoulder].x - p[KeypointName::RightShoulder].x);
}

double body_height_px(const PersonPose& p) {
    double lo = p.keypoints()[0].y;
    double hi = lo;
    for (const Keypoint& k : p.keypoints()) {
        lo = std::min(lo, k.y);
        hi = std::max(hi, k.y);
    }
    return std::max(hi - lo, 1.0);
}

double facing_score(const PersonPose& p) {
    const double ls = p[KeypointName::LeftShoulder].x;
    const double rs = p[KeypointName::RightShoulder].x;
    const double mid = 0.5 * (ls + rs);
    const double score = (p[KeypointName::Nose].x - mid) / std::max(std::abs(ls - rs), kFacingEpsilon);
    return std::clamp(score, -kFacingClamp, kFacingClamp);
}

bool is_back_facing(const PersonPose& p) {
    return p[KeypointName::LeftEye].confidence < 0.25 && p[KeypointName::RightEye].confidence < 0.25 &&
           p[KeypointName::LeftEar].confidence >= 0.25 && p[KeypointName::RightEar].confidence >= 0.25;
}

NodeFeatures node_features(const Scene& scene, std::size_t i) {
    const std::size_t n = scene.poses.size();
    if (i >= n) throw InputError("node index out of range");
    const PersonPose& self = scene.poses[i];
    const double self_anchor = anchor_x(self);
    const double self_height = body_height_px(self);
    const double width = scene.image_width;

    const PersonPose* left = i > 0 ? &scene.poses[i - 1] : nullptr;
    const PersonPose* right = i + 1 < n ? &scene.poses[i + 1] : nullptr;

    NodeFeatures f;
    f.values.reserve(kNodeFeatureNames.size());
    f.values.push_back(1.0);

    const double dl = left ? self_anchor - anchor_x(*left) : 0.0;
    const double dr = right ? anchor_x(*right) - self_anchor : 0.0;
    f.values.push_back(left ? dl / width : kNoNeighborGap);
    f.values.push_back(right ? dr / width : kNoNeighborGap);
    const double sl = left ? dl / self_height : kNoNeighborGap;
    const double sr = right ? dr / self_height : kNoNeighborGap;
    f.values.push_back(sl);
    f.values.push_back(sr);
    f.values.push_back(std::min(sl, sr));
    f.values.push_back(left ? 1.0 : 0.0);
    f.values.push_back(right ? 1.0 : 0.0);
    const double hl = left ? std::log(self_height / body_height_px(*left)) : 0.0;
    const double hr = right ? std::log(self_height / body_height_px(*right)) : 0.0;
    f.values.push_back(hl);
    f.values.push_back(hr);
    f.values.push_back(std::abs(hl));
    f.values.push_back(std::abs(hr));
    const double gl = ground_depth_ratio(self, left, scene.image_height);
    const double gr = ground_depth_ratio(self, right, scene.image_height);
    f.values.push_back(gl);
    f.values.push_back(gr);
    f.values.push_back(std::abs(gl));
    f.values.push_back(std::abs(gr));
    const double fs = std::tanh(facing_score(self));
    f.values.push_back(left ? fs * std::tanh(facing_score(*left)) : 0.0);
    f.values.push_back(right ? fs * std::tanh(facing_score(*right)) : 0.0);

    append_pose_block(f.values, self, scene.image_width);
    if (left) append_pose_block(f.values, *left, scene.image_width);
    else f.values.insert(f.values.end(), kPoseBlockDim, 0.0);
    if (right) append_pose_block(f.values, *right, scene.image_width);
    else f.values.insert(f.values.end(), kPoseBlockDim, 0.0);
    return f;
}

std::vector<NodeFeatures> chain_features(const Scene& ordered_scene) {
    std::vector<NodeFeatures> out;
    out.reserve(ordered_scene.poses.size());
    for (std::size_t i = 0; i < ordered_scene.poses.size(); ++i) out.push_back(node_features(ordered_scene, i));
    return out;
}

GroupFeatureVector group_features(std::span<const PersonPose> poses, int image_width, int image_height) {
    if (poses.empty()) throw InputError("group_features needs at least one pose");
    if (poses.size() > kGroupSlots) {
        throw InputError("group_features holds at most 3 poses, got " + std::to_string(poses.size()));
    }
    if (image_width <= 0 || image_height <= 0) throw InputError("image dimensions must be positive");
    GroupFeatureVector g;
    for (std::size_t s = 0; s < poses.size(); ++s) {
        double* slot = g.values.data() + s * kSlotDim;
        for (std::size_t k = 0; k < kNumKeypoints; ++k) {
            const Keypoint& kp = poses[s].keypoints()[k];
            double* e = slot + k * kPerKeypointDim;
            e[0] = normalize(kp.x, image_width);
            e[1] = normalize(kp.y, image_height);
            e[2 + static_cast<std::size_t>(bin_confidence(kp.confidence))] = 1.0;
        }
        g.values[kGroupSlots * kSlotDim + s] = 1.0;
    }
    return g;
}

AngleFeatureVector angle_features(const GroupFeatureVector& gfv, Formation formation) {
    AngleFeatureVector a;
    std::copy(gfv.values.begin(), gfv.values.end(), a.values.begin());
    a.values[kGroupFeatureDim + static_cast<std::size_t>(formation)] = 1.0;
    return a;
}

} // namespace fform
