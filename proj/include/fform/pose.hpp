#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fform {

inline constexpr std::size_t kNumKeypoints = 17;

/// The 17 body landmarks, in the order pose estimators emit them.
enum class KeypointName : std::size_t {
    Nose,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
};

std::string_view to_string(KeypointName name);
/// Throws ValidationError for unknown names.
KeypointName keypoint_from_string(std::string_view s);

constexpr std::size_t index_of(KeypointName n) { return static_cast<std::size_t>(n); }

struct Keypoint {
    KeypointName name = KeypointName::Nose;
    double x = 0.0; ///< pixels, origin top-left
    double y = 0.0;
    double confidence = 0.0;

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

enum class ConfidenceBin { Low, Medium, High, VeryHigh };
inline constexpr std::size_t kNumBins = 4;

/// Quantizes a keypoint confidence: [0,.25) Low, [.25,.5) Medium,
/// [.5,.75) High, [.75,1] VeryHigh. Throws InputError outside [0,1].
ConfidenceBin bin_confidence(double c);

enum class GroupLabel { G, O };

/// One person's skeleton. Always holds all 17 keypoints; undetected ones
/// carry confidence 0 at (0,0).
class PersonPose {
public:
    PersonPose() = default;
    /// Validates that every keypoint is finite, in range, and stored at the
    /// slot matching its name.
    PersonPose(std::string person_id, const std::array<Keypoint, kNumKeypoints>& keypoints);

    const std::string& person_id() const { return person_id_; }
    const std::array<Keypoint, kNumKeypoints>& keypoints() const { return keypoints_; }
    const Keypoint& operator[](KeypointName n) const { return keypoints_[index_of(n)]; }

    friend bool operator==(const PersonPose&, const PersonPose&) = default;

private:
    std::string person_id_;
    std::array<Keypoint, kNumKeypoints> keypoints_{};
};

/// Canonical order: face-to-face, side-by-side, L-shaped, triangle.
enum class Formation { FaceToFace, SideBySide, LShaped, Triangle };
inline constexpr std::size_t kNumFormations = 4;
inline constexpr std::array<Formation, kNumFormations> kAllFormations = {
    Formation::FaceToFace, Formation::SideBySide, Formation::LShaped, Formation::Triangle};

std::string_view to_string(Formation f);
Formation formation_from_string(std::string_view s);
std::size_t member_count(Formation f);

/// Approach angles in degrees; the canonical class order is ascending.
inline constexpr std::array<int, 7> kApproachAngles = {-90, -60, -30, 0, 30, 60, 90};
bool is_approach_angle(int degrees);
/// Index into kApproachAngles; throws InputError for other values.
std::size_t angle_index(int degrees);

struct SceneTruth {
    std::vector<GroupLabel> membership;
    std::optional<Formation> formation;
    std::optional<int> angle_deg;

    friend bool operator==(const SceneTruth&, const SceneTruth&) = default;
};

struct Scene {
    std::string frame_id;
    int image_width = 0;
    int image_height = 0;
    std::vector<PersonPose> poses;
    std::optional<SceneTruth> truth;

    friend bool operator==(const Scene&, const Scene&) = default;
};

/// Throws ValidationError if image dims or truth membership length are wrong.
void validate(const Scene& scene);

/// Mean x of keypoints with confidence >= 0.5, or of all 17 if none qualify.
double anchor_x(const PersonPose& pose);

/// Stable sort of poses (and truth membership) by anchor_x.
Scene order_left_to_right(const Scene& scene);

std::vector<Scene> parse_scenes(std::istream& in);
void write_scenes(std::ostream& out, std::span<const Scene> scenes);
Scene parse_scene_line(std::string_view line, std::size_t line_number = 1);
std::string scene_to_line(const Scene& scene);

} // namespace fform
